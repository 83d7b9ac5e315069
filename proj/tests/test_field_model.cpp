/**
 * @file test_field_model.cpp
 * @brief Root-zone averaging, daily simulation, sensing and zone presets.
 */

#include <doctest.h>

#include "irrig/error.hpp"
#include "irrig/field_model.hpp"
#include "irrig/scenario.hpp"

#include <cmath>
#include <numeric>

using namespace irrig;

TEST_CASE("root-zone weights of quarter averages") {
    const auto g = SoilGrid::standard();
    for (double zr : {0.5, 1.0}) {
        const auto w = root_zone_weights(g, zr);
        CHECK(std::accumulate(w.begin(), w.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-14));
    }
    // Node values on the 0.025 m spacing chosen so that the trapezoid means of the
    // quarters of [0, 0.5] are 0.2, 0.2, 0.3, 0.3: weighted mean 0.23.
    std::vector<double> profile(g.size(), 0.3);
    for (int i = 0; i <= 8; ++i) profile[i] = 0.2;
    profile[9] = 0.175;
    profile[10] = 0.25;
    profile[11] = 0.325;
    CHECK(depth_average(profile, g, 0.0, 0.125) == doctest::Approx(0.2).epsilon(1e-13));
    CHECK(depth_average(profile, g, 0.125, 0.25) == doctest::Approx(0.2).epsilon(1e-13));
    CHECK(depth_average(profile, g, 0.25, 0.375) == doctest::Approx(0.3).epsilon(1e-13));
    CHECK(depth_average(profile, g, 0.375, 0.5) == doctest::Approx(0.3).epsilon(1e-13));
    CHECK(root_zone_moisture(profile, g, 0.5) == doctest::Approx(0.23).epsilon(1e-12));
    // Linear profile theta = 0.3 - 0.2 z: quarter means are exact midpoint values.
    for (std::size_t i = 0; i < g.size(); ++i) profile[i] = 0.3 - 0.2 * g.node_depths[i];
    const double zr = 0.5;
    double expect = 0.0;
    const double wq[4] = {0.4, 0.3, 0.2, 0.1};
    for (int q = 0; q < 4; ++q) expect += wq[q] * (0.3 - 0.2 * (q + 0.5) * zr / 4.0);
    CHECK(root_zone_moisture(profile, g, zr) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("depth averages of a linear profile") {
    const auto g = SoilGrid::standard();
    std::vector<double> profile;
    for (double z : g.node_depths) profile.push_back(1.0 + 2.0 * z);
    CHECK(depth_average(profile, g, 0.0, 0.25) == doctest::Approx(1.25).epsilon(1e-13));
    CHECK(depth_average(profile, g, 0.33, 0.91) == doctest::Approx(1.0 + 0.33 + 0.91).epsilon(1e-13));
    CHECK_THROWS_AS(depth_average_weights(g, 0.5, 0.2), DomainError);
}

TEST_CASE("presets reproduce field capacity and wilting point") {
    for (const auto& name : preset_zone_names()) {
        const auto z = preset_zone(name);
        CHECK(water_retention(-3.3, z.phi) == doctest::Approx(z.theta_fc).epsilon(1e-3));
        CHECK(water_retention(-150.0, z.phi) == doctest::Approx(z.theta_wp).epsilon(1e-3));
        CHECK(z.u_min < z.u_max);
    }
    CHECK_THROWS_AS(preset_zone("MZ9"), ValidationError);
}

TEST_CASE("thresholds follow moisture levels") {
    const auto z = preset_zone("MZ2");
    const auto t = thresholds_from_moisture(z.phi, 0.28, 0.20, 0.12);
    CHECK(t.psi_anaerobic == kAnaerobicHead);
    CHECK(water_retention(t.psi_opt_high, z.phi) == doctest::Approx(0.28).epsilon(1e-10));
    CHECK(water_retention(t.psi_opt_low, z.phi) == doctest::Approx(0.20).epsilon(1e-10));
    CHECK(water_retention(t.psi_wilting, z.phi) == doctest::Approx(0.12).epsilon(1e-10));
}

TEST_CASE("daily simulation is deterministic and conserves water") {
    const auto z = preset_zone("MZ1");
    const auto s = uniform_state(z, 0.22);
    DailyForcing f{0.02, 0.003, 0.005, 1.1, 0.5};
    const auto a = simulate_day(z, s, f, 0.0, 1);
    const auto b = simulate_day(z, s, f, 0.0, 2);
    CHECK(a.state.psi == b.state.psi);
    const auto model = z.column_model();
    const double change = column_storage(a.state, model) - column_storage(s, model);
    CHECK(std::abs(change - a.budget.net()) <= 1e-9);
    CHECK(a.budget.infiltration + a.budget.runoff == doctest::Approx(0.023).epsilon(1e-12));
    const auto n1 = simulate_day(z, s, f, 1e-3, 7);
    const auto n2 = simulate_day(z, s, f, 1e-3, 7);
    CHECK(n1.state.psi == n2.state.psi);
    CHECK(n1.state.psi != a.state.psi);
}

TEST_CASE("top-layer observation") {
    const auto z = preset_zone("MZ3");
    const auto s = uniform_state(z, 0.27);
    const auto profile = theta_profile(s, z.phi);
    CHECK(observe_top_layer(profile, z.grid, kSensingDepth, 0.0, 3) == doctest::Approx(0.27).epsilon(1e-12));
    const double noisy = observe_top_layer(profile, z.grid, kSensingDepth, 0.01, 3);
    CHECK(noisy != doctest::Approx(0.27).epsilon(1e-12));
    CHECK(noisy == observe_top_layer(profile, z.grid, kSensingDepth, 0.01, 3));
}

TEST_CASE("forcing validation") {
    DailyForcing f;
    f.u_irr = -0.001;
    CHECK_THROWS_AS(f.validate(), DomainError);
}
