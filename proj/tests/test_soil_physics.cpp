/**
 * @file test_soil_physics.cpp
 * @brief Retention, conductivity, Feddes stress and the implicit column stepper.
 */

#include <doctest.h>

#include "irrig/error.hpp"
#include "irrig/field_model.hpp"
#include "irrig/scenario.hpp"
#include "irrig/soil_physics.hpp"

#include <cmath>

using namespace irrig;

namespace {

VanGenuchtenParams sandy_loam() { return {3e-6, 0.40, 0.04, 1.017, 1.299}; }

}  // namespace

TEST_CASE("retention and conductivity match frozen closed-form values") {
    const auto phi = sandy_loam();
    // Values from an independent evaluation of the van Genuchten-Mualem formulas.
    CHECK(water_retention(-1.0, phi) == doctest::Approx(0.3461341843975288).epsilon(1e-13));
    CHECK(water_retention(-3.3, phi) == doctest::Approx(0.2800116911933636).epsilon(1e-13));
    CHECK(water_retention(-150.0, phi) == doctest::Approx(0.12004175647821497).epsilon(1e-13));
    CHECK(hydraulic_conductivity(-1.0, phi) == doctest::Approx(5.8430343891592136e-08).epsilon(1e-10));
    CHECK(hydraulic_conductivity(-3.3, phi) == doctest::Approx(4.4172729356327935e-09).epsilon(1e-10));
    CHECK(hydraulic_conductivity(-150.0, phi) == doctest::Approx(1.5902632398276775e-13).epsilon(1e-8));
}

TEST_CASE("saturated branch") {
    const auto phi = sandy_loam();
    CHECK(water_retention(0.0, phi) == phi.theta_s);
    CHECK(water_retention(0.3, phi) == phi.theta_s);
    CHECK(hydraulic_conductivity(0.0, phi) == phi.ks);
    CHECK(capillary_capacity(0.2, phi) == 0.0);
    CHECK(effective_saturation(0.5, phi) == 1.0);
}

TEST_CASE("inverse retention round trip") {
    const auto phi = sandy_loam();
    for (double psi : {-0.05, -0.7, -3.3, -42.0, -150.0, -800.0}) {
        const double th = water_retention(psi, phi);
        CHECK(inverse_retention(th, phi) == doctest::Approx(psi).epsilon(1e-9));
    }
    CHECK_THROWS_AS(inverse_retention(phi.theta_s, phi), DomainError);
    CHECK_THROWS_AS(inverse_retention(phi.theta_r, phi), DomainError);
}

TEST_CASE("capacity and conductivity derivative agree with central differences") {
    for (const auto& name : preset_zone_names()) {
        const auto phi = preset_zone(name).phi;
        for (double psi : {-0.3, -1.0, -3.3, -10.0, -50.0, -150.0}) {
            const double h = 1e-5 * std::abs(psi);
            const double fd_c = (water_retention(psi + h, phi) - water_retention(psi - h, phi)) / (2.0 * h);
            CHECK(std::abs(capillary_capacity(psi, phi) - fd_c) <= 1e-6 * std::abs(fd_c));
            const double fd_k =
                (hydraulic_conductivity(psi + h, phi) - hydraulic_conductivity(psi - h, phi)) / (2.0 * h);
            CHECK(std::abs(hydraulic_conductivity_derivative(psi, phi) - fd_k) <= 1e-6 * std::abs(fd_k));
        }
    }
}

TEST_CASE("parameter validation") {
    VanGenuchtenParams bad = sandy_loam();
    bad.n = 1.0;
    CHECK_THROWS_AS(bad.validate(), DomainError);
    bad = sandy_loam();
    bad.theta_r = 0.5;
    CHECK_THROWS_AS(bad.validate(), DomainError);
    bad = sandy_loam();
    bad.ks = -1.0;
    CHECK_THROWS_AS(bad.validate(), DomainError);
}

TEST_CASE("Feddes stress is piecewise linear") {
    const FeddesThresholds t;
    CHECK(feddes_stress(0.0, t) == 0.0);
    CHECK(feddes_stress(-0.1, t) == doctest::Approx(0.0));
    CHECK(feddes_stress(-0.55, t) == doctest::Approx(0.5));
    CHECK(feddes_stress(-1.0, t) == doctest::Approx(1.0));
    CHECK(feddes_stress(-3.0, t) == 1.0);
    CHECK(feddes_stress(-5.0, t) == doctest::Approx(1.0));
    CHECK(feddes_stress(-77.5, t) == doctest::Approx(0.5));
    CHECK(feddes_stress(-150.0, t) == doctest::Approx(0.0));
    CHECK(feddes_stress(-400.0, t) == 0.0);
    CHECK(feddes_stress_derivative(-3.0, t) == 0.0);
    CHECK(feddes_stress_derivative(-77.5, t) == doctest::Approx(1.0 / 145.0));
}

TEST_CASE("root uptake sink is confined to the root zone") {
    const FeddesThresholds t;
    const double s = root_uptake_sink(-3.0, 1.0, 5e-8, 0.5, 0.2, t);
    CHECK(s == doctest::Approx(1e-7));
    CHECK(root_uptake_sink(-3.0, 1.0, 5e-8, 0.5, 0.7, t) == 0.0);
}

TEST_CASE("standard grid") {
    const auto g = SoilGrid::standard();
    REQUIRE(g.size() == 31);
    CHECK(g.node_depths.front() == 0.0);
    CHECK(g.depth() == doctest::Approx(1.0));
    CHECK(g.node_depths[20] == doctest::Approx(0.5));
    double total = 0.0;
    for (double l : g.cell_lengths()) total += l;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
    double rz = 0.0;
    for (double l : g.root_zone_overlap(0.5)) rz += l;
    CHECK(rz == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("hydrostatic profile is a fixed point of the closed column") {
    auto zone = preset_zone("MZ2");
    zone.bottom = BottomBoundary::NoFlux;
    const auto model = zone.column_model();
    ColumnState s;
    for (double z : model.grid.node_depths) s.psi.push_back(-2.0 + (z - model.grid.depth()));
    ColumnState x = s;
    for (int k = 0; k < kStepsPerDay; ++k) {
        const ColumnState next = step(x, {}, kSecondsPerDay / kStepsPerDay, model);
        double drift = 0.0;
        for (std::size_t i = 0; i < x.psi.size(); ++i) drift = std::max(drift, std::abs(next.psi[i] - x.psi[i]));
        CHECK(drift <= 1e-8);
        x = next;
    }
}

TEST_CASE("single step conserves water") {
    const auto zone = preset_zone("MZ3");
    const auto model = zone.column_model();
    const ColumnState s = uniform_state(zone, 0.25);
    SurfaceForcing f;
    f.water_input = 0.03 / kSecondsPerDay;
    f.kc = 1.0;
    f.et0 = 0.005 / kSecondsPerDay;
    StepReport rep;
    const ColumnState n = step(s, f, 1800.0, model, &rep);
    const double change = column_storage(n, model) - column_storage(s, model);
    CHECK(std::abs(change - rep.budget.net()) <= 1e-10);
    CHECK(rep.budget.infiltration > 0.0);
    CHECK(rep.budget.uptake > 0.0);
}

TEST_CASE("stepper rejects nonpositive dt") {
    const auto zone = preset_zone("MZ1");
    CHECK_THROWS_AS(step(uniform_state(zone, 0.2), {}, 0.0, zone.column_model()), DomainError);
}
