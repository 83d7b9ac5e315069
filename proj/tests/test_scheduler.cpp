/**
 * @file test_scheduler.cpp
 * @brief Target zones, the triggered baseline and the horizon program.
 */

#include <doctest.h>

#include "irrig/error.hpp"
#include "irrig/scenario.hpp"
#include "irrig/scheduler.hpp"

#include <cmath>
#include <numeric>

using namespace irrig;

namespace {

/// Small surrogate trained on plant rollouts of a preset zone.
const MLPNetwork& tiny_network() {
    static const MLPNetwork net = [] {
        const auto zone = preset_zone("MZ1");
        TrainingDataConfig dc;
        dc.n_trajectories = 40;
        dc.horizon_days = 30;
        dc.seed = 5;
        const auto ds = generate_training_data(zone, synthetic_weather("2023-05-05", 60, 4), dc);
        TrainingConfig tc;
        tc.hidden = {4, 4};
        tc.epochs = 60;
        tc.learning_rate = 1e-3;
        return train(ds, tc);
    }();
    return net;
}

ZoneContext tiny_zone(double theta) {
    const auto zone = preset_zone("MZ1");
    ZoneContext z;
    z.net = &tiny_network();
    z.u_min = zone.u_min;
    z.u_max = zone.u_max;
    z.target = target_zone(zone.theta_fc, zone.theta_wp, 0.5);
    z.history.theta_rz = {theta + 0.005, theta};
    z.history.inputs = {{1.0, 0.005, 0.0, 0.5}};
    return z;
}

}  // namespace

TEST_CASE("target zones of the bundled soils") {
    const auto a = target_zone(0.28, 0.12, 0.5);
    CHECK(a.lower == doctest::Approx(0.200).epsilon(1e-15));
    CHECK(a.upper == 0.28);
    const auto c = target_zone(0.30, 0.16, 0.5);
    CHECK(std::abs(c.lower - 0.230) <= 1e-15);
    CHECK(target_zone(0.30, 0.16, 0.0).lower == 0.30);
    CHECK(target_zone(0.30, 0.16, 1.0).lower == doctest::Approx(0.16));
    CHECK_THROWS_AS(target_zone(0.12, 0.28, 0.5), DomainError);
    CHECK_THROWS_AS(target_zone(0.28, 0.12, 1.5), DomainError);
}

TEST_CASE("triggered baseline") {
    const std::vector<TriggeredZone> zones{{{0.20, 0.28}, 0.052}, {{0.23, 0.30}, 0.0623}};
    CHECK(triggered_schedule_day({0.21, 0.24}, zones, 0.0, 0.5) == std::vector<double>{0.0, 0.0});
    // One zone breaches: every zone is refilled towards its upper target.
    const auto u = triggered_schedule_day({0.19, 0.25}, zones, 0.004, 0.5);
    CHECK(u[0] == doctest::Approx((0.28 - 0.19) * 0.5 - 0.004));
    CHECK(u[1] == doctest::Approx((0.30 - 0.25) * 0.5 - 0.004));
    // Rain covers the deficit of the second zone, and the first is capped at u_max.
    const auto v = triggered_schedule_day({0.10, 0.297}, zones, 0.006, 1.0);
    CHECK(v[0] == 0.052);
    CHECK(v[1] == 0.0);
    CHECK_THROWS_AS(triggered_schedule_day({0.2}, zones, 0.0, 0.5), DimensionError);
    CHECK_THROWS_AS(triggered_schedule_day({0.2, 0.2}, zones, -1.0, 0.5), DomainError);
}

TEST_CASE("configuration and input validation") {
    SchedulerConfig cfg;
    cfg.horizon = 0;
    CHECK_THROWS_AS(cfg.validate(), DomainError);
    cfg = {};
    cfg.time_limit = 0.0;
    CHECK_THROWS_AS(cfg.validate(), DomainError);
    cfg = {};
    cfg.horizon = 3;
    const std::vector<ForecastDay> short_fc(2, {1.0, 0.005, 0.0, 0.5});
    CHECK_THROWS_AS(build_miqp(cfg, {tiny_zone(0.22)}, short_fc), DimensionError);
    ZoneContext no_net = tiny_zone(0.22);
    no_net.net = nullptr;
    const std::vector<ForecastDay> fc(3, {1.0, 0.005, 0.0, 0.5});
    CHECK_THROWS_AS(build_miqp(cfg, {no_net}, fc), DomainError);
}

TEST_CASE("horizon program structure") {
    SchedulerConfig cfg;
    cfg.horizon = 3;
    const std::vector<ForecastDay> fc(3, {1.0, 0.005, 0.0, 0.5});
    const auto m = build_miqp(cfg, {tiny_zone(0.22), tiny_zone(0.25)}, fc);
    CHECK(m.c.size() == 3);
    CHECK(m.u.size() == 3);
    CHECK(m.u[0].size() == 2);
    CHECK(m.copies.size() == 3);
    for (int k = 0; k < 3; ++k) CHECK(m.qp.variables()[m.c[k]].binary);
    std::size_t neuron_bins = 0;
    for (const auto& day : m.copies)
        for (const auto& e : day) neuron_bins += e.binaries.size();
    CHECK(m.qp.binary_indices().size() == 3 + neuron_bins);
}

TEST_CASE("tiny scheduler instance matches enumeration") {
    SchedulerConfig cfg;
    cfg.horizon = 3;
    cfg.relative_gap = 0.0;
    const std::vector<ForecastDay> fc(3, {1.0, 0.005, 0.0, 0.5});
    for (double theta : {0.18, 0.21}) {
        CAPTURE(theta);
        const std::vector<ZoneContext> zones{tiny_zone(theta)};
        const auto m = build_miqp(cfg, zones, fc);
        REQUIRE(m.qp.binary_indices().size() <= 12);
        const auto oracle = enumerate_exhaustive(m.qp);
        REQUIRE(oracle.has_solution());
        const auto s = schedule_day(cfg, zones, fc);
        CHECK(s.status == SolveStatus::Optimal);
        CHECK(std::abs(s.objective - oracle.objective) <= 1e-6 * std::max(1.0, std::abs(oracle.objective)));
        // The surrogate's forward pass reproduces the program's objective.
        CHECK(forward_objective(cfg, zones, fc, s.c, s.u) ==
              doctest::Approx(s.objective).epsilon(1e-6));
        CHECK(std::accumulate(s.c.begin(), s.c.end(), 0) >= 1);
        for (std::size_t k = 0; k < s.c.size(); ++k) {
            if (s.c[k]) CHECK((s.u[k][0] >= zones[0].u_min - 1e-9 && s.u[k][0] <= zones[0].u_max + 1e-9));
            else CHECK(s.u[k][0] == 0.0);
        }
    }
}

TEST_CASE("moist soil is not irrigated") {
    SchedulerConfig cfg;
    cfg.horizon = 3;
    const std::vector<ForecastDay> fc(3, {0.5, 0.002, 0.0, 0.5});
    const auto s = schedule_day(cfg, {tiny_zone(0.26)}, fc);
    CHECK(s.c == std::vector<int>{0, 0, 0});
}
