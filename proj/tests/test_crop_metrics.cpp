/**
 * @file test_crop_metrics.cpp
 * @brief Growing-degree days, crop coefficient, stress factor and yield.
 */

#include <doctest.h>

#include "irrig/crop_metrics.hpp"
#include "irrig/error.hpp"

#include <vector>

using namespace irrig;

namespace {

YieldModel loam() {
    YieldModel m;
    m.theta_v1 = 0.42;
    m.theta_v2 = 0.20;
    m.theta_v3 = 0.28;
    m.theta_vw = 0.12;
    return m;
}

}  // namespace

TEST_CASE("growing-degree days") {
    const std::vector<double> t{15.0};
    CHECK(gdd_accumulate(t)[0] == 10.0);
    const std::vector<double> season{15.0, 3.0, 5.0, 20.5};
    const auto g = gdd_accumulate(season);
    CHECK(g == std::vector<double>{10.0, 10.0, 10.0, 25.5});
    CHECK(gdd_accumulate(season, 10.0).back() == 15.5);
    CHECK_THROWS_AS(gdd_accumulate(std::vector<double>{}), DomainError);
}

TEST_CASE("crop coefficient polynomial") {
    const CropCoeffModel m;
    CHECK(m.raw(0.0) == -0.0207);
    CHECK(crop_coefficient(0.0) == 0.0);
    // Hand evaluation of the quartic at g = 100.
    CHECK(m.raw(100.0) == doctest::Approx(0.243797).epsilon(1e-12));
    CHECK(crop_coefficient(750.0) == doctest::Approx(m.raw(750.0)));
    CHECK(crop_coefficient(750.0) > 1.1);
    CHECK(crop_coefficient(1600.0) == 0.0);
    CHECK_THROWS_AS(crop_coefficient(-1.0), DomainError);
}

TEST_CASE("stress factor breakpoints") {
    const auto m = loam();
    CHECK(stress_factor(0.45, m) == 0.0);
    CHECK(stress_factor(0.42, m) == 0.0);
    CHECK(stress_factor(0.35, m) == doctest::Approx(0.5));
    CHECK(stress_factor(0.28, m) == 1.0);
    CHECK(stress_factor(0.24, m) == 1.0);
    CHECK(stress_factor(0.20, m) == 1.0);
    CHECK(stress_factor(0.16, m) == doctest::Approx(0.5));
    CHECK(stress_factor(0.12, m) == 0.0);
    CHECK(stress_factor(0.05, m) == 0.0);
}

TEST_CASE("yield and water use efficiency") {
    const auto m = loam();
    CHECK(predicted_yield(1.0, 1.0, m) == doctest::Approx(0.8));
    CHECK(predicted_yield(0.5, 1.0, m) == doctest::Approx(0.4));
    YieldModel tolerant = m;
    tolerant.ky = 0.5;
    CHECK(predicted_yield(0.0, 1.0, tolerant) == doctest::Approx(0.4));
    CHECK_THROWS_AS(predicted_yield(1.0, 0.0, m), DomainError);
    CHECK_THROWS_AS(predicted_yield(1.2, 1.0, m), DomainError);
    CHECK(iwue(0.8, 0.2) == doctest::Approx(4.0));
    CHECK_THROWS_AS(iwue(0.8, 0.0), DomainError);
}

TEST_CASE("seasonal evapotranspiration totals") {
    const auto m = loam();
    SeasonalEvapotranspiration et;
    et.add_day(0.24, 1.0, 0.005, m);
    et.add_day(0.16, 0.5, 0.004, m);
    CHECK(et.etm() == doctest::Approx(0.007));
    CHECK(et.etc() == doctest::Approx(0.006));
}

TEST_CASE("yield model validation") {
    auto m = loam();
    m.theta_v2 = 0.30;
    CHECK_THROWS_AS(m.validate(), DomainError);
}
