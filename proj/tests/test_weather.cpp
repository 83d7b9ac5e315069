/**
 * @file test_weather.cpp
 * @brief Calendar helpers, weather CSV round trip and forecast perturbation.
 */

#include <doctest.h>

#include "irrig/error.hpp"
#include "irrig/weather.hpp"

#include <filesystem>
#include <fstream>

using namespace irrig;

TEST_CASE("calendar helpers") {
    CHECK(next_date("2023-05-05") == "2023-05-06");
    CHECK(next_date("2023-05-31") == "2023-06-01");
    CHECK(next_date("2024-02-28") == "2024-02-29");
    CHECK(next_date("2023-12-31") == "2024-01-01");
    CHECK(days_between("2023-05-05", "2023-09-04") == 122);
    CHECK(days_between("2023-09-04", "2023-05-05") == -122);
    CHECK_THROWS_AS(next_date("2023-13-01"), ValidationError);
    CHECK_THROWS_AS(next_date("2023/05/05"), ValidationError);
}

TEST_CASE("synthetic weather is seeded and physical") {
    const auto a = synthetic_weather("2023-05-05", 123, 2023);
    const auto b = synthetic_weather("2023-05-05", 123, 2023);
    REQUIRE(a.size() == 123);
    CHECK(a.back().date == "2023-09-04");
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].et0_mm == b[i].et0_mm);
        CHECK(a[i].et0_mm >= 0.0);
        CHECK(a[i].rain_mm >= 0.0);
    }
    const auto c = synthetic_weather("2023-05-05", 123, 7);
    CHECK(c[40].et0_mm != a[40].et0_mm);
}

TEST_CASE("weather CSV round trip and validation") {
    const auto dir = std::filesystem::temp_directory_path() / "irrig_weather_test";
    std::filesystem::create_directories(dir);
    const auto path = (dir / "w.csv").string();
    const auto w = synthetic_weather("2023-05-05", 10, 1);
    write_weather_csv(path, w);
    const auto r = load_weather_csv(path);
    REQUIRE(r.size() == w.size());
    for (std::size_t i = 0; i < w.size(); ++i) {
        CHECK(r[i].date == w[i].date);
        CHECK(r[i].et0_mm == w[i].et0_mm);
        CHECK(r[i].rain_mm == w[i].rain_mm);
        CHECK(r[i].tavg_c == w[i].tavg_c);
    }
    const auto bad = (dir / "bad.csv").string();
    {
        std::ofstream out(bad);
        out << kWeatherHeader << "\n2023-05-05,4.0,0,15\n2023-05-07,4.0,0,15\n";
    }
    CHECK_THROWS_AS(load_weather_csv(bad), ValidationError);
    {
        std::ofstream out(bad);
        out << kWeatherHeader << "\n2023-05-05,-1,0,15\n";
    }
    CHECK_THROWS_AS(load_weather_csv(bad), ValidationError);
    CHECK_THROWS_AS(load_weather_csv((dir / "missing.csv").string()), ValidationError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("forecast perturbation grows with lead and stays nonnegative") {
    const auto truth = synthetic_weather("2023-06-01", 7, 3);
    const auto same = perturb_forecast(truth, {0.0, 0.0}, 5);
    for (std::size_t i = 0; i < truth.size(); ++i) CHECK(same[i].et0_mm == truth[i].et0_mm);
    const auto f = perturb_forecast(truth, {}, 5);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        CHECK(f[i].et0_mm >= 0.0);
        CHECK(f[i].rain_mm >= 0.0);
        CHECK(f[i].tavg_c == truth[i].tavg_c);
    }
    CHECK_THROWS_AS(perturb_forecast(truth, {-1.0, 0.0}, 5), DomainError);
}
