/**
 * @file test_season.cpp
 * @brief Scenario files and short closed-loop runs.
 */

#include <doctest.h>

#include "irrig/error.hpp"
#include "irrig/season.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

using namespace irrig;

namespace {

const std::string kDataDir = IRRIG_DATA_DIR;

std::string write_temp(const std::string& name, const std::string& text) {
    const auto dir = std::filesystem::temp_directory_path() / "irrig_season_test";
    std::filesystem::create_directories(dir);
    const auto path = (dir / name).string();
    std::ofstream(path) << text;
    return path;
}

}  // namespace

TEST_CASE("bundled scenario") {
    const auto s = load_scenario(kDataDir + "/season.ini");
    REQUIRE(s.zones.size() == 3);
    CHECK(s.season_days() == 123);
    CHECK(s.zones[2].zone.id == "MZ3");
    CHECK(s.zones[2].initial_theta == 0.28);
    CHECK(s.scheduler.horizon == 7);
    CHECK(s.scheduler.relative_gap == 1e-3);
    CHECK(s.ekf.r == 19.25);
    CHECK(s.rooting_depth(0) == 0.5);
    CHECK(s.rooting_depth(70) == 0.5);
    CHECK(s.rooting_depth(71) == 1.0);
    CHECK(std::filesystem::path(s.weather_path).is_absolute());
    CHECK(std::filesystem::exists(s.zones[0].network_path));
}

TEST_CASE("scenario errors") {
    CHECK_THROWS_AS(load_scenario(write_temp("a.ini", "[season]\nbogus = 1\n")), ValidationError);
    CHECK_THROWS_AS(load_scenario(write_temp("b.ini", "[unknown]\nx = 1\n")), ValidationError);
    CHECK_THROWS_AS(load_scenario(write_temp("c.ini", "[season]\nweather = w.csv\n[scheduler]\nhorizon = seven\n"
                                                      "[zone.A]\npreset = MZ1\ninitial_theta = 0.2\n")),
                    ValidationError);
    CHECK_THROWS_AS(load_scenario(write_temp("d.ini", "[season]\nweather = w.csv\n")), ValidationError);
    CHECK_THROWS(load_scenario(write_temp("e.ini", "[season]\nweather = w.csv\n[zone.A]\npreset = MZ7\n"
                                                   "initial_theta = 0.2\n")));
}

TEST_CASE("strategy names") {
    CHECK(parse_strategy("mpc-relu") == Strategy::MpcRelu);
    CHECK(parse_strategy("triggered") == Strategy::Triggered);
    CHECK(std::string(to_string(Strategy::MpcRelu)) == "mpc-relu");
    CHECK_THROWS_AS(parse_strategy("random"), ValidationError);
}

TEST_CASE("compensated summation") {
    CompensatedSum s;
    s.add(1.0);
    for (int i = 0; i < 1000; ++i) s.add(1e-16);
    s.add(-1.0);
    CHECK(s.value() == doctest::Approx(1e-13).epsilon(1e-6));
}

TEST_CASE("short triggered run and its report") {
    const auto s = load_scenario(kDataDir + "/season.ini");
    const auto weather = load_weather_csv(s.weather_path);
    SeasonOptions opt;
    opt.max_days = 6;
    int seen = 0;
    opt.on_day = [&](const DailyRecord& r) { CHECK(r.day == seen++); };
    const auto rep = run_closed_loop(s, weather, Strategy::Triggered, {}, opt);
    CHECK(rep.failure == FailureKind::None);
    REQUIRE(rep.records.size() == 6);
    CHECK(seen == 6);
    CHECK(rep.records[0].date == "2023-05-05");
    CHECK(rep.records[0].theta_true[2] == doctest::Approx(0.28).epsilon(1e-3));
    for (const auto& r : rep.records) {
        CHECK(r.status == "none");
        for (double th : r.theta_est) CHECK(std::isfinite(th));
    }
    opt.on_day = nullptr;
    const auto again = run_closed_loop(s, weather, Strategy::Triggered, {}, opt);
    CHECK(again.records.back().theta_true == rep.records.back().theta_true);

    const auto dir = (std::filesystem::temp_directory_path() / "irrig_season_test" / "report").string();
    write_report(rep, dir);
    const auto totals = read_daily_totals(dir + "/daily.csv");
    CHECK(totals.days == 6);
    CHECK(totals.events == rep.events);
    CHECK(totals.total_irrigation == rep.total_irrigation);
    CHECK(totals.total_rain == rep.total_rain);
    CHECK(std::filesystem::exists(dir + "/summary.csv"));
    CHECK(std::filesystem::exists(dir + "/schedule.csv"));
}

TEST_CASE("mpc arm needs one network per zone") {
    const auto s = load_scenario(kDataDir + "/season.ini");
    const auto weather = load_weather_csv(s.weather_path);
    CHECK_THROWS_AS(run_closed_loop(s, weather, Strategy::MpcRelu, {}), ValidationError);
    SeasonOptions opt;
    opt.max_days = 1;
    const auto rep = run_closed_loop(s, weather, Strategy::MpcRelu, load_scenario_networks(s), opt);
    CHECK(rep.failure == FailureKind::None);
    REQUIRE(rep.records.size() == 1);
    CHECK(rep.records[0].status != "none");
}
