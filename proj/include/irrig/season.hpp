/**
 * @file season.hpp
 * @brief Closed-loop season driver and report files.
 *
 * Each day: observe the top 25 cm of every zone, update the filters, build a
 * noisy forecast, decide the day's irrigation (MIQP schedule or trigger),
 * apply it to the Richards plant, and propagate the filters.
 */

#pragma once

#include "irrig/scenario.hpp"
#include "irrig/surrogate.hpp"

#include <functional>
#include <string>
#include <vector>

namespace irrig {

enum class Strategy { MpcRelu, Triggered };

Strategy parse_strategy(const std::string& name);
const char* to_string(Strategy strategy);

struct DailyRecord {
    int day = 0;
    std::string date;
    int c = 0;
    std::vector<double> u;           ///< applied irrigation per zone (m)
    std::vector<double> theta_true;  ///< root-zone moisture at the start of the day
    std::vector<double> theta_est;
    double rain = 0.0;  ///< m
    double et0 = 0.0;   ///< m
    double kc = 0.0;
    double zr = 0.0;
    double solve_seconds = 0.0;
    double gap = 0.0;
    std::string status = "none";  ///< solver status, or "none" for the triggered arm
    long nodes = 0;
    std::size_t binaries = 0;
};

enum class FailureKind { None, Simulation, Solver, Other };

struct SeasonReport {
    Strategy strategy = Strategy::Triggered;
    std::vector<std::string> zone_ids;
    std::vector<DailyRecord> records;
    double total_irrigation = 0.0;  ///< sum over days and zones (m)
    double total_rain = 0.0;        ///< m
    std::vector<double> yield;      ///< Ya per zone (kg/m2)
    double iwue = 0.0;              ///< sum of Ya over total irrigation; NaN without irrigation
    int events = 0;
    double mean_solve_seconds = 0.0;
    double median_solve_seconds = 0.0;
    double max_solve_seconds = 0.0;
    double max_gap = 0.0;
    int limited_solves = 0;  ///< solves stopped by a limit with an incumbent
    std::vector<double> mean_theta;  ///< season mean of the true root-zone moisture per zone
    std::vector<TargetZone> targets;
    FailureKind failure = FailureKind::None;
    std::string failure_message;
};

struct SeasonOptions {
    int max_days = -1;  ///< stop early (tests); -1 runs the whole season
    std::function<void(const DailyRecord&)> on_day;
    /// Called every day, when networks are given, with the horizon program
    /// inputs before the decision is made.
    std::function<void(int day, const std::vector<ZoneContext>&, const std::vector<ForecastDay>&)> on_program;
};

/// Loads the surrogate of every zone from the scenario's network paths.
std::vector<MLPNetwork> load_scenario_networks(const SeasonScenario& scenario);

/// Runs one arm over the season. Networks are required for mpc-relu and
/// optional for the triggered arm, where they only feed on_program. Failures stop the loop and are reported in
/// the returned report along with the days completed so far.
SeasonReport run_closed_loop(const SeasonScenario& scenario, const WeatherTable& weather, Strategy strategy,
                             const std::vector<MLPNetwork>& networks = {}, const SeasonOptions& options = {});

/// Writes daily.csv, summary.csv and schedule.csv into out_dir.
void write_report(const SeasonReport& report, const std::string& out_dir);

struct DailyTotals {
    int days = 0;
    int events = 0;
    double total_irrigation = 0.0;
    double total_rain = 0.0;
};

/// Re-reads daily.csv and sums it the same way the report does.
DailyTotals read_daily_totals(const std::string& daily_csv);

/// Neumaier compensated summation.
class CompensatedSum {
public:
    void add(double v);
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

}  // namespace irrig
