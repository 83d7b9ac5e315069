/**
 * @file irrigctl.cpp
 * @brief Command-line front end: data generation, training, encoding checks,
 *        one-shot schedules and closed-loop seasons.
 *
 * Exit codes: 0 success, 2 validation error, 3 solver limit reached or
 * solver failure, 4 simulation failure.
 */

#include "irrig/error.hpp"
#include "irrig/neural_encoding.hpp"
#include "irrig/scenario.hpp"
#include "irrig/scheduler.hpp"
#include "irrig/season.hpp"
#include "irrig/surrogate.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>

using namespace irrig;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitSolver = 3;
constexpr int kExitSimulation = 4;

struct Common {
    std::string scenario_path;
    std::string weather_path;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::optional<double> gap;
    std::optional<double> time_limit;
};

SeasonScenario scenario_from(const Common& c) {
    if (c.scenario_path.empty()) throw ValidationError("--scenario is required");
    SeasonScenario s = load_scenario(c.scenario_path);
    if (!c.weather_path.empty()) s.weather_path = c.weather_path;
    if (c.seed) s.seed = *c.seed;
    if (c.gap) s.scheduler.relative_gap = *c.gap;
    if (c.time_limit) s.scheduler.time_limit = *c.time_limit;
    s.validate();
    return s;
}

WeatherTable weather_from(const SeasonScenario& s) {
    if (s.weather_path.empty()) throw ValidationError("no weather file: set [season] weather or pass --weather");
    return load_weather_csv(s.weather_path);
}

const ZoneSetup& zone_from(const SeasonScenario& s, const std::string& id) {
    for (const auto& z : s.zones)
        if (z.zone.id == id) return z;
    throw ValidationError("scenario has no zone '" + id + "'");
}

void add_common(CLI::App* app, Common& c, bool with_solver) {
    app->add_option("--scenario", c.scenario_path, "Scenario INI file");
    app->add_option("--weather", c.weather_path, "Weather CSV (overrides the scenario)");
    app->add_option("--seed", c.seed, "Random seed");
    app->add_option("--out", c.out, "Output file or directory");
    if (with_solver) {
        app->add_option("--gap", c.gap, "Relative optimality gap");
        app->add_option("--time-limit", c.time_limit, "Solver time limit per day (s)");
    }
}

TrainingDataConfig data_config(int trajectories, int horizon, int lag, std::uint64_t seed, double switch_probability = 0.2) {
    TrainingDataConfig cfg;
    cfg.zr_switch_probability = switch_probability;
    cfg.n_trajectories = trajectories;
    cfg.horizon_days = horizon;
    cfg.lag = lag;
    cfg.seed = seed;
    return cfg;
}

void print_schedule(const Schedule& s, const std::vector<std::string>& ids) {
    std::cout << "status " << to_string(s.status) << "  objective " << s.objective << "  gap " << s.relative_gap
              << "  nodes " << s.nodes << "  binaries " << s.binaries << "  time " << s.seconds << " s\n";
    std::cout << "day  c";
    for (const auto& id : ids) std::cout << "  u_" << id << "(mm)  theta_" << id;
    std::cout << '\n';
    for (std::size_t k = 0; k < s.c.size(); ++k) {
        std::cout << std::setw(3) << k << "  " << s.c[k];
        for (std::size_t j = 0; j < ids.size(); ++j)
            std::cout << "  " << std::fixed << std::setprecision(2) << std::setw(8) << s.u[k][j] * 1e3 << "  "
                      << std::setprecision(4) << s.theta_pred[k][j];
        std::cout << std::defaultfloat << '\n';
    }
    for (const auto& w : s.warnings) std::cerr << "warning: " << w << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Mixed-integer MPC irrigation scheduling toolkit"};
    app.require_subcommand(1);
    Common common;

    // synth-weather
    auto* synth = app.add_subcommand("synth-weather", "Write a synthetic daily weather CSV");
    std::string synth_start = "2023-05-05";
    int synth_days = 123;
    std::uint64_t synth_seed = 2023;
    std::string synth_out;
    synth->add_option("--start", synth_start, "First date (YYYY-MM-DD)");
    synth->add_option("--days", synth_days, "Number of days");
    synth->add_option("--seed", synth_seed, "Random seed");
    synth->add_option("--out", synth_out, "Output CSV")->required();

    // generate-data
    auto* gen = app.add_subcommand("generate-data", "Open-loop plant rollouts as a feature/target CSV");
    add_common(gen, common, false);
    std::string zone_id;
    int trajectories = 100, horizon = 60, lag = 1;
    gen->add_option("--zone", zone_id, "Zone id from the scenario")->required();
    gen->add_option("--trajectories", trajectories, "Number of trajectories");
    gen->add_option("--horizon", horizon, "Days per trajectory");
    gen->add_option("--lag", lag, "Network lag (days)");
    double switch_probability = 0.2;
    gen->add_option("--switch-probability", switch_probability, "Share of trajectories with a rooting-depth switch");

    // train
    auto* tr = app.add_subcommand("train", "Generate data for a zone and train its surrogate");
    add_common(tr, common, false);
    int epochs = 40, restarts = 4, train_trajectories = 1000;
    tr->add_option("--zone", zone_id, "Zone id from the scenario")->required();
    tr->add_option("--trajectories", train_trajectories, "Number of training trajectories");
    tr->add_option("--restarts", restarts, "Training seeds tried; the best on a selection set is kept");
    tr->add_option("--horizon", horizon, "Days per trajectory");
    tr->add_option("--lag", lag, "Network lag (days)");
    tr->add_option("--epochs", epochs, "Training epochs");

    // validate
    auto* val = app.add_subcommand("validate", "Recursive-rollout RMSE of a network against the plant");
    add_common(val, common, false);
    std::string network_path;
    int val_trajectories = 60, val_days = 25;
    val->add_option("--zone", zone_id, "Zone id from the scenario")->required();
    val->add_option("--network", network_path, "Network file (defaults to the scenario's)");
    val->add_option("--trajectories", val_trajectories, "Held-out trajectories");
    val->add_option("--days", val_days, "Rollout length (days)");

    // encode-check
    auto* enc = app.add_subcommand("encode-check", "Verify the MIL encoding of a network against its forward pass");
    int samples = 1000;
    std::uint64_t enc_seed = 1;
    enc->add_option("--network", network_path, "Network file")->required();
    enc->add_option("--samples", samples, "Random inputs in the scaler box");
    enc->add_option("--seed", enc_seed, "Random seed");

    // schedule
    auto* sch = app.add_subcommand("schedule", "Solve one horizon program on a season day");
    add_common(sch, common, true);
    int sched_day = 0;
    sch->add_option("--day", sched_day, "Season day index (0-based)");

    // run-season
    auto* run = app.add_subcommand("run-season", "Closed-loop season with one strategy");
    add_common(run, common, true);
    std::string strategy_name = "mpc-relu";
    int max_days = -1;
    bool quiet = false;
    run->add_option("--strategy", strategy_name, "mpc-relu or triggered")->check(CLI::IsMember({"mpc-relu", "triggered"}));
    run->add_option("--days", max_days, "Stop after this many days");
    run->add_flag("--quiet", quiet, "No per-day progress");

    // report
    auto* rep = app.add_subcommand("report", "Summarise a season output directory");
    std::string report_dir;
    rep->add_option("--out", report_dir, "Directory written by run-season")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitValidation;
    }

    try {
        if (synth->parsed()) {
            write_weather_csv(synth_out, synthetic_weather(synth_start, synth_days, synth_seed));
            std::cout << "wrote " << synth_days << " days to " << synth_out << '\n';
            return 0;
        }
        if (gen->parsed()) {
            const auto s = scenario_from(common);
            const auto& z = zone_from(s, zone_id);
            int failures = 0;
            const Dataset ds = generate_training_data(z.zone, weather_from(s), data_config(trajectories, horizon, lag, s.seed, switch_probability), &failures);
            if (common.out.empty()) throw ValidationError("--out is required");
            std::ofstream out(common.out);
            if (!out) throw ValidationError("cannot write " + common.out);
            out.precision(17);
            const char* names[] = {"theta_rz", "kc", "et0_m", "water_m", "zr_m"};
            for (int d = 0; d <= lag; ++d)
                for (const char* n : names) out << n << "_" << (d - lag) << ',';
            out << "target_theta_rz\n";
            for (std::size_t i = 0; i < ds.features.size(); ++i) {
                for (double v : ds.features[i]) out << v << ',';
                out << ds.targets[i] << '\n';
            }
            std::cout << ds.features.size() << " samples from " << ds.trajectories.size() << " trajectories ("
                      << failures << " failed) written to " << common.out << '\n';
            return 0;
        }
        if (tr->parsed()) {
            const auto s = scenario_from(common);
            const auto& z = zone_from(s, zone_id);
            SurrogateProtocol p;
            p.trajectories = train_trajectories;
            p.horizon_days = horizon;
            p.lag = lag;
            p.restarts = restarts;
            p.epochs = epochs;
            p.validation_trajectories = val_trajectories;
            p.validation_days = val_days;
            p.seed = s.seed;
            const ZoneSurrogate result = train_zone_surrogate(z.zone, weather_from(s), p);
            const std::string out = common.out.empty() ? z.network_path : common.out;
            if (out.empty()) throw ValidationError("--out is required when the zone has no network path");
            save_network(result.net, out);
            std::cout << "zone " << z.zone.id << ": " << result.samples << " samples, loss "
                      << result.selection.training.initial_loss << " -> " << result.selection.training.epoch_loss.back()
                      << ", restart " << result.selection.chosen + 1 << "/" << restarts << ", " << val_days
                      << "-day rollout RMSE " << result.rollout_rmse << ", saved " << out << '\n';
            return 0;
        }
        if (val->parsed()) {
            const auto s = scenario_from(common);
            const auto& z = zone_from(s, zone_id);
            const MLPNetwork net = load_network(network_path.empty() ? z.network_path : network_path);
            SurrogateProtocol p;
            p.lag = net.lag;
            p.validation_trajectories = val_trajectories;
            p.validation_days = val_days;
            p.seed = s.seed;
            const Dataset held = held_out_trajectories(z.zone, weather_from(s), p);
            std::cout << "zone " << z.zone.id << ": " << val_days << "-day rollout RMSE "
                      << validate_rollouts(net, held.trajectories) << " over " << held.trajectories.size()
                      << " trajectories\n";
            return 0;
        }
        if (enc->parsed()) {
            const MLPNetwork net = load_network(network_path);
            BoxBounds box;
            for (std::size_t i = 0; i < net.input_scaler.size(); ++i) {
                box.lower.push_back(net.input_scaler.min[i]);
                box.upper.push_back(net.input_scaler.unscale(i, net.input_scaler.degenerate[i] ? 0.0 : 1.0));
            }
            const auto standalone = encode_network(net, box);
            const double dev = verify_encoding(net, box, samples, enc_seed);
            std::cout << "binaries " << standalone.network.unstable << ", stable active "
                      << standalone.network.stable_active << ", stable inactive " << standalone.network.stable_inactive
                      << ", rows " << standalone.network.constraint_count << ", max deviation " << dev << '\n';
            return dev <= 1e-6 ? 0 : kExitValidation;
        }
        if (sch->parsed()) {
            const auto s = scenario_from(common);
            const auto weather = weather_from(s);
            const auto nets = load_scenario_networks(s);
            if (sched_day < 0 || sched_day >= s.season_days()) throw ValidationError("--day outside the season");
            // The season up to the requested day is driven by the triggered arm.
            std::vector<ZoneContext> ctx;
            std::vector<ForecastDay> forecast;
            SeasonOptions opt;
            opt.max_days = sched_day + 1;
            opt.on_program = [&](int d, const std::vector<ZoneContext>& z, const std::vector<ForecastDay>& f) {
                if (d == sched_day) {
                    ctx = z;
                    forecast = f;
                }
            };
            const SeasonReport prefix = run_closed_loop(s, weather, Strategy::Triggered, nets, opt);
            if (prefix.failure == FailureKind::Simulation) throw StepFailure(prefix.failure_message, 0.0);
            if (prefix.failure != FailureKind::None) throw ValidationError(prefix.failure_message);
            const Schedule result = schedule_day(s.scheduler, ctx, forecast);
            print_schedule(result, prefix.zone_ids);
            return result.status == SolveStatus::Optimal ? 0 : kExitSolver;
        }
        if (run->parsed()) {
            const auto s = scenario_from(common);
            const auto weather = weather_from(s);
            const Strategy strategy = parse_strategy(strategy_name);
            std::vector<MLPNetwork> nets;
            if (strategy == Strategy::MpcRelu) nets = load_scenario_networks(s);
            SeasonOptions opt;
            opt.max_days = max_days;
            if (!quiet) {
                opt.on_day = [](const DailyRecord& r) {
                    std::cerr << r.date << "  c=" << r.c;
                    for (double u : r.u) std::cerr << "  " << std::fixed << std::setprecision(1) << u * 1e3;
                    std::cerr << " mm";
                    for (double t : r.theta_true) std::cerr << "  " << std::setprecision(3) << t;
                    if (r.status != "none") std::cerr << "  " << std::setprecision(2) << r.solve_seconds << " s " << r.status;
                    std::cerr << std::defaultfloat << '\n';
                };
            }
            const SeasonReport report = run_closed_loop(s, weather, strategy, nets, opt);
            if (!common.out.empty()) write_report(report, common.out);
            std::cout << to_string(strategy) << ": days " << report.records.size() << ", total irrigation "
                      << report.total_irrigation << " m, events " << report.events << ", IWUE " << report.iwue
                      << " kg/m3";
            if (strategy == Strategy::MpcRelu)
                std::cout << ", median solve " << report.median_solve_seconds << " s, limited " << report.limited_solves;
            std::cout << '\n';
            switch (report.failure) {
            case FailureKind::None: break;
            case FailureKind::Simulation: std::cerr << "error: " << report.failure_message << '\n'; return kExitSimulation;
            case FailureKind::Solver: std::cerr << "error: " << report.failure_message << '\n'; return kExitSolver;
            case FailureKind::Other: std::cerr << "error: " << report.failure_message << '\n'; return kExitValidation;
            }
            return report.limited_solves > 0 ? kExitSolver : 0;
        }
        if (rep->parsed()) {
            const auto t = read_daily_totals(report_dir + "/daily.csv");
            std::ifstream in(report_dir + "/summary.csv");
            if (!in) throw ValidationError("cannot read " + report_dir + "/summary.csv");
            std::string line;
            std::optional<double> summary_total;
            while (std::getline(in, line)) {
                std::cout << line << '\n';
                if (line.rfind("total_irrigation_m,", 0) == 0) summary_total = std::stod(line.substr(19));
            }
            std::cout << "recomputed: days " << t.days << ", events " << t.events << ", total irrigation "
                      << t.total_irrigation << " m, total rain " << t.total_rain << " m\n";
            if (!summary_total || *summary_total != t.total_irrigation)
                throw ValidationError("summary total irrigation does not match daily.csv");
            return 0;
        }
    } catch (const StepFailure& e) {
        std::cerr << "simulation failure: " << e.what() << '\n';
        return kExitSimulation;
    } catch (const SolverError& e) {
        std::cerr << "solver failure: " << e.what() << '\n';
        return kExitSolver;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    }
    return 0;
}
