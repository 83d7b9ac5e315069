/**
 * @file season.cpp
 * @brief Receding-horizon season loop and CSV reports.
 */

#include "irrig/season.hpp"

#include "irrig/crop_metrics.hpp"
#include "irrig/error.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

namespace irrig {

Strategy parse_strategy(const std::string& name) {
    if (name == "mpc-relu") return Strategy::MpcRelu;
    if (name == "triggered") return Strategy::Triggered;
    throw ValidationError("unknown strategy '" + name + "' (expected mpc-relu or triggered)");
}

const char* to_string(Strategy strategy) { return strategy == Strategy::MpcRelu ? "mpc-relu" : "triggered"; }

void CompensatedSum::add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v)) comp_ += (sum_ - t) + v;
    else comp_ += (v - t) + sum_;
    sum_ = t;
}

std::vector<MLPNetwork> load_scenario_networks(const SeasonScenario& scenario) {
    std::vector<MLPNetwork> nets;
    for (const auto& z : scenario.zones) {
        if (z.network_path.empty()) throw ValidationError("scenario: zone " + z.zone.id + " has no network path");
        nets.push_back(load_network(z.network_path));
    }
    return nets;
}

namespace {

/// splitmix64 finaliser, used to derive independent stream seeds.
std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t stream_seed(std::uint64_t base, std::uint64_t stream, std::uint64_t day, std::uint64_t zone) {
    return mix(mix(mix(base ^ mix(stream)) ^ day) ^ zone);
}

enum Stream : std::uint64_t { kSensor = 1, kProcess = 2, kForecast = 3 };

Eigen::VectorXd to_vector(const ColumnState& s) {
    return Eigen::Map<const Eigen::VectorXd>(s.psi.data(), static_cast<Eigen::Index>(s.psi.size()));
}

ColumnState to_state(const Eigen::VectorXd& x) { return {{x.data(), x.data() + x.size()}}; }

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t h = v.size() / 2;
    return v.size() % 2 != 0 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

FailureKind classify(const std::exception& e) {
    if (dynamic_cast<const StepFailure*>(&e) != nullptr) return FailureKind::Simulation;
    if (dynamic_cast<const SolverError*>(&e) != nullptr) return FailureKind::Solver;
    return FailureKind::Other;
}

}  // namespace

SeasonReport run_closed_loop(const SeasonScenario& scenario, const WeatherTable& weather, Strategy strategy,
                             const std::vector<MLPNetwork>& networks, const SeasonOptions& options) {
    scenario.validate();
    const std::size_t m = scenario.zones.size();
    const int days = options.max_days >= 0 ? std::min(options.max_days, scenario.season_days()) : scenario.season_days();
    if (weather.empty()) throw ValidationError("season: empty weather table");
    const long offset = days_between(weather.front().date, scenario.start_date);
    if (offset < 0 || offset + scenario.season_days() > static_cast<long>(weather.size()))
        throw ValidationError("season: weather table does not cover the season");
    if ((strategy == Strategy::MpcRelu || !networks.empty()) && networks.size() != m)
        throw ValidationError("season: expected one network per zone");

    // Truth drivers over the season; days past the table repeat its last day.
    const int n = scenario.scheduler.horizon;
    const int window = std::max(n, scenario.trigger_lookahead + 1);
    std::vector<WeatherDay> season_weather;
    for (int d = 0; d < scenario.season_days() + window; ++d)
        season_weather.push_back(weather[static_cast<std::size_t>(std::min<long>(offset + d, static_cast<long>(weather.size()) - 1))]);
    std::vector<double> temps;
    for (const auto& w : season_weather) temps.push_back(w.tavg_c);
    const std::vector<double> gdd = gdd_accumulate(temps, scenario.t_base);
    CropCoeffModel kc_model;
    kc_model.t_base = scenario.t_base;
    auto kc_of = [&](int d) { return crop_coefficient(gdd[static_cast<std::size_t>(d)], kc_model); };

    SeasonReport report;
    report.strategy = strategy;
    std::vector<ColumnState> truth;
    std::vector<EKFState> filters;
    std::vector<YieldModel> yields;
    std::vector<SeasonalEvapotranspiration> et(m);
    std::vector<Trajectory> history(m);
    std::vector<CompensatedSum> theta_sum(m);
    for (const auto& z : scenario.zones) {
        report.zone_ids.push_back(z.zone.id);
        const TargetZone t = target_zone(z.zone.theta_fc, z.zone.theta_wp, scenario.scheduler.mad);
        report.targets.push_back(t);
        truth.push_back(uniform_state(z.zone, z.initial_theta));
        Eigen::VectorXd guess = to_vector(truth.back());
        guess.array() += scenario.ekf_psi_bias;
        filters.push_back(ekf_init(guess, scenario.ekf));
        YieldModel y;
        y.ym = scenario.ym;
        y.ky = scenario.ky;
        y.theta_v1 = water_retention(kAnaerobicHead, z.zone.phi);
        y.theta_v2 = t.lower;
        y.theta_v3 = t.upper;
        y.theta_vw = z.zone.theta_wp;
        y.validate();
        yields.push_back(y);
    }

    CompensatedSum irrigation, rain_total;
    std::vector<double> solve_times;
    for (int d = 0; d < days; ++d) {
        DailyRecord rec;
        rec.day = d;
        rec.date = season_weather[static_cast<std::size_t>(d)].date;
        try {
            const auto& today = season_weather[static_cast<std::size_t>(d)];
            rec.rain = today.rain_mm * 1e-3;
            rec.et0 = today.et0_mm * 1e-3;
            rec.kc = kc_of(d);
            rec.zr = scenario.rooting_depth(d);

            // Observe and filter.
            for (std::size_t j = 0; j < m; ++j) {
                const auto& zone = scenario.zones[j].zone;
                const auto profile = theta_profile(truth[j], zone.phi);
                rec.theta_true.push_back(root_zone_moisture(profile, zone.grid, rec.zr));
                const double o = observe_top_layer(profile, zone.grid, kSensingDepth, scenario.sensor_noise_sd,
                                                   stream_seed(scenario.seed, kSensor, static_cast<std::uint64_t>(d), j));
                filters[j] = ekf_update(filters[j], o, top_layer_map(zone), scenario.ekf);
                const auto est = theta_profile(to_state(filters[j].x_hat), zone.phi);
                rec.theta_est.push_back(root_zone_moisture(est, zone.grid, rec.zr));
            }

            // Forecast window starting today (lead 1).
            const std::span<const WeatherDay> truth_window(season_weather.data() + d, static_cast<std::size_t>(window));
            const WeatherTable fc = perturb_forecast(truth_window, scenario.forecast_noise,
                                                     stream_seed(scenario.seed, kForecast, static_cast<std::uint64_t>(d), 0));

            rec.u.assign(m, 0.0);
            if (strategy == Strategy::Triggered) {
                std::vector<TriggeredZone> tz;
                for (std::size_t j = 0; j < m; ++j) tz.push_back({report.targets[j], scenario.zones[j].zone.u_max});
                double rain4 = 0.0;
                for (int k = 1; k <= scenario.trigger_lookahead; ++k) rain4 += fc[static_cast<std::size_t>(k)].rain_mm * 1e-3;
                rec.u = triggered_schedule_day(rec.theta_est, tz, rain4, rec.zr);
            }
            if (!networks.empty()) {
                if (d == 0) {
                    for (std::size_t j = 0; j < m; ++j) {
                        const auto lag = static_cast<std::size_t>(networks[j].lag);
                        history[j].theta_rz.assign(lag, rec.theta_est[j]);
                        history[j].inputs.assign(lag, DayInputs{rec.kc, rec.et0, rec.rain, rec.zr});
                    }
                }
                std::vector<ForecastDay> forecast;
                for (int k = 0; k < n; ++k)
                    forecast.push_back({kc_of(d + k), fc[static_cast<std::size_t>(k)].et0_mm * 1e-3,
                                        fc[static_cast<std::size_t>(k)].rain_mm * 1e-3, scenario.rooting_depth(d + k)});
                std::vector<ZoneContext> ctx;
                for (std::size_t j = 0; j < m; ++j) {
                    history[j].theta_rz.push_back(rec.theta_est[j]);
                    ZoneContext zc;
                    zc.net = &networks[j];
                    zc.u_min = scenario.zones[j].zone.u_min;
                    zc.u_max = scenario.zones[j].zone.u_max;
                    zc.target = report.targets[j];
                    zc.theta_min = scenario.zones[j].zone.phi.theta_r;
                    zc.theta_max = scenario.zones[j].zone.phi.theta_s;
                    zc.history = history[j];
                    ctx.push_back(std::move(zc));
                }
                if (options.on_program) options.on_program(d, ctx, forecast);
                if (strategy == Strategy::MpcRelu) {
                    const auto start = std::chrono::steady_clock::now();
                    const Schedule s = schedule_day(scenario.scheduler, ctx, forecast);
                    rec.solve_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
                    rec.gap = s.relative_gap;
                    rec.status = to_string(s.status);
                    rec.nodes = s.nodes;
                    rec.binaries = s.binaries;
                    rec.u = s.u[0];
                    solve_times.push_back(rec.solve_seconds);
                    report.max_gap = std::max(report.max_gap, s.relative_gap);
                    if (s.status != SolveStatus::Optimal) ++report.limited_solves;
                }
            }
            rec.c = std::any_of(rec.u.begin(), rec.u.end(), [](double v) { return v > 0.0; }) ? 1 : 0;

            // Apply the first decision to the plant, then propagate the filters.
            for (std::size_t j = 0; j < m; ++j) {
                const auto& zone = scenario.zones[j].zone;
                DailyForcing f;
                f.u_irr = rec.u[j];
                f.rain = rec.rain;
                f.et0 = rec.et0;
                f.kc = rec.kc;
                f.zr = rec.zr;
                truth[j] = simulate_day(zone, truth[j], f, scenario.process_noise_sd,
                                        stream_seed(scenario.seed, kProcess, static_cast<std::uint64_t>(d), j))
                               .state;
                filters[j] = ekf_predict(filters[j], zone_state_map(zone, f), scenario.ekf);
                if (!networks.empty()) history[j].inputs.push_back({rec.kc, rec.et0, f.water_input(), rec.zr});
                et[j].add_day(rec.theta_true[j], rec.kc, rec.et0, yields[j]);
                theta_sum[j].add(rec.theta_true[j]);
                irrigation.add(rec.u[j]);
            }
            rain_total.add(rec.rain);
            report.events += rec.c;
        } catch (const std::exception& e) {
            report.failure = classify(e);
            report.failure_message = "day " + std::to_string(d) + " (" + rec.date + "): " + e.what();
            break;
        }
        report.records.push_back(rec);
        if (options.on_day) options.on_day(report.records.back());
    }

    report.total_irrigation = irrigation.value();
    report.total_rain = rain_total.value();
    double ya_sum = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        const double ya = et[j].etm() > 0.0 ? predicted_yield(et[j].etc(), et[j].etm(), yields[j]) : yields[j].ym;
        report.yield.push_back(ya);
        ya_sum += ya;
        report.mean_theta.push_back(report.records.empty() ? std::numeric_limits<double>::quiet_NaN()
                                                           : theta_sum[j].value() / static_cast<double>(report.records.size()));
    }
    report.iwue = report.total_irrigation > 0.0 ? iwue(ya_sum, report.total_irrigation)
                                                : std::numeric_limits<double>::quiet_NaN();
    if (!solve_times.empty()) {
        CompensatedSum t;
        for (double s : solve_times) t.add(s);
        report.mean_solve_seconds = t.value() / static_cast<double>(solve_times.size());
        report.median_solve_seconds = median(solve_times);
        report.max_solve_seconds = *std::max_element(solve_times.begin(), solve_times.end());
    }
    return report;
}

namespace {

std::string num(double v) {
    std::ostringstream s;
    s.precision(17);
    s << v;
    return s.str();
}

std::ofstream open_out(const std::filesystem::path& p) {
    std::ofstream out(p);
    if (!out) throw ValidationError("cannot write " + p.string());
    return out;
}

}  // namespace

void write_report(const SeasonReport& report, const std::string& out_dir) {
    const std::filesystem::path dir(out_dir);
    std::filesystem::create_directories(dir);

    auto daily = open_out(dir / "daily.csv");
    daily << "day,date,c";
    for (const auto& id : report.zone_ids) daily << ",u_" << id;
    for (const auto& id : report.zone_ids) daily << ",theta_true_" << id;
    for (const auto& id : report.zone_ids) daily << ",theta_est_" << id;
    daily << ",rain_m,et0_m,kc,zr_m,solve_s,gap,status,nodes,binaries\n";
    for (const auto& r : report.records) {
        daily << r.day << ',' << r.date << ',' << r.c;
        for (double v : r.u) daily << ',' << num(v);
        for (double v : r.theta_true) daily << ',' << num(v);
        for (double v : r.theta_est) daily << ',' << num(v);
        daily << ',' << num(r.rain) << ',' << num(r.et0) << ',' << num(r.kc) << ',' << num(r.zr) << ','
              << num(r.solve_seconds) << ',' << num(r.gap) << ',' << r.status << ',' << r.nodes << ',' << r.binaries
              << '\n';
    }

    auto sched = open_out(dir / "schedule.csv");
    sched << "date,c";
    for (const auto& id : report.zone_ids) sched << ",u_" << id;
    sched << '\n';
    for (const auto& r : report.records) {
        sched << r.date << ',' << r.c;
        for (double v : r.u) sched << ',' << num(v);
        sched << '\n';
    }

    auto summary = open_out(dir / "summary.csv");
    summary << "key,value\n";
    summary << "strategy," << to_string(report.strategy) << '\n';
    summary << "days," << report.records.size() << '\n';
    summary << "total_irrigation_m," << num(report.total_irrigation) << '\n';
    summary << "total_rain_m," << num(report.total_rain) << '\n';
    summary << "events," << report.events << '\n';
    double ya = 0.0;
    for (std::size_t j = 0; j < report.yield.size(); ++j) {
        summary << "yield_" << report.zone_ids[j] << "_kg_m2," << num(report.yield[j]) << '\n';
        ya += report.yield[j];
    }
    summary << "yield_total_kg_m2," << num(ya) << '\n';
    summary << "iwue_kg_m3," << num(report.iwue) << '\n';
    for (std::size_t j = 0; j < report.mean_theta.size(); ++j)
        summary << "mean_theta_" << report.zone_ids[j] << ',' << num(report.mean_theta[j]) << '\n';
    summary << "mean_solve_s," << num(report.mean_solve_seconds) << '\n';
    summary << "median_solve_s," << num(report.median_solve_seconds) << '\n';
    summary << "max_solve_s," << num(report.max_solve_seconds) << '\n';
    summary << "max_gap," << num(report.max_gap) << '\n';
    summary << "limited_solves," << report.limited_solves << '\n';
    summary << "failure," << (report.failure_message.empty() ? "none" : report.failure_message) << '\n';
}

DailyTotals read_daily_totals(const std::string& daily_csv) {
    std::ifstream in(daily_csv);
    if (!in) throw ValidationError("cannot read " + daily_csv);
    std::string line;
    if (!std::getline(in, line)) throw ValidationError(daily_csv + ": missing header");
    std::vector<std::string> cols;
    {
        std::stringstream ss(line);
        std::string c;
        while (std::getline(ss, c, ',')) cols.push_back(c);
    }
    std::vector<std::size_t> u_cols;
    std::size_t c_col = cols.size(), rain_col = cols.size();
    for (std::size_t i = 0; i < cols.size(); ++i) {
        if (cols[i].rfind("u_", 0) == 0) u_cols.push_back(i);
        if (cols[i] == "c") c_col = i;
        if (cols[i] == "rain_m") rain_col = i;
    }
    if (c_col == cols.size() || rain_col == cols.size() || u_cols.empty())
        throw ValidationError(daily_csv + ": header lacks c, u_* or rain_m columns");
    DailyTotals t;
    CompensatedSum irr, rain;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string c;
        while (std::getline(ss, c, ',')) f.push_back(c);
        if (f.size() != cols.size()) throw ValidationError(daily_csv + ": wrong field count on line " + std::to_string(line_no));
        try {
            // Zones are summed within a day in column order, matching the season loop.
            for (std::size_t i : u_cols) irr.add(std::stod(f[i]));
            rain.add(std::stod(f[rain_col]));
            t.events += std::stoi(f[c_col]);
        } catch (const std::exception&) {
            throw ValidationError(daily_csv + ": unparsable value on line " + std::to_string(line_no));
        }
        ++t.days;
    }
    t.total_irrigation = irr.value();
    t.total_rain = rain.value();
    return t;
}

}  // namespace irrig
