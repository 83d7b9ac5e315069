/**
 * @file scheduler.cpp
 * @brief Horizon MIQP assembly, solution, and the triggered baseline.
 */

#include "irrig/scheduler.hpp"

#include "irrig/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>

namespace irrig {

TargetZone target_zone(double theta_fc, double theta_wp, double mad) {
    if (!(theta_wp < theta_fc)) throw DomainError("target_zone: wilting point must lie below field capacity");
    if (!(mad >= 0.0 && mad <= 1.0)) throw DomainError("target_zone: MAD must lie in [0, 1]");
    return {theta_fc - mad * (theta_fc - theta_wp), theta_fc};
}

void SchedulerConfig::validate() const {
    if (horizon < 1) throw DomainError("scheduler: horizon must be at least 1 day");
    if (q_upper < 0.0 || q_lower < 0.0 || r_c < 0.0 || r_u < 0.0)
        throw DomainError("scheduler: cost weights must be nonnegative");
    if (!(mad >= 0.0 && mad <= 1.0)) throw DomainError("scheduler: MAD must lie in [0, 1]");
    if (relative_gap < 0.0) throw DomainError("scheduler: gap must be nonnegative");
    if (!(time_limit > 0.0)) throw DomainError("scheduler: time limit must be positive");
    if (relaxation_iterations < 1) throw DomainError("scheduler: relaxation iteration cap must be positive");
}

namespace {

/// Where one input feature of one surrogate copy comes from.
struct FeatureSource {
    enum Kind { Constant, Theta, Water } kind = Constant;
    double value = 0.0;  ///< constant value, or rain for Water
    int day = 0;         ///< Theta: copy day whose output is read; Water: irrigation day
};

/// Feature sources of every copy [k][j], built once for the MIQP and the
/// forward-model evaluation so both see the same clamped constants.
struct FeaturePlan {
    std::vector<std::vector<std::vector<FeatureSource>>> sources;
    std::vector<std::string> warnings;
};

void check_inputs(const SchedulerConfig& config, const std::vector<ZoneContext>& zones,
                  const std::vector<ForecastDay>& forecast) {
    config.validate();
    if (zones.empty()) throw DomainError("scheduler: no zones");
    if (static_cast<int>(forecast.size()) < config.horizon)
        throw DimensionError("scheduler: forecast shorter than the horizon");
    for (std::size_t j = 0; j < zones.size(); ++j) {
        const auto& z = zones[j];
        if (z.net == nullptr) throw DomainError("scheduler: zone " + std::to_string(j) + " has no network");
        z.net->validate();
        if (!(z.u_min >= 0.0 && z.u_min <= z.u_max)) throw DomainError("scheduler: need 0 <= u_min <= u_max");
        if (!(z.target.lower <= z.target.upper)) throw DomainError("scheduler: inverted target zone");
        if (!(z.theta_min < z.theta_max)) throw DomainError("scheduler: empty admissible moisture range");
        const auto lag = static_cast<std::size_t>(z.net->lag);
        if (z.history.theta_rz.size() < lag + 1 || z.history.inputs.size() + 1 < z.history.theta_rz.size() ||
            z.history.inputs.size() < lag)
            throw DimensionError("scheduler: zone history shorter than the network lag");
    }
    for (int k = 0; k < config.horizon; ++k) {
        const auto& f = forecast[static_cast<std::size_t>(k)];
        if (!(f.kc >= 0.0 && f.et0 >= 0.0 && f.rain >= 0.0 && f.zr > 0.0))
            throw DomainError("scheduler: forecast entries must be nonnegative");
    }
}

FeaturePlan make_plan(const SchedulerConfig& config, const std::vector<ZoneContext>& zones,
                      const std::vector<ForecastDay>& forecast) {
    FeaturePlan plan;
    const int n = config.horizon;
    plan.sources.assign(static_cast<std::size_t>(n), std::vector<std::vector<FeatureSource>>(zones.size()));
    for (std::size_t j = 0; j < zones.size(); ++j) {
        const auto& z = zones[j];
        const int lag = z.net->lag;
        const auto& sc = z.net->input_scaler;
        // History index of today's moisture.
        const auto today = static_cast<long>(z.history.theta_rz.size()) - 1;
        auto constant = [&](int k, std::size_t feature, double v, const char* what) {
            const double lo = sc.min[feature];
            const double hi = sc.min[feature] + (sc.degenerate[feature] ? 0.0 : sc.range[feature]);
            const double clamped = std::clamp(v, lo, hi);
            if (clamped != v) {
                std::ostringstream msg;
                msg << "zone " << j << " day " << k << ": " << what << " " << v << " clamped to " << clamped;
                plan.warnings.push_back(msg.str());
            }
            return FeatureSource{FeatureSource::Constant, clamped, 0};
        };
        for (int k = 0; k < n; ++k) {
            auto& src = plan.sources[static_cast<std::size_t>(k)][j];
            for (int d = k - lag; d <= k; ++d) {
                const std::size_t base = src.size();
                if (d < 0) {
                    const auto h = static_cast<std::size_t>(today + d);
                    const auto& in = z.history.inputs[h];
                    src.push_back(constant(k, base + kThetaRz, z.history.theta_rz[h], "past moisture"));
                    src.push_back(constant(k, base + kCropCoeff, in.kc, "past Kc"));
                    src.push_back(constant(k, base + kEt0, in.et0, "past ET0"));
                    src.push_back(constant(k, base + kWaterInput, in.water_input, "past water input"));
                    src.push_back(constant(k, base + kRootDepth, in.zr, "past rooting depth"));
                    continue;
                }
                const auto& f = forecast[static_cast<std::size_t>(d)];
                if (d == 0)
                    src.push_back(constant(k, base + kThetaRz, z.history.theta_rz.back(), "current moisture"));
                else
                    src.push_back({FeatureSource::Theta, 0.0, d - 1});
                src.push_back(constant(k, base + kCropCoeff, f.kc, "Kc"));
                src.push_back(constant(k, base + kEt0, f.et0, "ET0"));
                src.push_back({FeatureSource::Water, f.rain, d});
                src.push_back(constant(k, base + kRootDepth, f.zr, "rooting depth"));
            }
        }
    }
    return plan;
}

/// Forward-model evaluation of a candidate (c, u).
struct Evaluation {
    double objective = 0.0;
    std::vector<std::vector<double>> theta;  ///< [k][j]
    std::vector<std::vector<std::vector<double>>> preact;  ///< [k][j] hidden pre-activations, flattened
};

double slack_cost(const SchedulerConfig& config, const TargetZone& t, double theta) {
    const double hi = std::max(0.0, theta - t.upper);
    const double lo = std::max(0.0, t.lower - theta);
    return config.q_upper * hi * hi + config.q_lower * lo * lo;
}

Evaluation evaluate(const SchedulerConfig& config, const std::vector<ZoneContext>& zones, const FeaturePlan& plan,
                    const std::vector<int>& c, const std::vector<std::vector<double>>& u, bool keep_preact) {
    const auto n = static_cast<std::size_t>(config.horizon);
    Evaluation ev;
    ev.theta.assign(n, std::vector<double>(zones.size()));
    if (keep_preact) ev.preact.assign(n, std::vector<std::vector<double>>(zones.size()));
    for (std::size_t k = 0; k < n; ++k) {
        if (c[k] != 0) ev.objective += config.r_c;
        for (std::size_t j = 0; j < zones.size(); ++j) {
            const auto& net = *zones[j].net;
            const auto& src = plan.sources[k][j];
            std::vector<double> raw(src.size());
            for (std::size_t i = 0; i < src.size(); ++i) {
                switch (src[i].kind) {
                case FeatureSource::Constant: raw[i] = src[i].value; break;
                case FeatureSource::Theta: raw[i] = ev.theta[static_cast<std::size_t>(src[i].day)][j]; break;
                case FeatureSource::Water: raw[i] = src[i].value + u[static_cast<std::size_t>(src[i].day)][j]; break;
                }
            }
            Eigen::VectorXd a(static_cast<Eigen::Index>(raw.size()));
            for (std::size_t i = 0; i < raw.size(); ++i) a(static_cast<Eigen::Index>(i)) = net.input_scaler.scale(i, raw[i]);
            for (std::size_t l = 0; l < net.weights.size(); ++l) {
                a = net.weights[l] * a + net.biases[l];
                if (l + 1 < net.weights.size()) {
                    if (keep_preact) ev.preact[k][j].insert(ev.preact[k][j].end(), a.data(), a.data() + a.size());
                    a = a.cwiseMax(0.0);
                }
            }
            const double theta = net.output_scaler.unscale(0, a(0));
            ev.theta[k][j] = theta;
            ev.objective += config.r_u * u[k][j] + slack_cost(config, zones[j].target, theta);
        }
    }
    return ev;
}

/// Coordinate search over timing and amounts using forward passes.
void local_search(const SchedulerConfig& config, const std::vector<ZoneContext>& zones, const FeaturePlan& plan,
                  std::vector<int>& c, std::vector<std::vector<double>>& u) {
    constexpr int kLevels = 13;
    constexpr int kSweeps = 4;
    const auto n = static_cast<std::size_t>(config.horizon);
    const std::size_t m = zones.size();
    auto level = [&](std::size_t j, int i) {
        return zones[j].u_min + (zones[j].u_max - zones[j].u_min) * static_cast<double>(i) / (kLevels - 1);
    };
    double best = evaluate(config, zones, plan, c, u, false).objective;
    for (int sweep = 0; sweep < kSweeps; ++sweep) {
        bool improved = false;
        for (std::size_t k = 0; k < n; ++k) {
            // Toggle the day: off, or on with a common relative level.
            {
                auto c_try = c;
                auto u_try = u;
                if (c[k] != 0) {
                    c_try[k] = 0;
                    std::fill(u_try[k].begin(), u_try[k].end(), 0.0);
                    const double obj = evaluate(config, zones, plan, c_try, u_try, false).objective;
                    if (obj < best - 1e-9) {
                        best = obj;
                        c = c_try;
                        u = u_try;
                        improved = true;
                    }
                } else {
                    c_try[k] = 1;
                    for (int i = 0; i < kLevels; ++i) {
                        for (std::size_t j = 0; j < m; ++j) u_try[k][j] = level(j, i);
                        const double obj = evaluate(config, zones, plan, c_try, u_try, false).objective;
                        if (obj < best - 1e-9) {
                            best = obj;
                            c = c_try;
                            u = u_try;
                            improved = true;
                        }
                    }
                }
            }
            if (c[k] == 0) continue;
            for (std::size_t j = 0; j < m; ++j) {
                auto u_try = u;
                for (int i = 0; i < kLevels; ++i) {
                    u_try[k][j] = level(j, i);
                    const double obj = evaluate(config, zones, plan, c, u_try, false).objective;
                    if (obj < best - 1e-9) {
                        best = obj;
                        u = u_try;
                        improved = true;
                    }
                }
            }
        }
        if (!improved) break;
    }
}

/// Complete solution vector implied by a candidate: every neuron, output and
/// slack variable takes its forward-pass value, so the point satisfies the
/// encoding rows up to rounding.
std::vector<double> solution_for(const SchedulerConfig& config, const std::vector<ZoneContext>& zones,
                                 const FeaturePlan& plan, const SchedulerModel& model, const std::vector<int>& c,
                                 const std::vector<std::vector<double>>& u) {
    const auto ev = evaluate(config, zones, plan, c, u, true);
    std::vector<double> x(model.qp.num_variables(), 0.0);
    for (std::size_t k = 0; k < c.size(); ++k) {
        x[static_cast<std::size_t>(model.c[k])] = c[k];
        for (std::size_t j = 0; j < zones.size(); ++j) {
            x[static_cast<std::size_t>(model.u[k][j])] = u[k][j];
            const double theta = ev.theta[k][j];
            x[static_cast<std::size_t>(model.theta[k][j])] = theta;
            x[static_cast<std::size_t>(model.eps_hi[k][j])] = std::max(0.0, theta - zones[j].target.upper);
            x[static_cast<std::size_t>(model.eps_lo[k][j])] = std::max(0.0, zones[j].target.lower - theta);
            std::size_t flat = 0;
            for (const auto& layer : model.copies[k][j].layers) {
                for (const auto& neuron : layer) {
                    const double a = ev.preact[k][j][flat++];
                    x[static_cast<std::size_t>(neuron.z)] = std::max(0.0, a);
                    if (neuron.e >= 0) x[static_cast<std::size_t>(neuron.e)] = a > 0.0 ? 1.0 : 0.0;
                }
            }
        }
    }
    return x;
}

}  // namespace

SchedulerModel build_miqp(const SchedulerConfig& config, const std::vector<ZoneContext>& zones,
                          const std::vector<ForecastDay>& forecast) {
    check_inputs(config, zones, forecast);
    const FeaturePlan plan = make_plan(config, zones, forecast);
    const auto n = static_cast<std::size_t>(config.horizon);
    const std::size_t m = zones.size();

    SchedulerModel model;
    model.horizon = config.horizon;
    model.warnings = plan.warnings;
    auto& qp = model.qp;
    model.u.assign(n, std::vector<int>(m));
    model.eps_hi.assign(n, std::vector<int>(m));
    model.eps_lo.assign(n, std::vector<int>(m));
    model.theta.assign(n, std::vector<int>(m));
    model.copies.assign(n, std::vector<EncodedNetwork>(m));

    for (std::size_t k = 0; k < n; ++k) {
        const std::string day = std::to_string(k);
        const int ck = qp.add_binary("c_" + day);
        model.c.push_back(ck);
        qp.add_linear(ck, config.r_c);
        for (std::size_t j = 0; j < m; ++j) {
            const std::string tag = day + "_" + std::to_string(j);
            const int u = qp.add_variable("u_" + tag, 0.0, zones[j].u_max);
            model.u[k][j] = u;
            qp.add_linear(u, config.r_u);
            qp.add_constraint({{u, 1.0}, {ck, -zones[j].u_max}}, Sense::LessEqual, 0.0, "u_max_" + tag);
            qp.add_constraint({{u, 1.0}, {ck, -zones[j].u_min}}, Sense::GreaterEqual, 0.0, "u_min_" + tag);
        }
    }

    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t j = 0; j < m; ++j) {
            const auto& net = *zones[j].net;
            const auto& src = plan.sources[k][j];
            const std::string tag = std::to_string(k) + "_" + std::to_string(j);
            std::vector<AffineExpr> inputs;
            BoxBounds box;
            for (const auto& s : src) {
                switch (s.kind) {
                case FeatureSource::Constant:
                    inputs.push_back(AffineExpr::constant_value(s.value));
                    box.lower.push_back(s.value);
                    box.upper.push_back(s.value);
                    break;
                case FeatureSource::Theta: {
                    const auto& prev = model.copies[static_cast<std::size_t>(s.day)][j];
                    inputs.push_back(AffineExpr::variable(prev.output));
                    box.lower.push_back(prev.output_lower);
                    box.upper.push_back(prev.output_upper);
                    break;
                }
                case FeatureSource::Water:
                    inputs.push_back({{{model.u[static_cast<std::size_t>(s.day)][j], 1.0}}, s.value});
                    box.lower.push_back(s.value);
                    box.upper.push_back(s.value + zones[j].u_max);
                    break;
                }
            }
            EncodingOptions opt = config.encoding;
            opt.prefix = "nn_" + tag;
            auto& copy = model.copies[k][j];
            copy = encode_network_into(qp, net, inputs, box, opt);
            copy.output_lower = std::max(copy.output_lower, zones[j].theta_min);
            copy.output_upper = std::min(copy.output_upper, zones[j].theta_max);
            if (copy.output_lower > copy.output_upper)
                throw EncodingError("build_miqp: predicted moisture cannot reach the admissible range");
            qp.set_bounds(copy.output, copy.output_lower, copy.output_upper);
            const int theta = copy.output;
            model.theta[k][j] = theta;

            const int hi = qp.add_variable("eps_hi_" + tag, 0.0, kInfinity);
            const int lo = qp.add_variable("eps_lo_" + tag, 0.0, kInfinity);
            model.eps_hi[k][j] = hi;
            model.eps_lo[k][j] = lo;
            qp.add_quadratic(hi, hi, config.q_upper);
            qp.add_quadratic(lo, lo, config.q_lower);
            qp.add_constraint({{theta, 1.0}, {hi, -1.0}}, Sense::LessEqual, zones[j].target.upper, "upper_" + tag);
            qp.add_constraint({{theta, 1.0}, {lo, 1.0}}, Sense::GreaterEqual, zones[j].target.lower, "lower_" + tag);
        }
    }
    return model;
}

Schedule extract_schedule(const SchedulerModel& model, const std::vector<ZoneContext>& zones,
                          const SolveResult& result) {
    if (!result.has_solution()) throw SolverError("extract_schedule: no solution");
    const auto n = static_cast<std::size_t>(model.horizon);
    const std::size_t m = zones.size();
    const auto& x = result.x;
    Schedule s;
    s.c.resize(n);
    s.u.assign(n, std::vector<double>(m));
    s.eps_hi.assign(n, std::vector<double>(m));
    s.eps_lo.assign(n, std::vector<double>(m));
    s.theta_pred.assign(n, std::vector<double>(m));
    for (std::size_t k = 0; k < n; ++k) {
        s.c[k] = x[static_cast<std::size_t>(model.c[k])] >= 0.5 ? 1 : 0;
        for (std::size_t j = 0; j < m; ++j) {
            const double u = x[static_cast<std::size_t>(model.u[k][j])];
            s.u[k][j] = s.c[k] != 0 ? std::clamp(u, zones[j].u_min, zones[j].u_max) : 0.0;
            s.eps_hi[k][j] = std::max(0.0, x[static_cast<std::size_t>(model.eps_hi[k][j])]);
            s.eps_lo[k][j] = std::max(0.0, x[static_cast<std::size_t>(model.eps_lo[k][j])]);
            s.theta_pred[k][j] = x[static_cast<std::size_t>(model.theta[k][j])];
        }
    }
    s.objective = result.objective;
    s.status = result.status;
    s.relative_gap = result.relative_gap;
    s.nodes = result.nodes;
    s.seconds = result.seconds;
    s.binaries = model.qp.num_binaries();
    s.warnings = model.warnings;
    return s;
}

double forward_objective(const SchedulerConfig& config, const std::vector<ZoneContext>& zones,
                         const std::vector<ForecastDay>& forecast, const std::vector<int>& c,
                         const std::vector<std::vector<double>>& u) {
    check_inputs(config, zones, forecast);
    const auto n = static_cast<std::size_t>(config.horizon);
    if (c.size() != n || u.size() != n) throw DimensionError("forward_objective: schedule length differs from horizon");
    for (const auto& row : u)
        if (row.size() != zones.size()) throw DimensionError("forward_objective: one amount per zone required");
    return evaluate(config, zones, make_plan(config, zones, forecast), c, u, false).objective;
}

Schedule schedule_day(const SchedulerConfig& config, const std::vector<ZoneContext>& zones,
                      const std::vector<ForecastDay>& forecast) {
    const SchedulerModel model = build_miqp(config, zones, forecast);
    const FeaturePlan plan = make_plan(config, zones, forecast);
    const auto n = static_cast<std::size_t>(config.horizon);
    const std::size_t m = zones.size();

    BnbOptions opt;
    opt.relative_gap = config.relative_gap;
    opt.absolute_gap = 1e-9;
    opt.time_limit = config.time_limit;
    opt.node_limit = config.node_limit;
    opt.relaxation_iterations = config.relaxation_iterations;
    opt.branch_priority.assign(model.qp.num_variables(), 0);
    for (int c : model.c) opt.branch_priority[static_cast<std::size_t>(c)] = 1;
    for (const auto& stage : model.copies)
        for (const auto& copy : stage)
            for (const auto& layer : copy.layers)
                for (const auto& neuron : layer)
                    if (neuron.e >= 0) opt.relu_links.push_back({neuron.z, neuron.e, neuron.rows.front()});

    std::vector<int> c0(n, 0);
    std::vector<std::vector<double>> u0(n, std::vector<double>(m, 0.0));
    opt.initial_solutions.push_back(solution_for(config, zones, plan, model, c0, u0));
    if (config.local_search) {
        local_search(config, zones, plan, c0, u0);
        opt.initial_solutions.push_back(solution_for(config, zones, plan, model, c0, u0));
    }
    opt.solution_heuristic = [&](std::span<const double> x) -> std::optional<std::vector<double>> {
        std::vector<int> c(n);
        std::vector<std::vector<double>> u(n, std::vector<double>(m, 0.0));
        for (std::size_t k = 0; k < n; ++k) {
            c[k] = x[static_cast<std::size_t>(model.c[k])] >= 0.5 ? 1 : 0;
            if (c[k] == 0) continue;
            for (std::size_t j = 0; j < m; ++j)
                u[k][j] = std::clamp(x[static_cast<std::size_t>(model.u[k][j])], zones[j].u_min, zones[j].u_max);
        }
        return solution_for(config, zones, plan, model, c, u);
    };

    const SolveResult result = branch_and_bound(model.qp, opt);
    if (result.status == SolveStatus::Infeasible)
        throw SolverError("schedule_day: horizon program reported infeasible");
    if (!result.has_solution())
        throw SolverError(std::string("schedule_day: no incumbent before the ") + to_string(result.status));
    return extract_schedule(model, zones, result);
}

std::vector<double> triggered_schedule_day(const std::vector<double>& theta_rz, const std::vector<TriggeredZone>& zones,
                                           double rain_next4, double zr) {
    if (theta_rz.size() != zones.size()) throw DimensionError("triggered_schedule_day: one moisture value per zone");
    if (!(rain_next4 >= 0.0) || !(zr > 0.0)) throw DomainError("triggered_schedule_day: rain >= 0 and zr > 0 required");
    std::vector<double> u(zones.size(), 0.0);
    bool breach = false;
    for (std::size_t j = 0; j < zones.size(); ++j) breach = breach || theta_rz[j] < zones[j].target.lower;
    if (!breach) return u;
    for (std::size_t j = 0; j < zones.size(); ++j)
        u[j] = std::clamp((zones[j].target.upper - theta_rz[j]) * zr - rain_next4, 0.0, zones[j].u_max);
    return u;
}

}  // namespace irrig
