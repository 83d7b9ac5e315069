/**
 * @file scheduler.hpp
 * @brief Mixed-integer MPC irrigation scheduler and the triggered baseline.
 *
 * The horizon program over days k = 0..N-1 and zones j:
 *
 *   min  sum Qhi eps_hi^2 + Qlo eps_lo^2 + Rc sum c_k + Ru sum u_kj
 *   s.t. theta_{k+1,j} = surrogate_j(features of days k-l..k)
 *        nu_lo_j - eps_lo_kj <= theta_{k+1,j} <= nu_hi_j + eps_hi_kj
 *        u_min_j c_k <= u_kj <= u_max_j c_k,   c_k in {0, 1},   eps >= 0
 *
 * Each surrogate copy is an exact big-M encoding, chained so that the
 * prediction for day k + 1 feeds the moisture feature of the next copy.
 */

#pragma once

#include "irrig/miqp.hpp"
#include "irrig/neural_encoding.hpp"
#include "irrig/surrogate.hpp"

#include <string>
#include <vector>

namespace irrig {

struct TargetZone {
    double lower = 0.0;
    double upper = 0.0;
};

/// nu_upper = theta_fc, nu_lower = theta_fc - mad (theta_fc - theta_wp).
TargetZone target_zone(double theta_fc, double theta_wp, double mad);

struct SchedulerConfig {
    int horizon = 7;
    double q_upper = 2.2e7;  ///< cost per (m3/m3)^2 above the target zone
    double q_lower = 2.0e7;  ///< cost per (m3/m3)^2 below the target zone
    double r_c = 1000.0;     ///< fixed cost per irrigation event
    double r_u = 9000.0;     ///< cost per metre of water per zone
    double mad = 0.5;
    double relative_gap = 1e-3;
    double time_limit = 60.0;  ///< seconds per solve
    long node_limit = 1000000;
    int relaxation_iterations = 3000;  ///< ADMM cap per node relaxation
    EncodingOptions encoding;
    bool local_search = true;  ///< seed branch-and-bound with a forward-model search

    void validate() const;
};

/// Everything the scheduler needs about one zone on the decision day.
struct ZoneContext {
    const MLPNetwork* net = nullptr;
    double u_min = 0.0;  ///< m/day
    double u_max = 0.0;
    TargetZone target;
    /// Admissible range of predicted moisture. Keeps the interval bounds of
    /// chained network copies from growing with the horizon.
    double theta_min = 0.0;
    double theta_max = 1.0;
    /// Moisture up to today (last entry is today's estimate) and the inputs
    /// of the preceding days; at least lag past days are needed.
    Trajectory history;
};

/// Forecast drivers of one horizon day (depths in m/day).
struct ForecastDay {
    double kc = 0.0;
    double et0 = 0.0;
    double rain = 0.0;
    double zr = 0.5;
};

/// Variable handles of a built horizon program.
struct SchedulerModel {
    QuadraticProgram qp;
    int horizon = 0;
    std::vector<int> c;                          ///< [k]
    std::vector<std::vector<int>> u;             ///< [k][j]
    std::vector<std::vector<int>> eps_hi;        ///< [k][j]
    std::vector<std::vector<int>> eps_lo;        ///< [k][j]
    std::vector<std::vector<int>> theta;         ///< [k][j], moisture at the end of day k
    std::vector<std::vector<EncodedNetwork>> copies;  ///< [k][j]
    std::vector<std::string> warnings;           ///< clamped features
};

SchedulerModel build_miqp(const SchedulerConfig& config, const std::vector<ZoneContext>& zones,
                          const std::vector<ForecastDay>& forecast);

struct Schedule {
    std::vector<int> c;
    std::vector<std::vector<double>> u;  ///< [k][j] (m/day)
    std::vector<std::vector<double>> eps_hi;
    std::vector<std::vector<double>> eps_lo;
    std::vector<std::vector<double>> theta_pred;
    double objective = 0.0;
    SolveStatus status = SolveStatus::Optimal;
    double relative_gap = 0.0;
    long nodes = 0;
    double seconds = 0.0;
    std::size_t binaries = 0;
    std::vector<std::string> warnings;
};

/// Builds and solves the horizon program. Returns the incumbent with its
/// gap when a limit stops the search.
Schedule schedule_day(const SchedulerConfig& config, const std::vector<ZoneContext>& zones,
                      const std::vector<ForecastDay>& forecast);

/// Reads a Schedule out of a solution vector of the model, snapping
/// amounts onto the timing bounds.
Schedule extract_schedule(const SchedulerModel& model, const std::vector<ZoneContext>& zones,
                          const SolveResult& result);

/// Objective of the horizon program evaluated with the surrogates' forward
/// pass for given timing and amounts.
double forward_objective(const SchedulerConfig& config, const std::vector<ZoneContext>& zones,
                         const std::vector<ForecastDay>& forecast, const std::vector<int>& c,
                         const std::vector<std::vector<double>>& u);

struct TriggeredZone {
    TargetZone target;
    double u_max = 0.0;
};

/// Triggered baseline: all zeros when every zone is at or above its lower
/// target; otherwise each zone gets (nu_upper - theta) zr - rain, clamped to
/// [0, u_max]. `rain_next4` is the forecast rain of the next four days (m).
std::vector<double> triggered_schedule_day(const std::vector<double>& theta_rz, const std::vector<TriggeredZone>& zones,
                                           double rain_next4, double zr);

}  // namespace irrig
