/**
 * @file field_model.cpp
 */

#include "irrig/field_model.hpp"

#include "irrig/error.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace irrig {

void ManagementZone::validate() const {
    phi.validate();
    grid.validate();
    thresholds.validate();
    if (!(theta_wp < theta_fc && theta_fc <= phi.theta_s))
        throw DomainError("zone " + id + ": need theta_wp < theta_fc <= theta_s");
    if (!(u_min >= 0.0 && u_min < u_max))
        throw DomainError("zone " + id + ": need 0 <= u_min < u_max");
    if (evaporation_fraction < 0.0 || evaporation_fraction > 1.0)
        throw DomainError("zone " + id + ": evaporation fraction must lie in [0, 1]");
}

ColumnModel ManagementZone::column_model() const {
    ColumnModel model;
    model.phi = phi;
    model.grid = grid;
    model.thresholds = thresholds;
    model.bottom = bottom;
    return model;
}

FeddesThresholds thresholds_from_moisture(const VanGenuchtenParams& phi, double theta_fc,
                                          double theta_lower, double theta_wp) {
    FeddesThresholds t;
    t.psi_anaerobic = kAnaerobicHead;
    t.psi_opt_high = inverse_retention(theta_fc, phi);
    t.psi_opt_low = inverse_retention(theta_lower, phi);
    t.psi_wilting = inverse_retention(theta_wp, phi);
    t.validate();
    return t;
}

void DailyForcing::validate() const {
    if (u_irr < 0.0 || rain < 0.0 || et0 < 0.0 || kc < 0.0 || !(zr > 0.0))
        throw DomainError("daily forcing entries must be nonnegative (zr positive)");
}

std::vector<double> theta_profile(const ColumnState& state, const VanGenuchtenParams& phi) {
    std::vector<double> theta(state.psi.size());
    std::transform(state.psi.begin(), state.psi.end(), theta.begin(),
                   [&](double h) { return water_retention(h, phi); });
    return theta;
}

std::vector<double> depth_average_weights(const SoilGrid& grid, double top, double bottom) {
    if (!(bottom > top) || top < 0.0 || bottom > grid.depth() + 1e-12)
        throw DomainError("depth average interval outside the column");
    const auto& d = grid.node_depths;
    std::vector<double> w(d.size(), 0.0);
    for (std::size_t i = 0; i + 1 < d.size(); ++i) {
        const double s = std::max(top, d[i]);
        const double e = std::min(bottom, d[i + 1]);
        if (e <= s) continue;
        const double h = d[i + 1] - d[i];
        const double a = d[i + 1] - s, b = d[i + 1] - e;
        const double c = e - d[i], f = s - d[i];
        w[i] += (a * a - b * b) / (2.0 * h);
        w[i + 1] += (c * c - f * f) / (2.0 * h);
    }
    const double len = bottom - top;
    for (double& v : w) v /= len;
    return w;
}

double depth_average(std::span<const double> profile, const SoilGrid& grid, double top, double bottom) {
    if (profile.size() != grid.size()) throw DimensionError("profile length does not match grid");
    const auto w = depth_average_weights(grid, top, bottom);
    double acc = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) acc += w[i] * profile[i];
    return acc;
}

std::vector<double> root_zone_weights(const SoilGrid& grid, double zr) {
    if (!(zr > 0.0) || zr > grid.depth() + 1e-12)
        throw DomainError("rooting depth must lie in (0, column depth]");
    static constexpr double kQuarterWeights[4] = {0.4, 0.3, 0.2, 0.1};
    std::vector<double> w(grid.size(), 0.0);
    for (int q = 0; q < 4; ++q) {
        const auto wq = depth_average_weights(grid, zr * q / 4.0, zr * (q + 1) / 4.0);
        for (std::size_t i = 0; i < w.size(); ++i) w[i] += kQuarterWeights[q] * wq[i];
    }
    return w;
}

double root_zone_moisture(std::span<const double> theta_profile, const SoilGrid& grid, double zr) {
    if (theta_profile.size() != grid.size()) throw DimensionError("profile length does not match grid");
    const auto w = root_zone_weights(grid, zr);
    double acc = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) acc += w[i] * theta_profile[i];
    return acc;
}

DayResult simulate_day(const ManagementZone& zone, const ColumnState& state,
                       const DailyForcing& forcing, double process_noise_sd, std::uint64_t seed) {
    forcing.validate();
    const ColumnModel model = zone.column_model();
    SurfaceForcing sf;
    sf.water_input = forcing.water_input() / kSecondsPerDay;
    sf.et0 = (1.0 - zone.evaporation_fraction) * forcing.et0 / kSecondsPerDay;
    sf.evaporation = zone.evaporation_fraction * forcing.et0 / kSecondsPerDay;
    sf.kc = forcing.kc;
    sf.zr = forcing.zr;

    DayResult out;
    out.state = state;
    const double dt = kSecondsPerDay / kStepsPerDay;
    for (int s = 0; s < kStepsPerDay; ++s) {
        StepReport rep;
        out.state = step(out.state, sf, dt, model, &rep);
        out.budget += rep.budget;
    }
    if (process_noise_sd > 0.0) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> noise(0.0, process_noise_sd);
        for (double& h : out.state.psi) h += noise(rng);
    }
    out.outputs.theta_profile = theta_profile(out.state, zone.phi);
    out.outputs.theta_rz = root_zone_moisture(out.outputs.theta_profile, zone.grid, forcing.zr);
    return out;
}

double observe_top_layer(std::span<const double> theta_profile, const SoilGrid& grid,
                         double sensing_depth, double noise_sd, std::uint64_t seed) {
    double o = depth_average(theta_profile, grid, 0.0, sensing_depth);
    if (noise_sd > 0.0) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> noise(0.0, noise_sd);
        o += noise(rng);
    }
    return o;
}

ColumnState uniform_state(const ManagementZone& zone, double theta) {
    ColumnState s;
    s.psi.assign(zone.grid.size(), inverse_retention(theta, zone.phi));
    return s;
}

}  // namespace irrig
