/**
 * @file training_data.cpp
 * @brief Open-loop plant rollouts for surrogate training.
 */

#include "irrig/surrogate.hpp"

#include "irrig/crop_metrics.hpp"
#include "irrig/error.hpp"

#include <random>

namespace irrig {

namespace {

constexpr double kMetresPerMm = 1e-3;

}  // namespace

Dataset generate_training_data(const ManagementZone& zone, const WeatherTable& weather_pool,
                               const TrainingDataConfig& config, int* failures) {
    zone.validate();
    if (weather_pool.empty()) throw DomainError("generate_training_data: empty weather pool");
    if (config.horizon_days <= config.lag || config.n_trajectories < 0 || config.lag < 0)
        throw DomainError("generate_training_data: horizon must exceed the lag");
    if (!(config.et0_min_mm >= 0.0 && config.et0_min_mm <= config.et0_max_mm))
        throw DomainError("generate_training_data: bad ET0 range");
    if (config.zr_switch_probability < 0.0 || config.zr_switch_probability > 1.0)
        throw DomainError("generate_training_data: switch probability outside [0, 1]");
    if (!(config.irrigation_probability_min >= 0.0 && config.irrigation_probability_min <= config.irrigation_probability_max &&
          config.irrigation_probability_max <= 1.0))
        throw DomainError("generate_training_data: irrigation probability range outside [0, 1]");

    const CropCoeffModel kc_model;
    Dataset data;
    data.lag = config.lag;
    int failed = 0;
    std::mt19937_64 rng(config.seed);
    for (int traj = 0; traj < config.n_trajectories; ++traj) {
        std::uniform_real_distribution<double> theta0_dist(zone.theta_wp, zone.theta_fc);
        std::uniform_int_distribution<int> switch_dist(1, std::max(1, config.horizon_days - 1));
        std::uniform_real_distribution<double> gdd_dist(0.0, config.gdd_max);
        std::uniform_int_distribution<std::size_t> pool_dist(0, weather_pool.size() - 1);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        std::uniform_real_distribution<double> u_dist(zone.u_min, zone.u_max);
        std::uniform_real_distribution<double> et0_dist(config.et0_min_mm, config.et0_max_mm);

        std::uniform_real_distribution<double> p_dist(config.irrigation_probability_min, config.irrigation_probability_max);
        const double theta0 = theta0_dist(rng);
        const double p_irrigate = p_dist(rng);
        // zr_switch is the first deep day: 0 means deep throughout, horizon means shallow throughout.
        int zr_switch = switch_dist(rng);
        if (unit(rng) >= config.zr_switch_probability) zr_switch = unit(rng) < 0.5 ? 0 : config.horizon_days;
        double gdd = gdd_dist(rng);
        const std::uint64_t noise_base = rng();

        ColumnState state = uniform_state(zone, theta0);
        Trajectory t;
        const double zr0 = zr_switch > 0 ? config.zr_shallow : config.zr_deep;
        t.theta_rz.push_back(root_zone_moisture(theta_profile(state, zone.phi), zone.grid, zr0));
        bool ok = true;
        for (int k = 0; k < config.horizon_days; ++k) {
            const auto& w = weather_pool[pool_dist(rng)];
            gdd += std::max(0.0, w.tavg_c - kc_model.t_base);
            DailyForcing f;
            f.kc = crop_coefficient(gdd, kc_model);
            f.et0 = et0_dist(rng) * kMetresPerMm;
            f.rain = w.rain_mm * kMetresPerMm;
            const bool irrigate = unit(rng) < p_irrigate;
            const double amount = u_dist(rng);
            f.u_irr = irrigate ? amount : 0.0;
            f.zr = k < zr_switch ? config.zr_shallow : config.zr_deep;
            try {
                const auto day = simulate_day(zone, state, f, config.process_noise_sd, noise_base + static_cast<std::uint64_t>(k));
                state = day.state;
                t.theta_rz.push_back(day.outputs.theta_rz);
            } catch (const StepFailure&) {
                ok = false;
                break;
            }
            t.inputs.push_back({f.kc, f.et0, f.water_input(), f.zr});
        }
        if (!ok) {
            ++failed;
            continue;
        }
        for (int k = config.lag; k < config.horizon_days; ++k) {
            data.features.push_back(trajectory_features(t, config.lag, static_cast<std::size_t>(k)));
            data.targets.push_back(t.theta_rz[static_cast<std::size_t>(k) + 1]);
        }
        data.trajectories.push_back(std::move(t));
    }
    if (failures) *failures = failed;
    return data;
}

Scalers fit_scalers(const Dataset& dataset) {
    if (dataset.features.empty() || dataset.targets.size() != dataset.features.size())
        throw DomainError("fit_scalers: empty or inconsistent dataset");
    std::vector<std::vector<double>> targets;
    targets.reserve(dataset.targets.size());
    for (double y : dataset.targets) targets.push_back({y});
    return {fit_scaler(dataset.features), fit_scaler(targets)};
}

}  // namespace irrig
