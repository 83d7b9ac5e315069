/**
 * @file surrogate.hpp
 * @brief Feedforward ReLU surrogates of one-day-ahead root-zone moisture.
 *
 * Features per day are [theta_rz, kc, et0, I, zr] with I = irrigation + rain
 * and all depths in m/day. A network with lag l reads l + 1 consecutive days
 * in ascending order and predicts theta_rz of the following day.
 */

#pragma once

#include "irrig/field_model.hpp"
#include "irrig/weather.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace irrig {

inline constexpr int kFeaturesPerDay = 5;

enum Feature : int { kThetaRz = 0, kCropCoeff = 1, kEt0 = 2, kWaterInput = 3, kRootDepth = 4 };

/// Per-feature min-max map onto [0, 1]. Constant features keep range 1 and
/// are flagged, so they map to 0 and stay invertible.
struct MinMaxScaler {
    std::vector<double> min;
    std::vector<double> range;
    std::vector<bool> degenerate;

    std::size_t size() const { return min.size(); }
    double scale(std::size_t i, double v) const { return (v - min[i]) / range[i]; }
    double unscale(std::size_t i, double s) const { return min[i] + s * range[i]; }
    std::vector<double> scale(std::span<const double> v) const;
    std::vector<double> unscale(std::span<const double> s) const;
    void validate() const;
};

/// Fits one scaler column per entry of each row.
MinMaxScaler fit_scaler(const std::vector<std::vector<double>>& rows);

struct MLPNetwork {
    int lag = 1;
    std::vector<int> layer_sizes;          ///< input, hidden..., output (1)
    std::vector<Eigen::MatrixXd> weights;  ///< W_l maps layer l to layer l + 1
    std::vector<Eigen::VectorXd> biases;
    MinMaxScaler input_scaler;
    MinMaxScaler output_scaler;
    std::map<std::string, std::string> metadata;

    int num_inputs() const { return layer_sizes.empty() ? 0 : layer_sizes.front(); }
    int num_hidden_neurons() const;
    void validate() const;

    /// Forward pass on already scaled inputs; returns the scaled output.
    double forward_scaled(std::span<const double> scaled) const;
};

/// Input feature count for a given lag.
inline int feature_count(int lag) { return kFeaturesPerDay * (lag + 1); }

/// Builds an untrained network with He-uniform weights and zero biases.
MLPNetwork make_network(int lag, const std::vector<int>& hidden, std::uint64_t seed);

/// Scale, forward pass, unscale.
double predict_one_step(const MLPNetwork& net, std::span<const double> raw_features);

/// Exogenous inputs for one day.
struct DayInputs {
    double kc = 0.0;
    double et0 = 0.0;          ///< m/day
    double water_input = 0.0;  ///< irrigation + rain (m/day)
    double zr = 0.5;
};

/// One open-loop plant trajectory: theta_rz[k] is the moisture at the start
/// of day k (length H + 1) and inputs[k] drives day k (length H).
struct Trajectory {
    std::vector<double> theta_rz;
    std::vector<DayInputs> inputs;
};

/// Feature vector for day k of a trajectory (needs k >= lag).
std::vector<double> trajectory_features(const Trajectory& t, int lag, std::size_t k);

/// Recursive prediction. `history` holds the trajectory up to the start of
/// the first forecast day: its theta_rz has at least lag + 1 entries and its
/// inputs the lag days before. Returns one value per forcing day.
std::vector<double> rollout(const MLPNetwork& net, const Trajectory& history, std::span<const DayInputs> forcing);

struct Dataset {
    int lag = 1;
    std::vector<std::vector<double>> features;  ///< raw (unscaled)
    std::vector<double> targets;                ///< raw theta_rz of the next day
    std::vector<Trajectory> trajectories;
};

struct TrainingDataConfig {
    int horizon_days = 60;
    int n_trajectories = 100;
    int lag = 1;
    /// Each trajectory draws its daily irrigation chance uniformly from this
    /// range, so the data covers dry-down as well as wet regimes.
    double irrigation_probability_min = 0.0;
    double irrigation_probability_max = 0.2;
    double et0_min_mm = 0.1;
    double et0_max_mm = 8.99;
    double process_noise_sd = 5e-4;
    double zr_shallow = 0.5;
    double zr_deep = 1.0;
    /// Chance that a trajectory switches from the shallow to the deep rooting
    /// depth on a random day; other trajectories stay at one depth (50/50).
    double zr_switch_probability = 0.2;
    double gdd_max = 1300.0;  ///< upper end of the random starting growing-degree days
    std::uint64_t seed = 1;
};

/// Open-loop plant rollouts with random irrigation events in [u_min, u_max],
/// uniform ET0, rain and temperature resampled from the pool and, for some
/// trajectories, a switch of the rooting depth. Failed trajectories are skipped and counted
/// in `failures` when given.
Dataset generate_training_data(const ManagementZone& zone, const WeatherTable& weather_pool,
                               const TrainingDataConfig& config, int* failures = nullptr);

struct Scalers {
    MinMaxScaler input;
    MinMaxScaler output;
};

Scalers fit_scalers(const Dataset& dataset);

struct TrainingConfig {
    std::vector<int> hidden{40, 20};
    int epochs = 40;
    double learning_rate = 1e-4;
    int batch_size = 16;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t seed = 1;
};

struct TrainingReport {
    std::vector<double> epoch_loss;  ///< mean scaled MSE per epoch
    double initial_loss = 0.0;       ///< before the first update
};

/// Minibatch Adam on scaled MSE. Deterministic for a fixed seed.
MLPNetwork train(const Dataset& dataset, const TrainingConfig& config, TrainingReport* report = nullptr);

struct SelectionReport {
    std::vector<double> selection_rmse;  ///< rollout RMSE of each restart
    int chosen = 0;                      ///< index of the returned restart
    TrainingReport training;             ///< report of the chosen restart
};

/// Trains `restarts` networks with seeds config.seed, config.seed + 1, ...
/// and returns the one with the lowest rollout RMSE on `selection`.
MLPNetwork train_with_selection(const Dataset& dataset, const TrainingConfig& config, int restarts,
                                std::span<const Trajectory> selection, SelectionReport* report = nullptr);

/// Full recipe for one zone's surrogate: training data, seed restarts
/// ranked on a selection set, then a score on a separate held-out set.
/// Selection and held-out trajectories keep one rooting depth each.
struct SurrogateProtocol {
    int trajectories = 1000;
    int horizon_days = 60;
    int lag = 1;
    int restarts = 4;
    int epochs = 40;
    int validation_trajectories = 60;
    int validation_days = 25;
    std::uint64_t seed = 1;
};

struct ZoneSurrogate {
    MLPNetwork net;
    std::size_t samples = 0;
    SelectionReport selection;
    double rollout_rmse = 0.0;  ///< on the held-out set
};

/// Held-out trajectories used to score a surrogate trained with `protocol`.
Dataset held_out_trajectories(const ManagementZone& zone, const WeatherTable& weather_pool,
                              const SurrogateProtocol& protocol);

ZoneSurrogate train_zone_surrogate(const ManagementZone& zone, const WeatherTable& weather_pool,
                                   const SurrogateProtocol& protocol);

/// RMSE of recursive rollouts against plant trajectories. Each rollout starts
/// after the first lag + 1 moisture values and runs to the trajectory end.
double validate_rollouts(const MLPNetwork& net, std::span<const Trajectory> reference);

/// RMSE between matched series.
double rmse(std::span<const double> a, std::span<const double> b);

void save_network(const MLPNetwork& net, std::ostream& out);
MLPNetwork load_network(std::istream& in);
void save_network(const MLPNetwork& net, const std::string& path);
MLPNetwork load_network(const std::string& path);

}  // namespace irrig
