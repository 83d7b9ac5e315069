/**
 * @file training.cpp
 * @brief Minibatch Adam on mean squared error.
 */

#include "irrig/surrogate.hpp"

#include "irrig/error.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace irrig {

namespace {

struct Moments {
    std::vector<Eigen::MatrixXd> mw, vw;
    std::vector<Eigen::VectorXd> mb, vb;
};

/// Mean scaled MSE over the whole dataset.
double full_loss(const MLPNetwork& net, const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    Eigen::MatrixXd a = x;
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        a = (net.weights[l] * a).colwise() + net.biases[l];
        if (l + 1 < net.weights.size()) a = a.cwiseMax(0.0);
    }
    return (a.row(0).transpose() - y).squaredNorm() / static_cast<double>(y.size());
}

}  // namespace

MLPNetwork train(const Dataset& dataset, const TrainingConfig& config, TrainingReport* report) {
    if (config.epochs <= 0 || config.batch_size <= 0 || !(config.learning_rate > 0.0))
        throw DomainError("train: epochs, batch size and learning rate must be positive");
    if (dataset.features.size() < static_cast<std::size_t>(config.batch_size))
        throw DomainError("train: dataset smaller than one batch");
    const Scalers scalers = fit_scalers(dataset);

    MLPNetwork net = make_network(dataset.lag, config.hidden, config.seed);
    net.input_scaler = scalers.input;
    net.output_scaler = scalers.output;

    const auto n = static_cast<Eigen::Index>(dataset.features.size());
    const auto d = static_cast<Eigen::Index>(net.num_inputs());
    if (static_cast<Eigen::Index>(dataset.features.front().size()) != d)
        throw DimensionError("train: feature length does not match the lag");
    Eigen::MatrixXd x(d, n);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto s = net.input_scaler.scale(dataset.features[static_cast<std::size_t>(i)]);
        x.col(i) = Eigen::Map<const Eigen::VectorXd>(s.data(), d);
        y(i) = net.output_scaler.scale(0, dataset.targets[static_cast<std::size_t>(i)]);
    }
    // Start the output at the mean target so early updates shape, not shift.
    net.biases.back()(0) = y.mean();

    const std::size_t layers = net.weights.size();
    Moments mom;
    for (std::size_t l = 0; l < layers; ++l) {
        mom.mw.push_back(Eigen::MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols()));
        mom.vw.push_back(mom.mw.back());
        mom.mb.push_back(Eigen::VectorXd::Zero(net.biases[l].size()));
        mom.vb.push_back(mom.mb.back());
    }

    TrainingReport rep;
    rep.initial_loss = full_loss(net, x, y);
    std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    long t = 0;
    std::vector<Eigen::MatrixXd> acts(layers + 1);
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        for (std::size_t i = order.size() - 1; i > 0; --i) {
            std::uniform_int_distribution<std::size_t> pick(0, i);
            std::swap(order[i], order[pick(rng)]);
        }
        for (Eigen::Index start = 0; start < n; start += config.batch_size) {
            const Eigen::Index b = std::min<Eigen::Index>(config.batch_size, n - start);
            Eigen::MatrixXd xb(d, b);
            Eigen::VectorXd yb(b);
            for (Eigen::Index k = 0; k < b; ++k) {
                xb.col(k) = x.col(order[static_cast<std::size_t>(start + k)]);
                yb(k) = y(order[static_cast<std::size_t>(start + k)]);
            }
            acts[0] = xb;
            for (std::size_t l = 0; l < layers; ++l) {
                acts[l + 1] = (net.weights[l] * acts[l]).colwise() + net.biases[l];
                if (l + 1 < layers) acts[l + 1] = acts[l + 1].cwiseMax(0.0);
            }
            Eigen::MatrixXd delta = (2.0 / static_cast<double>(b)) * (acts[layers].row(0) - yb.transpose());
            ++t;
            const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(t));
            const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(t));
            for (std::size_t l = layers; l-- > 0;) {
                const Eigen::MatrixXd gw = delta * acts[l].transpose();
                const Eigen::VectorXd gb = delta.rowwise().sum();
                if (l > 0) {
                    delta = (net.weights[l].transpose() * delta).cwiseProduct(
                        acts[l].unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; }));
                }
                mom.mw[l] = config.beta1 * mom.mw[l] + (1.0 - config.beta1) * gw;
                mom.vw[l] = config.beta2 * mom.vw[l] + (1.0 - config.beta2) * gw.cwiseAbs2();
                mom.mb[l] = config.beta1 * mom.mb[l] + (1.0 - config.beta1) * gb;
                mom.vb[l] = config.beta2 * mom.vb[l] + (1.0 - config.beta2) * gb.cwiseAbs2();
                net.weights[l].array() -= config.learning_rate * (mom.mw[l].array() / c1) /
                                          ((mom.vw[l].array() / c2).sqrt() + config.epsilon);
                net.biases[l].array() -= config.learning_rate * (mom.mb[l].array() / c1) /
                                         ((mom.vb[l].array() / c2).sqrt() + config.epsilon);
            }
        }
        const double loss = full_loss(net, x, y);
        if (!std::isfinite(loss)) throw TrainingError("train: loss diverged at epoch " + std::to_string(epoch + 1));
        rep.epoch_loss.push_back(loss);
    }
    net.metadata["epochs"] = std::to_string(config.epochs);
    net.metadata["batch_size"] = std::to_string(config.batch_size);
    net.metadata["samples"] = std::to_string(n);
    net.metadata["seed"] = std::to_string(config.seed);
    if (report) *report = std::move(rep);
    return net;
}

MLPNetwork train_with_selection(const Dataset& dataset, const TrainingConfig& config, int restarts,
                                std::span<const Trajectory> selection, SelectionReport* report) {
    if (restarts <= 0) throw DomainError("train_with_selection: restarts must be positive");
    SelectionReport rep;
    MLPNetwork best;
    double best_rmse = std::numeric_limits<double>::infinity();
    for (int r = 0; r < restarts; ++r) {
        TrainingConfig c = config;
        c.seed = config.seed + static_cast<std::uint64_t>(r);
        TrainingReport tr;
        MLPNetwork net = train(dataset, c, &tr);
        const double e = validate_rollouts(net, selection);
        rep.selection_rmse.push_back(e);
        if (e < best_rmse) {
            best_rmse = e;
            best = std::move(net);
            rep.chosen = r;
            rep.training = std::move(tr);
        }
    }
    if (report) *report = std::move(rep);
    return best;
}

namespace {

TrainingDataConfig protocol_data(const SurrogateProtocol& p, int trajectories, int days, std::uint64_t seed,
                                 double switch_probability) {
    TrainingDataConfig cfg;
    cfg.n_trajectories = trajectories;
    cfg.horizon_days = days;
    cfg.lag = p.lag;
    cfg.seed = seed;
    cfg.zr_switch_probability = switch_probability;
    return cfg;
}

}  // namespace

Dataset held_out_trajectories(const ManagementZone& zone, const WeatherTable& weather_pool,
                              const SurrogateProtocol& protocol) {
    return generate_training_data(zone, weather_pool,
                                  protocol_data(protocol, protocol.validation_trajectories,
                                                protocol.validation_days + protocol.lag, protocol.seed + 1000003, 0.0));
}

ZoneSurrogate train_zone_surrogate(const ManagementZone& zone, const WeatherTable& weather_pool,
                                   const SurrogateProtocol& protocol) {
    if (protocol.trajectories <= 0 || protocol.validation_trajectories <= 0 || protocol.validation_days <= 0)
        throw DomainError("train_zone_surrogate: trajectory counts and lengths must be positive");
    const TrainingDataConfig defaults;
    const Dataset data = generate_training_data(
        zone, weather_pool,
        protocol_data(protocol, protocol.trajectories, protocol.horizon_days, protocol.seed, defaults.zr_switch_probability));
    const Dataset selection = generate_training_data(
        zone, weather_pool,
        protocol_data(protocol, protocol.validation_trajectories, protocol.validation_days + protocol.lag,
                      protocol.seed + 500009, 0.0));
    TrainingConfig tc;
    tc.epochs = protocol.epochs;
    tc.seed = protocol.seed;
    ZoneSurrogate out;
    out.samples = data.features.size();
    out.net = train_with_selection(data, tc, protocol.restarts, selection.trajectories, &out.selection);
    out.net.metadata["zone"] = zone.id;
    out.rollout_rmse = validate_rollouts(out.net, held_out_trajectories(zone, weather_pool, protocol).trajectories);
    out.net.metadata["rollout_rmse"] = std::to_string(out.rollout_rmse);
    return out;
}

}  // namespace irrig
