/**
 * @file mlp.cpp
 * @brief Scalers, forward pass and recursive rollouts.
 */

#include "irrig/surrogate.hpp"

#include "irrig/error.hpp"

#include <cmath>
#include <limits>
#include <random>

namespace irrig {

std::vector<double> MinMaxScaler::scale(std::span<const double> v) const {
    if (v.size() != size()) throw DimensionError("scaler: wrong vector length");
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = scale(i, v[i]);
    return out;
}

std::vector<double> MinMaxScaler::unscale(std::span<const double> s) const {
    if (s.size() != size()) throw DimensionError("scaler: wrong vector length");
    std::vector<double> out(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) out[i] = unscale(i, s[i]);
    return out;
}

void MinMaxScaler::validate() const {
    if (range.size() != min.size() || degenerate.size() != min.size())
        throw DimensionError("scaler: inconsistent field lengths");
    for (std::size_t i = 0; i < min.size(); ++i) {
        if (!std::isfinite(min[i]) || !std::isfinite(range[i]) || !(range[i] > 0.0))
            throw ValidationError("scaler: ranges must be finite and positive");
    }
}

MinMaxScaler fit_scaler(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) throw DomainError("fit_scaler: empty dataset");
    const std::size_t d = rows.front().size();
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> lo(d, inf), hi(d, -inf);
    for (const auto& r : rows) {
        if (r.size() != d) throw DimensionError("fit_scaler: ragged rows");
        for (std::size_t i = 0; i < d; ++i) {
            lo[i] = std::min(lo[i], r[i]);
            hi[i] = std::max(hi[i], r[i]);
        }
    }
    MinMaxScaler s;
    s.min = lo;
    s.range.resize(d);
    s.degenerate.resize(d);
    for (std::size_t i = 0; i < d; ++i) {
        s.degenerate[i] = !(hi[i] > lo[i]);
        s.range[i] = s.degenerate[i] ? 1.0 : hi[i] - lo[i];
    }
    return s;
}

int MLPNetwork::num_hidden_neurons() const {
    int total = 0;
    for (std::size_t l = 1; l + 1 < layer_sizes.size(); ++l) total += layer_sizes[l];
    return total;
}

void MLPNetwork::validate() const {
    if (lag < 0) throw ValidationError("network: negative lag");
    if (layer_sizes.size() < 2) throw ValidationError("network: needs at least input and output layers");
    if (layer_sizes.front() != feature_count(lag)) throw ValidationError("network: input size does not match lag");
    if (layer_sizes.back() != 1) throw ValidationError("network: output layer must have one neuron");
    if (weights.size() != layer_sizes.size() - 1 || biases.size() != weights.size())
        throw ValidationError("network: layer count mismatch");
    for (std::size_t l = 0; l < weights.size(); ++l) {
        if (weights[l].rows() != layer_sizes[l + 1] || weights[l].cols() != layer_sizes[l] ||
            biases[l].size() != layer_sizes[l + 1])
            throw ValidationError("network: weight shapes do not chain");
        if (!weights[l].allFinite() || !biases[l].allFinite()) throw ValidationError("network: non-finite weights");
    }
    input_scaler.validate();
    output_scaler.validate();
    if (static_cast<int>(input_scaler.size()) != layer_sizes.front() || output_scaler.size() != 1)
        throw ValidationError("network: scaler sizes do not match layers");
}

double MLPNetwork::forward_scaled(std::span<const double> scaled) const {
    if (static_cast<int>(scaled.size()) != num_inputs()) throw DimensionError("network: wrong input length");
    Eigen::VectorXd a = Eigen::Map<const Eigen::VectorXd>(scaled.data(), static_cast<Eigen::Index>(scaled.size()));
    for (std::size_t l = 0; l < weights.size(); ++l) {
        a = weights[l] * a + biases[l];
        if (l + 1 < weights.size()) a = a.cwiseMax(0.0);
    }
    return a(0);
}

MLPNetwork make_network(int lag, const std::vector<int>& hidden, std::uint64_t seed) {
    if (lag < 0) throw DomainError("make_network: negative lag");
    MLPNetwork net;
    net.lag = lag;
    net.layer_sizes.push_back(feature_count(lag));
    for (int h : hidden) {
        if (h <= 0) throw DomainError("make_network: hidden sizes must be positive");
        net.layer_sizes.push_back(h);
    }
    net.layer_sizes.push_back(1);
    std::mt19937_64 rng(seed);
    for (std::size_t l = 0; l + 1 < net.layer_sizes.size(); ++l) {
        const int fan_in = net.layer_sizes[l];
        const double limit = std::sqrt(6.0 / fan_in);
        std::uniform_real_distribution<double> u(-limit, limit);
        Eigen::MatrixXd w(net.layer_sizes[l + 1], fan_in);
        for (Eigen::Index i = 0; i < w.rows(); ++i)
            for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = u(rng);
        net.weights.push_back(std::move(w));
        net.biases.push_back(Eigen::VectorXd::Zero(net.layer_sizes[l + 1]));
    }
    const auto n0 = static_cast<std::size_t>(net.layer_sizes.front());
    net.input_scaler = {std::vector<double>(n0, 0.0), std::vector<double>(n0, 1.0), std::vector<bool>(n0, false)};
    net.output_scaler = {{0.0}, {1.0}, {false}};
    return net;
}

double predict_one_step(const MLPNetwork& net, std::span<const double> raw_features) {
    if (static_cast<int>(raw_features.size()) != net.num_inputs())
        throw DimensionError("predict_one_step: expected " + std::to_string(net.num_inputs()) + " features");
    const auto scaled = net.input_scaler.scale(raw_features);
    return net.output_scaler.unscale(0, net.forward_scaled(scaled));
}

std::vector<double> trajectory_features(const Trajectory& t, int lag, std::size_t k) {
    if (k < static_cast<std::size_t>(lag) || k >= t.inputs.size() || k >= t.theta_rz.size())
        throw DimensionError("trajectory_features: day outside trajectory");
    std::vector<double> f;
    f.reserve(static_cast<std::size_t>(feature_count(lag)));
    for (std::size_t d = k - static_cast<std::size_t>(lag); d <= k; ++d) {
        const auto& in = t.inputs[d];
        f.insert(f.end(), {t.theta_rz[d], in.kc, in.et0, in.water_input, in.zr});
    }
    return f;
}

std::vector<double> rollout(const MLPNetwork& net, const Trajectory& history, std::span<const DayInputs> forcing) {
    const auto lag = static_cast<std::size_t>(net.lag);
    if (history.theta_rz.size() < lag + 1 || history.inputs.size() < lag)
        throw DimensionError("rollout: history shorter than the lag");
    // Work on a trajectory whose last lag days and current moisture come from history.
    Trajectory t;
    t.theta_rz.assign(history.theta_rz.end() - static_cast<long>(lag + 1), history.theta_rz.end());
    t.inputs.assign(history.inputs.begin() + static_cast<long>(history.theta_rz.size() - lag - 1),
                    history.inputs.begin() + static_cast<long>(history.theta_rz.size() - 1));
    if (t.inputs.size() != lag) throw DimensionError("rollout: history inputs and moisture are misaligned");
    std::vector<double> out;
    out.reserve(forcing.size());
    for (const auto& day : forcing) {
        t.inputs.push_back(day);
        const double next = predict_one_step(net, trajectory_features(t, net.lag, t.inputs.size() - 1));
        t.theta_rz.push_back(next);
        out.push_back(next);
    }
    return out;
}

double rmse(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DimensionError("rmse: length mismatch");
    if (a.empty()) throw DomainError("rmse: empty series");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(acc / static_cast<double>(a.size()));
}

double validate_rollouts(const MLPNetwork& net, std::span<const Trajectory> reference) {
    if (reference.empty()) throw DomainError("validate_rollouts: no reference trajectories");
    const auto lag = static_cast<std::size_t>(net.lag);
    std::vector<double> pred, truth;
    for (const auto& t : reference) {
        if (t.theta_rz.size() != t.inputs.size() + 1 || t.inputs.size() <= lag)
            throw DimensionError("validate_rollouts: trajectory too short");
        Trajectory head;
        head.theta_rz.assign(t.theta_rz.begin(), t.theta_rz.begin() + static_cast<long>(lag + 1));
        head.inputs.assign(t.inputs.begin(), t.inputs.begin() + static_cast<long>(lag));
        const std::span<const DayInputs> forcing(t.inputs.data() + lag, t.inputs.size() - lag);
        const auto p = rollout(net, head, forcing);
        pred.insert(pred.end(), p.begin(), p.end());
        truth.insert(truth.end(), t.theta_rz.begin() + static_cast<long>(lag + 1), t.theta_rz.end());
    }
    return rmse(pred, truth);
}

}  // namespace irrig
