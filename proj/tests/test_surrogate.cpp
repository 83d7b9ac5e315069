/**
 * @file test_surrogate.cpp
 * @brief Scalers, the ReLU network, training, rollouts and the network file format.
 */

#include <doctest.h>

#include "irrig/error.hpp"
#include "irrig/scenario.hpp"
#include "irrig/surrogate.hpp"

#include <cmath>
#include <random>
#include <sstream>

using namespace irrig;

namespace {

/// Dataset whose next moisture is an affine map of the features, as a
/// learnable target with a known answer.
Dataset affine_dataset(int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> th(0.1, 0.35), kc(0.0, 1.2), et(0.0, 0.009), w(0.0, 0.06);
    Dataset ds;
    for (int i = 0; i < n; ++i) {
        std::vector<double> f;
        for (int d = 0; d < 2; ++d) f.insert(f.end(), {th(rng), kc(rng), et(rng), w(rng), d ? 0.5 : 1.0});
        ds.features.push_back(f);
        ds.targets.push_back(0.9 * f[5] + 0.05 * f[0] - 2.0 * f[6] * f[7] + 1.5 * f[8]);
    }
    return ds;
}

}  // namespace

TEST_CASE("min-max scaler") {
    const auto s = fit_scaler({{1.0, 5.0, 2.0}, {3.0, 5.0, -2.0}});
    CHECK(s.min == std::vector<double>{1.0, 5.0, -2.0});
    CHECK(s.range == std::vector<double>{2.0, 1.0, 4.0});
    CHECK(s.degenerate == std::vector<bool>{false, true, false});
    const std::vector<double> v{2.0, 5.0, 1.0};
    const auto sv = s.scale(v);
    CHECK(sv == std::vector<double>{0.5, 0.0, 0.75});
    CHECK(s.unscale(sv) == v);
    CHECK_THROWS(fit_scaler({}));
}

TEST_CASE("network structure and forward pass") {
    const auto net = make_network(1, {40, 20}, 3);
    CHECK(net.num_inputs() == 10);
    CHECK(net.layer_sizes == std::vector<int>{10, 40, 20, 1});
    CHECK(net.num_hidden_neurons() == 60);
    // One hidden neuron by hand: relu(2 x0 - x1 + 0.5), output 3 h - 1.
    MLPNetwork tiny = make_network(0, {1}, 1);
    tiny.weights[0] = Eigen::MatrixXd::Zero(1, 5);
    tiny.weights[0](0, 0) = 2.0;
    tiny.weights[0](0, 1) = -1.0;
    tiny.biases[0] = Eigen::VectorXd::Constant(1, 0.5);
    tiny.weights[1] = Eigen::MatrixXd::Constant(1, 1, 3.0);
    tiny.biases[1] = Eigen::VectorXd::Constant(1, -1.0);
    const std::vector<double> a{1.0, 0.5, 0.0, 0.0, 0.0}, b{0.0, 1.0, 0.0, 0.0, 0.0};
    CHECK(tiny.forward_scaled(a) == doctest::Approx(5.0));
    CHECK(tiny.forward_scaled(b) == doctest::Approx(-1.0));
    CHECK_THROWS_AS(predict_one_step(net, std::vector<double>(9, 0.0)), DimensionError);
}

TEST_CASE("training reduces the loss and is deterministic") {
    const auto ds = affine_dataset(2000, 5);
    TrainingConfig tc;
    tc.epochs = 10;
    tc.learning_rate = 1e-3;
    TrainingReport rep;
    const auto net = train(ds, tc, &rep);
    REQUIRE(rep.epoch_loss.size() == 10);
    CHECK(rep.epoch_loss.back() < 0.1 * rep.initial_loss);
    const auto again = train(ds, tc);
    CHECK(again.weights[0] == net.weights[0]);
    std::vector<double> pred(ds.targets.size());
    for (std::size_t i = 0; i < pred.size(); ++i) pred[i] = predict_one_step(net, ds.features[i]);
    CHECK(rmse(pred, ds.targets) < 0.01);
    tc.learning_rate = 0.0;
    CHECK_THROWS_AS(train(ds, tc), DomainError);
}

TEST_CASE("rollout feeds predictions back") {
    auto net = make_network(1, {8}, 2);
    Trajectory hist;
    hist.theta_rz = {0.25, 0.24};
    hist.inputs = {{1.0, 0.005, 0.0, 0.5}};
    const std::vector<DayInputs> forcing{{1.0, 0.005, 0.02, 0.5}, {1.0, 0.004, 0.0, 0.5}};
    const auto r = rollout(net, hist, forcing);
    REQUIRE(r.size() == 2);
    const double first = predict_one_step(net, std::vector<double>{0.25, 1.0, 0.005, 0.0, 0.5, 0.24, 1.0, 0.005, 0.02, 0.5});
    CHECK(r[0] == first);
    const double second =
        predict_one_step(net, std::vector<double>{0.24, 1.0, 0.005, 0.02, 0.5, first, 1.0, 0.004, 0.0, 0.5});
    CHECK(r[1] == second);
    Trajectory short_hist;
    short_hist.theta_rz = {0.25};
    CHECK_THROWS_AS(rollout(net, short_hist, forcing), DimensionError);
}

TEST_CASE("training data from the plant") {
    const auto zone = preset_zone("MZ2");
    const auto pool = synthetic_weather("2023-05-05", 60, 4);
    TrainingDataConfig cfg;
    cfg.n_trajectories = 3;
    cfg.horizon_days = 12;
    const auto ds = generate_training_data(zone, pool, cfg);
    REQUIRE(ds.trajectories.size() == 3);
    CHECK(ds.features.size() == 3 * 11);
    for (const auto& t : ds.trajectories) {
        CHECK(t.theta_rz.size() == 13);
        for (double th : t.theta_rz) CHECK((th > zone.phi.theta_r && th <= zone.phi.theta_s));
    }
    const auto& t0 = ds.trajectories[0];
    CHECK(ds.features[0] == trajectory_features(t0, 1, 1));
    CHECK(ds.targets[0] == t0.theta_rz[2]);
    const auto again = generate_training_data(zone, pool, cfg);
    CHECK(again.targets == ds.targets);
}

TEST_CASE("restart selection keeps the best rollout") {
    const auto zone = preset_zone("MZ1");
    const auto pool = synthetic_weather("2023-05-05", 60, 4);
    TrainingDataConfig cfg;
    cfg.n_trajectories = 6;
    cfg.horizon_days = 15;
    const auto ds = generate_training_data(zone, pool, cfg);
    TrainingConfig tc;
    tc.epochs = 2;
    SelectionReport rep;
    const auto net = train_with_selection(ds, tc, 3, ds.trajectories, &rep);
    REQUIRE(rep.selection_rmse.size() == 3);
    for (double e : rep.selection_rmse) CHECK(rep.selection_rmse[rep.chosen] <= e);
    CHECK(validate_rollouts(net, ds.trajectories) == rep.selection_rmse[rep.chosen]);
    CHECK_THROWS_AS(train_with_selection(ds, tc, 0, ds.trajectories), DomainError);
}

TEST_CASE("network file round trip is exact") {
    auto net = make_network(1, {6, 3}, 9);
    net.input_scaler.min[2] = 0.123456789012345678;
    net.metadata["zone"] = "MZ3";
    std::stringstream ss;
    save_network(net, ss);
    const auto back = load_network(ss);
    CHECK(back.lag == net.lag);
    CHECK(back.layer_sizes == net.layer_sizes);
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        CHECK(back.weights[l] == net.weights[l]);
        CHECK(back.biases[l] == net.biases[l]);
    }
    CHECK(back.input_scaler.min == net.input_scaler.min);
    CHECK(back.metadata.at("zone") == "MZ3");
    std::stringstream bad("{\"format\": \"something-else\"}");
    CHECK_THROWS_AS(load_network(bad), ValidationError);
}
