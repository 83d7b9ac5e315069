/**
 * @file test_encoding.cpp
 * @brief Interval bounds and the big-M encoding of ReLU networks.
 */

#include <doctest.h>

#include "irrig/error.hpp"
#include "irrig/neural_encoding.hpp"

#include <random>

using namespace irrig;

namespace {

MLPNetwork random_network(int lag, std::vector<int> hidden, std::uint64_t seed) {
    auto net = make_network(lag, hidden, seed);
    std::mt19937_64 rng(seed + 17);
    std::normal_distribution<double> nd(0.0, 0.3);
    for (auto& b : net.biases)
        for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = nd(rng);
    return net;
}

BoxBounds unit_box(int n) { return {std::vector<double>(n, 0.0), std::vector<double>(n, 1.0)}; }

}  // namespace

TEST_CASE("affine interval image") {
    Eigen::MatrixXd w(2, 2);
    w << 1.0, -2.0, 0.5, 0.0;
    Eigen::VectorXd b(2);
    b << 1.0, -1.0;
    const auto out = affine_bounds(w, b, {{0.0, -1.0}, {2.0, 1.0}});
    CHECK(out.lower == std::vector<double>{-1.0, -1.0});
    CHECK(out.upper == std::vector<double>{5.0, 0.0});
    CHECK_THROWS_AS(affine_bounds(w, b, {{0.0}, {1.0}}), DimensionError);
}

TEST_CASE("propagated bounds contain sampled pre-activations") {
    const auto net = random_network(1, {12, 6}, 4);
    const auto bounds = propagate_bounds(net, unit_box(10));
    REQUIRE(bounds.size() == 3);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int s = 0; s < 200; ++s) {
        Eigen::VectorXd a(10);
        for (auto& v : a) v = u(rng);
        for (std::size_t l = 0; l < net.weights.size(); ++l) {
            Eigen::VectorXd pre = net.weights[l] * a + net.biases[l];
            for (Eigen::Index i = 0; i < pre.size(); ++i) {
                CHECK(pre(i) >= bounds[l].lower[i] - 1e-12);
                CHECK(pre(i) <= bounds[l].upper[i] + 1e-12);
            }
            a = pre.cwiseMax(0.0);
        }
    }
}

TEST_CASE("encoding is exact on random networks") {
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
        const auto net = random_network(1, {20, 10}, seed);
        CHECK(verify_encoding(net, unit_box(10), 200, seed) <= 1e-6);
    }
}

TEST_CASE("encoding agrees with branch-and-bound extremes") {
    const auto net = random_network(0, {4, 3}, 8);
    VerifyOptions opt;
    opt.solver_samples = 3;
    CHECK(verify_encoding(net, unit_box(5), 10, 2, opt) <= 1e-6);
}

TEST_CASE("stable neurons are eliminated and unstable ones get four rows") {
    const auto net = random_network(1, {16, 8}, 11);
    const auto enc = encode_network(net, unit_box(10));
    const auto& e = enc.network;
    CHECK(e.unstable + e.stable_active + e.stable_inactive == 24);
    CHECK(e.binaries.size() == e.unstable);
    for (const auto& layer : e.layers)
        for (const auto& n : layer)
            if (n.e >= 0) CHECK(n.rows.size() == 4);
    EncodingOptions keep;
    keep.eliminate_stable = false;
    const auto full = encode_network(net, unit_box(10), keep);
    CHECK(full.network.binaries.size() == 24);
}

TEST_CASE("a shrunk big-M is detected") {
    const auto net = random_network(1, {20, 10}, 3);
    VerifyOptions opt;
    opt.encoding.big_m_scale = 0.3;
    bool caught = false;
    try {
        caught = verify_encoding(net, unit_box(10), 200, 1, opt) > 1e-6;
    } catch (const EncodingError&) {
        caught = true;
    }
    CHECK(caught);
}

TEST_CASE("encoded output for fixed inputs") {
    const auto net = random_network(0, {6}, 21);
    const auto enc = encode_network(net, unit_box(5));
    const std::vector<double> x{0.1, 0.9, 0.4, 0.0, 1.0};
    CHECK(solve_encoded_output(enc, x) == doctest::Approx(predict_one_step(net, x)).epsilon(1e-9));
}
