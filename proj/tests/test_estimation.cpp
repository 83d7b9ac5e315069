/**
 * @file test_estimation.cpp
 * @brief Extended Kalman filter on linear maps and on the soil column.
 */

#include <doctest.h>

#include "irrig/error.hpp"
#include "irrig/estimation.hpp"
#include "irrig/scenario.hpp"

#include <cmath>

using namespace irrig;

TEST_CASE("finite-difference Jacobian of a linear map") {
    Eigen::MatrixXd a(2, 2);
    a << 0.9, 0.1, -0.2, 0.7;
    const StateMap f = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd { return a * x; };
    const auto j = jacobian_fd(f, Eigen::Vector2d(1.0, -2.0), 1e-6);
    CHECK((j - a).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("on a linear system the filter equals the Kalman filter") {
    EKFNoise noise;
    noise.q = 0.01;
    noise.r = 0.04;
    noise.p0 = 1.0;
    noise.observation_scale = 1.0;
    Eigen::MatrixXd a(2, 2);
    a << 1.0, 0.1, 0.0, 0.95;
    const Eigen::RowVector2d c(1.0, 0.5);
    const StateMap f = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd { return a * x; };
    const ObservationMap h = [&](const Eigen::VectorXd& x) { return c.dot(x); };

    EKFState ekf = ekf_init(Eigen::Vector2d(0.5, -0.3), noise);
    Eigen::Vector2d x = ekf.x_hat;
    Eigen::Matrix2d p = Eigen::Matrix2d::Identity();
    const double obs[3] = {0.4, 0.1, -0.2};
    for (double o : obs) {
        ekf = ekf_update(ekf, o, h, noise);
        const double s = (c * p * c.transpose())(0, 0) + noise.r;
        const Eigen::Vector2d k = p * c.transpose() / s;
        x += k * (o - c.dot(x));
        p = (Eigen::Matrix2d::Identity() - k * c) * p;
        CHECK((ekf.x_hat - x).cwiseAbs().maxCoeff() <= 1e-7);
        CHECK((ekf.P - p).cwiseAbs().maxCoeff() <= 1e-7);
        ekf = ekf_predict(ekf, f, noise);
        x = a * x;
        p = a * p * a.transpose() + noise.q * Eigen::Matrix2d::Identity();
        CHECK((ekf.P - ekf.P.transpose()).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("noise settings are validated") {
    EKFNoise n;
    n.r = 0.0;
    CHECK_THROWS_AS(n.validate(), DomainError);
}

TEST_CASE("a uniform head bias is removed by daily top-layer updates") {
    const auto zone = preset_zone("MZ2");
    const DailyForcing forcing{0.0, 0.0, 0.004, 0.8, 0.5};
    const auto truth0 = uniform_state(zone, 0.33);
    Eigen::VectorXd truth = Eigen::Map<const Eigen::VectorXd>(truth0.psi.data(), truth0.psi.size());
    EKFState est = ekf_init(truth.array() + 0.5, EKFNoise{});
    const auto f = zone_state_map(zone, forcing);
    const auto h = top_layer_map(zone);
    const double initial_error = std::abs(h(est.x_hat) - h(truth));
    for (int day = 0; day < 10; ++day) {
        est = ekf_update(est, h(truth), h, EKFNoise{});
        est = ekf_predict(est, f, EKFNoise{});
        truth = f(truth);
    }
    const double final_error = std::abs(h(est.x_hat) - h(truth));
    CHECK(initial_error > 0.01);
    CHECK(final_error <= 0.01);
}
