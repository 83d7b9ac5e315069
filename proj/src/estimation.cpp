/**
 * @file estimation.cpp
 * @brief Finite-difference extended Kalman filter.
 */

#include "irrig/estimation.hpp"

#include "irrig/error.hpp"

#include <cmath>

namespace irrig {

void EKFNoise::validate() const {
    if (!(q >= 0.0) || !(r > 0.0) || !(p0 > 0.0) || !(observation_scale > 0.0))
        throw DomainError("EKF noise: need q >= 0 and r, p0, observation_scale > 0");
}

EKFState ekf_init(const Eigen::VectorXd& x0, const EKFNoise& noise) {
    noise.validate();
    if (!x0.allFinite()) throw DomainError("ekf_init: non-finite state");
    return {x0, noise.p0 * Eigen::MatrixXd::Identity(x0.size(), x0.size())};
}

Eigen::MatrixXd jacobian_fd(const StateMap& f, const Eigen::VectorXd& x, double eps) {
    if (!(eps > 0.0)) throw DomainError("jacobian_fd: eps must be positive");
    const Eigen::VectorXd f0 = f(x);
    Eigen::MatrixXd a(f0.size(), x.size());
    Eigen::VectorXd xp = x;
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        xp(j) = x(j) + eps;
        const Eigen::VectorXd fj = f(xp);
        if (fj.size() != f0.size()) throw DimensionError("jacobian_fd: map changed its output size");
        a.col(j) = (fj - f0) / eps;
        xp(j) = x(j);
    }
    return a;
}

namespace {

void check_state(const EKFState& s) {
    if (s.P.rows() != s.x_hat.size() || s.P.cols() != s.x_hat.size())
        throw DimensionError("EKF: covariance does not match the state");
}

Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& p) { return 0.5 * (p + p.transpose()); }

}  // namespace

EKFState ekf_predict(const EKFState& state, const StateMap& f, const EKFNoise& noise, double eps) {
    check_state(state);
    noise.validate();
    const Eigen::MatrixXd a = jacobian_fd(f, state.x_hat, eps);
    EKFState prior;
    prior.x_hat = f(state.x_hat);
    if (prior.x_hat.size() != state.x_hat.size()) throw DimensionError("ekf_predict: map changed the state size");
    prior.P = symmetrize(a * state.P * a.transpose() +
                         noise.q * Eigen::MatrixXd::Identity(state.P.rows(), state.P.cols()));
    return prior;
}

EKFState ekf_update(const EKFState& prior, double observation, const ObservationMap& h, const EKFNoise& noise,
                    double eps) {
    check_state(prior);
    noise.validate();
    if (!std::isfinite(observation)) throw DomainError("ekf_update: non-finite observation");
    const double s = noise.observation_scale;
    const double h0 = h(prior.x_hat);
    // Row Jacobian of the scaled observation.
    Eigen::RowVectorXd c(prior.x_hat.size());
    Eigen::VectorXd xp = prior.x_hat;
    for (Eigen::Index j = 0; j < xp.size(); ++j) {
        xp(j) += eps;
        c(j) = s * (h(xp) - h0) / eps;
        xp(j) = prior.x_hat(j);
    }
    const Eigen::VectorXd pct = prior.P * c.transpose();
    const double innovation_var = c.dot(pct) + noise.r;
    if (!(innovation_var > 0.0)) throw SolverError("ekf_update: singular innovation variance");
    const Eigen::VectorXd gain = pct / innovation_var;
    EKFState post;
    post.x_hat = prior.x_hat + gain * (s * (observation - h0));
    const Eigen::MatrixXd ikc = Eigen::MatrixXd::Identity(prior.P.rows(), prior.P.cols()) - gain * c;
    post.P = symmetrize(ikc * prior.P * ikc.transpose() + noise.r * gain * gain.transpose());
    return post;
}

StateMap zone_state_map(const ManagementZone& zone, const DailyForcing& forcing) {
    zone.validate();
    forcing.validate();
    return [zone, forcing](const Eigen::VectorXd& x) {
        ColumnState st;
        st.psi.assign(x.data(), x.data() + x.size());
        const DayResult r = simulate_day(zone, st, forcing, 0.0, 0);
        return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(r.state.psi.data(),
                                                                 static_cast<Eigen::Index>(r.state.psi.size())));
    };
}

ObservationMap top_layer_map(const ManagementZone& zone, double sensing_depth) {
    const std::vector<double> w = depth_average_weights(zone.grid, 0.0, sensing_depth);
    return [w, phi = zone.phi](const Eigen::VectorXd& x) {
        if (static_cast<std::size_t>(x.size()) != w.size()) throw DimensionError("top_layer_map: wrong state size");
        double o = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i)
            if (w[i] != 0.0) o += w[i] * water_retention(x(static_cast<Eigen::Index>(i)), phi);
        return o;
    };
}

}  // namespace irrig
