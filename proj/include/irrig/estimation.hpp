/**
 * @file estimation.hpp
 * @brief Extended Kalman filter on the pressure-head state of one zone.
 *
 * The daily plant map F and the top-layer sensor h are both linearised by
 * forward differences. Observations are multiplied by observation_scale
 * before the update, so R is a variance in those scaled units.
 */

#pragma once

#include "irrig/field_model.hpp"

#include <Eigen/Dense>

#include <functional>

namespace irrig {

struct EKFState {
    Eigen::VectorXd x_hat;  ///< pressure head per node (m)
    Eigen::MatrixXd P;
};

struct EKFNoise {
    double q = 0.05;    ///< process variance per node (m2)
    double r = 19.25;   ///< observation variance in scaled units
    double p0 = 15.9;   ///< initial variance per node (m2)
    double observation_scale = 1000.0;

    void validate() const;
};

/// One-day state map x -> F(x) with the day's forcing bound in.
using StateMap = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
/// Scalar observation of a state.
using ObservationMap = std::function<double(const Eigen::VectorXd&)>;

/// x_hat = x0, P = p0 I.
EKFState ekf_init(const Eigen::VectorXd& x0, const EKFNoise& noise);

/// Column-wise forward differences: A(:, j) = (F(x + eps e_j) - F(x)) / eps.
Eigen::MatrixXd jacobian_fd(const StateMap& f, const Eigen::VectorXd& x, double eps);

/// x- = F(x+), P- = A P+ A^T + q I.
EKFState ekf_predict(const EKFState& state, const StateMap& f, const EKFNoise& noise, double eps = 1e-6);

/// Scalar update with innovation s (o - h(x-)), Joseph-form covariance.
EKFState ekf_update(const EKFState& prior, double observation, const ObservationMap& h, const EKFNoise& noise,
                    double eps = 1e-6);

/// Noise-free simulate_day of a zone under fixed forcing.
StateMap zone_state_map(const ManagementZone& zone, const DailyForcing& forcing);

/// Mean moisture over [0, sensing_depth] of a pressure-head state.
ObservationMap top_layer_map(const ManagementZone& zone, double sensing_depth = kSensingDepth);

}  // namespace irrig
