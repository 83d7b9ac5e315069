/**
 * @file field_model.hpp
 * @brief Multi-zone field plant: one Richards column per management zone.
 */

#pragma once

#include "irrig/soil_physics.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace irrig {

inline constexpr double kSecondsPerDay = 86400.0;
inline constexpr int kStepsPerDay = 48;
inline constexpr double kSensingDepth = 0.25;
/// Pressure head defining the anaerobic moisture point (m).
inline constexpr double kAnaerobicHead = -0.1;

struct ManagementZone {
    std::string id;
    VanGenuchtenParams phi;
    SoilGrid grid = SoilGrid::standard();
    double theta_fc = 0.0;  ///< field capacity (m3/m3)
    double theta_wp = 0.0;  ///< wilting point (m3/m3)
    double u_min = 0.0;     ///< smallest irrigation event (m/day)
    double u_max = 0.0;     ///< largest irrigation event (m/day)
    FeddesThresholds thresholds;
    BottomBoundary bottom = BottomBoundary::FreeDrainage;
    /// Surface evaporation as a fraction of ET0; the rest of the demand goes through roots.
    double evaporation_fraction = 0.0;

    void validate() const;
    ColumnModel column_model() const;
};

/// Pressure-head breakpoints matching moisture levels: anaerobic at psi = -0.1 m,
/// optimal band [theta_lower, theta_fc], wilting at theta_wp.
FeddesThresholds thresholds_from_moisture(const VanGenuchtenParams& phi, double theta_fc,
                                          double theta_lower, double theta_wp);

/// One day of inputs. Depths are m/day.
struct DailyForcing {
    double u_irr = 0.0;
    double rain = 0.0;
    double et0 = 0.0;
    double kc = 0.0;
    double zr = 0.5;

    void validate() const;
    double water_input() const { return u_irr + rain; }
};

struct ZoneOutputs {
    std::vector<double> theta_profile;
    double theta_rz = 0.0;
};

struct DayResult {
    ColumnState state;
    ZoneOutputs outputs;
    WaterBudget budget;
};

std::vector<double> theta_profile(const ColumnState& state, const VanGenuchtenParams& phi);

/// Weights w with w . profile equal to the mean of the piecewise-linear
/// profile over [top, bottom].
std::vector<double> depth_average_weights(const SoilGrid& grid, double top, double bottom);
double depth_average(std::span<const double> profile, const SoilGrid& grid, double top, double bottom);

/// 0.4 / 0.3 / 0.2 / 0.1 weights on the quarter averages of [0, zr].
std::vector<double> root_zone_weights(const SoilGrid& grid, double zr);
double root_zone_moisture(std::span<const double> theta_profile, const SoilGrid& grid, double zr);

/// Advances one day in kStepsPerDay implicit steps, then adds N(0, sd^2) to psi.
DayResult simulate_day(const ManagementZone& zone, const ColumnState& state,
                       const DailyForcing& forcing, double process_noise_sd, std::uint64_t seed);

/// Top-layer sensor: mean moisture over [0, sensing_depth] plus N(0, sd^2).
double observe_top_layer(std::span<const double> theta_profile, const SoilGrid& grid,
                         double sensing_depth, double noise_sd, std::uint64_t seed);

/// Uniform column at moisture theta.
ColumnState uniform_state(const ManagementZone& zone, double theta);

}  // namespace irrig
