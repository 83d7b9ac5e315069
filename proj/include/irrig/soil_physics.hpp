/**
 * @file soil_physics.hpp
 * @brief 1D Richards equation for a single soil column.
 *
 * Pressure-head form with depth d measured downward from the surface:
 *
 *   C(psi) dpsi/dt = d/dd [ K(psi) (dpsi/dd - 1) ] - S(psi)
 *
 * so the downward Darcy flux is q = K (1 - dpsi/dd) and a hydrostatic
 * column satisfies psi(d) = psi_surface + d.
 *
 * Constitutive relations are van Genuchten-Mualem with m = 1 - 1/n.
 * Spatial discretization is vertex-centred finite volumes (one control
 * volume per node, half cells at the surface and bottom) with arithmetic
 * mean internodal conductivity. Time integration is implicit Euler in
 * mixed form, which conserves water to the Newton tolerance.
 */

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace irrig {

/// Hydraulic parameter vector [Ks, theta_s, theta_r, alpha, n] of one zone.
struct VanGenuchtenParams {
    double ks = 0.0;       ///< saturated conductivity (m/s)
    double theta_s = 0.0;  ///< saturated moisture (m3/m3)
    double theta_r = 0.0;  ///< residual moisture (m3/m3)
    double alpha = 0.0;    ///< retention shape (1/m)
    double n = 0.0;        ///< retention shape (-), > 1

    double m() const { return 1.0 - 1.0 / n; }
    void validate() const;
};

/// Node positions of a soil column; depth 0 is the surface.
struct SoilGrid {
    std::vector<double> node_depths;

    std::size_t size() const { return node_depths.size(); }
    double depth() const { return node_depths.back(); }
    void validate() const;

    /// Uniform spacing in [0, split] and in [split, depth] with a shared node.
    static SoilGrid two_segment(double depth, double split, int top_nodes, int bottom_nodes);
    /// 1.0 m column, 21 nodes over the top 0.5 m, 11 over the bottom 0.5 m (31 total).
    static SoilGrid standard();

    /// Length of the control volume owned by each node.
    std::vector<double> cell_lengths() const;
    /// Length of the overlap of each control volume with [0, zr].
    std::vector<double> root_zone_overlap(double zr) const;
};

/// Pressure head (m) at every node.
struct ColumnState {
    std::vector<double> psi;
};

/// Breakpoints of the piecewise-linear Feddes stress factor (m).
struct FeddesThresholds {
    double psi_anaerobic = -0.1;
    double psi_opt_high = -1.0;
    double psi_opt_low = -5.0;
    double psi_wilting = -150.0;

    void validate() const;
};

double effective_saturation(double psi, const VanGenuchtenParams& phi);
double water_retention(double psi, const VanGenuchtenParams& phi);
/// Pressure head giving moisture theta_v; requires theta_r < theta_v < theta_s.
double inverse_retention(double theta_v, const VanGenuchtenParams& phi);
/// d theta / d psi (1/m); zero on the saturated branch.
double capillary_capacity(double psi, const VanGenuchtenParams& phi);
double hydraulic_conductivity(double psi, const VanGenuchtenParams& phi);
/// d K / d psi; finite on psi < 0, zero on the saturated branch.
double hydraulic_conductivity_derivative(double psi, const VanGenuchtenParams& phi);

double feddes_stress(double psi, const FeddesThresholds& thresholds);
double feddes_stress_derivative(double psi, const FeddesThresholds& thresholds);

/// Root water extraction (1/s) at depth z: rho(psi) Kc ET0 / zr inside the root zone.
double root_uptake_sink(double psi, double kc, double et0, double zr, double z,
                        const FeddesThresholds& thresholds);

enum class BottomBoundary {
    FreeDrainage,  ///< unit total-head gradient, outflow K(psi_bottom)
    NoFlux,
};

/// Everything that parameterizes one column besides its state and forcing.
struct ColumnModel {
    VanGenuchtenParams phi;
    SoilGrid grid;
    FeddesThresholds thresholds;
    BottomBoundary bottom = BottomBoundary::FreeDrainage;
    /// Storage per metre of positive head (1/m); keeps saturated nodes well posed.
    double specific_storage = 1e-6;

    void validate() const;
};

/// Forcing held constant over a step. Rates are in m/s.
struct SurfaceForcing {
    double water_input = 0.0;  ///< irrigation + rain reaching the surface
    double evaporation = 0.0;  ///< surface evaporation EV
    double kc = 0.0;           ///< crop coefficient
    double et0 = 0.0;          ///< reference evapotranspiration
    double zr = 0.5;           ///< rooting depth (m)
};

/// Water volumes per unit area (m) crossing the column boundaries.
struct WaterBudget {
    double infiltration = 0.0;
    double runoff = 0.0;
    double drainage = 0.0;
    double uptake = 0.0;
    double evaporation = 0.0;

    WaterBudget& operator+=(const WaterBudget& other);
    /// infiltration - drainage - uptake - evaporation
    double net() const { return infiltration - drainage - uptake - evaporation; }
};

/// Water stored in the column (m): sum of cell length times theta plus specific storage.
double column_storage(const ColumnState& state, const ColumnModel& model);

/// Semi-discrete right-hand side dpsi/dt (m/s) of every node with the surface
/// flux boundary. Saturated nodes use the specific storage as capacity.
std::vector<double> richards_rhs(const ColumnState& state, const SurfaceForcing& forcing,
                                 const ColumnModel& model);

/// Capacity C + Ss used to turn storage change rates into dpsi/dt.
std::vector<double> storage_capacity(const ColumnState& state, const ColumnModel& model);
/// Net boundary flux minus total sink (m/s) for a state under a forcing.
double net_boundary_flux(const ColumnState& state, const SurfaceForcing& forcing,
                         const ColumnModel& model);

struct StepOptions {
    double residual_tolerance = 1e-11;  ///< max-norm of the water-volume residual (m)
    int max_newton_iterations = 30;
    int max_halvings = 4;               ///< dt may shrink to dt / 2^max_halvings
};

struct StepReport {
    WaterBudget budget;
    int newton_iterations = 0;
    int substeps = 0;
    double residual = 0.0;
};

/// One implicit Euler step of length dt (s). Falls back to halved substeps
/// on Newton failure and throws StepFailure once the halving limit is hit.
ColumnState step(const ColumnState& state, const SurfaceForcing& forcing, double dt,
                 const ColumnModel& model, StepReport* report = nullptr,
                 const StepOptions& options = {});

}  // namespace irrig
