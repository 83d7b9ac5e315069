/**
 * @file soil_physics.cpp
 * @brief van Genuchten-Mualem relations and the implicit Richards stepper.
 */

#include "irrig/soil_physics.hpp"

#include "irrig/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace irrig {

void VanGenuchtenParams::validate() const {
    if (!(ks > 0.0)) throw DomainError("van Genuchten: Ks must be positive");
    if (!(theta_r >= 0.0 && theta_r < theta_s && theta_s <= 1.0))
        throw DomainError("van Genuchten: need 0 <= theta_r < theta_s <= 1");
    if (!(alpha > 0.0)) throw DomainError("van Genuchten: alpha must be positive");
    if (!(n > 1.0)) throw DomainError("van Genuchten: n must exceed 1");
}

void SoilGrid::validate() const {
    if (node_depths.size() < 3) throw DomainError("soil grid needs at least 3 nodes");
    if (node_depths.front() != 0.0) throw DomainError("soil grid must start at the surface");
    for (std::size_t i = 1; i < node_depths.size(); ++i) {
        if (!(node_depths[i] > node_depths[i - 1]))
            throw DomainError("soil grid depths must be strictly increasing");
    }
}

SoilGrid SoilGrid::two_segment(double depth, double split, int top_nodes, int bottom_nodes) {
    if (!(split > 0.0 && split < depth) || top_nodes < 2 || bottom_nodes < 2)
        throw DomainError("two_segment grid: invalid layout");
    SoilGrid grid;
    const double dz_top = split / (top_nodes - 1);
    for (int i = 0; i < top_nodes; ++i) grid.node_depths.push_back(i * dz_top);
    grid.node_depths.back() = split;
    const double dz_bottom = (depth - split) / (bottom_nodes - 1);
    for (int i = 1; i < bottom_nodes; ++i) grid.node_depths.push_back(split + i * dz_bottom);
    grid.node_depths.back() = depth;
    return grid;
}

SoilGrid SoilGrid::standard() { return two_segment(1.0, 0.5, 21, 11); }

std::vector<double> SoilGrid::cell_lengths() const {
    const std::size_t n = size();
    std::vector<double> v(n);
    v[0] = 0.5 * (node_depths[1] - node_depths[0]);
    for (std::size_t i = 1; i + 1 < n; ++i) v[i] = 0.5 * (node_depths[i + 1] - node_depths[i - 1]);
    v[n - 1] = 0.5 * (node_depths[n - 1] - node_depths[n - 2]);
    return v;
}

std::vector<double> SoilGrid::root_zone_overlap(double zr) const {
    const std::size_t n = size();
    std::vector<double> overlap(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double top = (i == 0) ? node_depths[0] : 0.5 * (node_depths[i - 1] + node_depths[i]);
        const double bottom = (i + 1 == n) ? node_depths[n - 1] : 0.5 * (node_depths[i] + node_depths[i + 1]);
        overlap[i] = std::max(0.0, std::min(bottom, zr) - top);
    }
    return overlap;
}

void FeddesThresholds::validate() const {
    if (!(psi_anaerobic > psi_opt_high && psi_opt_high > psi_opt_low && psi_opt_low > psi_wilting))
        throw DomainError("Feddes thresholds must be strictly decreasing");
}

void ColumnModel::validate() const {
    phi.validate();
    grid.validate();
    thresholds.validate();
    if (specific_storage < 0.0) throw DomainError("specific storage must be nonnegative");
}

WaterBudget& WaterBudget::operator+=(const WaterBudget& other) {
    infiltration += other.infiltration;
    runoff += other.runoff;
    drainage += other.drainage;
    uptake += other.uptake;
    evaporation += other.evaporation;
    return *this;
}

// ---------------------------------------------------------------------------
// Constitutive relations
// ---------------------------------------------------------------------------

double effective_saturation(double psi, const VanGenuchtenParams& phi) {
    if (psi >= 0.0) return 1.0;
    const double xn = std::pow(-phi.alpha * psi, phi.n);
    return std::pow(1.0 + xn, -phi.m());
}

double water_retention(double psi, const VanGenuchtenParams& phi) {
    return phi.theta_r + (phi.theta_s - phi.theta_r) * effective_saturation(psi, phi);
}

double inverse_retention(double theta_v, const VanGenuchtenParams& phi) {
    if (!(theta_v > phi.theta_r && theta_v < phi.theta_s))
        throw DomainError("inverse_retention: moisture " + std::to_string(theta_v) +
                          " outside (theta_r, theta_s)");
    const double se = (theta_v - phi.theta_r) / (phi.theta_s - phi.theta_r);
    const double m = phi.m();
    double psi = -std::pow(std::pow(se, -1.0 / m) - 1.0, 1.0 / phi.n) / phi.alpha;
    // One Newton correction removes the rounding of the nested powers.
    const double c = capillary_capacity(psi, phi);
    if (c > 0.0) psi -= (water_retention(psi, phi) - theta_v) / c;
    return std::min(psi, 0.0);
}

double capillary_capacity(double psi, const VanGenuchtenParams& phi) {
    if (psi >= 0.0) return 0.0;
    const double x = -phi.alpha * psi;
    const double m = phi.m();
    const double xn = std::pow(x, phi.n);
    const double dse = phi.alpha * m * phi.n * (xn / x) * std::pow(1.0 + xn, -m - 1.0);
    return (phi.theta_s - phi.theta_r) * dse;
}

double hydraulic_conductivity(double psi, const VanGenuchtenParams& phi) {
    if (psi >= 0.0) return phi.ks;
    const double x = -phi.alpha * psi;
    const double xn = std::pow(x, phi.n);
    const double se = std::pow(1.0 + xn, -phi.m());
    // 1 - Se^(1/m) = x^n / (1 + x^n), so (1 - Se^(1/m))^m = x^(n-1) Se.
    const double g = (xn / x) * se;
    const double f = 1.0 - g;
    return phi.ks * std::sqrt(se) * f * f;
}

double hydraulic_conductivity_derivative(double psi, const VanGenuchtenParams& phi) {
    if (psi >= 0.0) return 0.0;
    const double x = -phi.alpha * psi;
    const double n = phi.n;
    const double m = phi.m();
    const double xn = std::pow(x, n);
    const double se = std::pow(1.0 + xn, -m);
    const double dse_dx = -m * n * (xn / x) * se / (1.0 + xn);
    const double xn1 = xn / x;
    const double g = xn1 * se;
    const double dg_dx = (n - 1.0) * (xn1 / x) * se + xn1 * dse_dx;
    const double f = 1.0 - g;
    const double sq = std::sqrt(se);
    const double dk_dx = phi.ks * (0.5 / sq * dse_dx * f * f - 2.0 * sq * f * dg_dx);
    return -phi.alpha * dk_dx;
}

double feddes_stress(double psi, const FeddesThresholds& t) {
    if (psi > t.psi_anaerobic) return 0.0;
    if (psi > t.psi_opt_high) return (t.psi_anaerobic - psi) / (t.psi_anaerobic - t.psi_opt_high);
    if (psi >= t.psi_opt_low) return 1.0;
    if (psi >= t.psi_wilting) return (psi - t.psi_wilting) / (t.psi_opt_low - t.psi_wilting);
    return 0.0;
}

double feddes_stress_derivative(double psi, const FeddesThresholds& t) {
    if (psi > t.psi_anaerobic) return 0.0;
    if (psi > t.psi_opt_high) return -1.0 / (t.psi_anaerobic - t.psi_opt_high);
    if (psi >= t.psi_opt_low) return 0.0;
    if (psi >= t.psi_wilting) return 1.0 / (t.psi_opt_low - t.psi_wilting);
    return 0.0;
}

double root_uptake_sink(double psi, double kc, double et0, double zr, double z,
                        const FeddesThresholds& thresholds) {
    if (!(zr > 0.0)) throw DomainError("root_uptake_sink: rooting depth must be positive");
    if (et0 < 0.0) throw DomainError("root_uptake_sink: ET0 must be nonnegative");
    if (z > zr) return 0.0;
    return feddes_stress(psi, thresholds) * kc * et0 / zr;
}

// ---------------------------------------------------------------------------
// Discretization
// ---------------------------------------------------------------------------

namespace {

struct NodeProps {
    std::vector<double> storage;  // theta + Ss * max(psi, 0)
    std::vector<double> dstorage;
    std::vector<double> k;
    std::vector<double> dk;
    std::vector<double> sink;  // 1/s
    std::vector<double> dsink;
};

NodeProps evaluate_nodes(std::span<const double> psi, const SurfaceForcing& forcing,
                         const ColumnModel& model, bool derivatives) {
    const std::size_t n = psi.size();
    NodeProps p;
    p.storage.resize(n);
    p.k.resize(n);
    p.sink.resize(n);
    if (derivatives) {
        p.dstorage.resize(n);
        p.dk.resize(n);
        p.dsink.resize(n);
    }
    const double demand = forcing.zr > 0.0 ? forcing.kc * forcing.et0 / forcing.zr : 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double h = psi[i];
        p.storage[i] = water_retention(h, model.phi) + model.specific_storage * std::max(h, 0.0);
        p.k[i] = hydraulic_conductivity(h, model.phi);
        p.sink[i] = feddes_stress(h, model.thresholds) * demand;
        if (derivatives) {
            p.dstorage[i] = capillary_capacity(h, model.phi) + (h >= 0.0 ? model.specific_storage : 0.0);
            p.dk[i] = hydraulic_conductivity_derivative(h, model.phi);
            p.dsink[i] = feddes_stress_derivative(h, model.thresholds) * demand;
        }
    }
    return p;
}

/// Downward internodal fluxes q[i] between node i and i+1 (size n-1).
std::vector<double> internodal_fluxes(std::span<const double> psi, const NodeProps& p,
                                      const std::vector<double>& depths) {
    const std::size_t n = psi.size();
    std::vector<double> q(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double dz = depths[i + 1] - depths[i];
        const double kbar = 0.5 * (p.k[i] + p.k[i + 1]);
        q[i] = kbar * (1.0 - (psi[i + 1] - psi[i]) / dz);
    }
    return q;
}

double bottom_flux(const NodeProps& p, const ColumnModel& model) {
    return model.bottom == BottomBoundary::FreeDrainage ? p.k.back() : 0.0;
}

void check_lengths(const ColumnState& state, const ColumnModel& model) {
    if (state.psi.size() != model.grid.size())
        throw DimensionError("column state has " + std::to_string(state.psi.size()) +
                             " nodes, grid has " + std::to_string(model.grid.size()));
}

}  // namespace

double column_storage(const ColumnState& state, const ColumnModel& model) {
    check_lengths(state, model);
    const auto v = model.grid.cell_lengths();
    double total = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double h = state.psi[i];
        total += v[i] * (water_retention(h, model.phi) + model.specific_storage * std::max(h, 0.0));
    }
    return total;
}

std::vector<double> storage_capacity(const ColumnState& state, const ColumnModel& model) {
    check_lengths(state, model);
    std::vector<double> c(state.psi.size());
    for (std::size_t i = 0; i < c.size(); ++i) {
        const double h = state.psi[i];
        c[i] = capillary_capacity(h, model.phi) + (h >= 0.0 ? model.specific_storage : 0.0);
    }
    return c;
}

double net_boundary_flux(const ColumnState& state, const SurfaceForcing& forcing,
                         const ColumnModel& model) {
    check_lengths(state, model);
    const auto p = evaluate_nodes(state.psi, forcing, model, false);
    const auto overlap = model.grid.root_zone_overlap(forcing.zr);
    double sink = 0.0;
    for (std::size_t i = 0; i < overlap.size(); ++i) sink += overlap[i] * p.sink[i];
    return (forcing.water_input - forcing.evaporation) - bottom_flux(p, model) - sink;
}

std::vector<double> richards_rhs(const ColumnState& state, const SurfaceForcing& forcing,
                                 const ColumnModel& model) {
    check_lengths(state, model);
    const std::size_t n = state.psi.size();
    const auto p = evaluate_nodes(state.psi, forcing, model, true);
    const auto q = internodal_fluxes(state.psi, p, model.grid.node_depths);
    const auto v = model.grid.cell_lengths();
    const auto overlap = model.grid.root_zone_overlap(forcing.zr);
    const double q_top = forcing.water_input - forcing.evaporation;
    const double q_bot = bottom_flux(p, model);
    std::vector<double> rate(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double q_in = (i == 0) ? q_top : q[i - 1];
        const double q_out = (i + 1 == n) ? q_bot : q[i];
        rate[i] = (q_in - q_out - overlap[i] * p.sink[i]) / (v[i] * p.dstorage[i]);
    }
    return rate;
}

// ---------------------------------------------------------------------------
// Implicit Euler with damped Newton
// ---------------------------------------------------------------------------

namespace {

enum class SurfaceMode { Flux, Ponded };

struct Residual {
    std::vector<double> f;
    double norm = 0.0;  // max-norm over water-balance rows
    double q_top = 0.0;
    double q_bot = 0.0;
    double uptake_rate = 0.0;
};

struct Geometry {
    std::vector<double> volumes;
    std::vector<double> overlap;
};

Residual assemble(std::span<const double> psi, std::span<const double> storage_old,
                  const SurfaceForcing& forcing, double dt, const ColumnModel& model,
                  const Geometry& geo, SurfaceMode mode, std::vector<double>* lower,
                  std::vector<double>* diag, std::vector<double>* upper) {
    const std::size_t n = psi.size();
    const bool jac = diag != nullptr;
    const auto p = evaluate_nodes(psi, forcing, model, jac);
    const auto& d = model.grid.node_depths;
    const auto q = internodal_fluxes(psi, p, d);

    Residual r;
    r.f.assign(n, 0.0);
    r.q_bot = bottom_flux(p, model);
    if (jac) {
        lower->assign(n, 0.0);
        diag->assign(n, 0.0);
        upper->assign(n, 0.0);
    }

    // dq[i] = (dq_i/dpsi_i, dq_i/dpsi_{i+1})
    std::vector<double> dq_left(n - 1, 0.0), dq_right(n - 1, 0.0);
    if (jac) {
        for (std::size_t i = 0; i + 1 < n; ++i) {
            const double dz = d[i + 1] - d[i];
            const double kbar = 0.5 * (p.k[i] + p.k[i + 1]);
            const double grad = 1.0 - (psi[i + 1] - psi[i]) / dz;
            dq_left[i] = 0.5 * p.dk[i] * grad + kbar / dz;
            dq_right[i] = 0.5 * p.dk[i + 1] * grad - kbar / dz;
        }
    }

    double uptake = 0.0;
    for (std::size_t i = 0; i < n; ++i) uptake += geo.overlap[i] * p.sink[i];
    r.uptake_rate = uptake;

    for (std::size_t i = 0; i < n; ++i) {
        const double q_out = (i + 1 == n) ? r.q_bot : q[i];
        double q_in = (i == 0) ? forcing.water_input - forcing.evaporation : q[i - 1];
        r.f[i] = geo.volumes[i] * (p.storage[i] - storage_old[i]) -
                 dt * (q_in - q_out - geo.overlap[i] * p.sink[i]);
        if (jac) {
            double dd = geo.volumes[i] * p.dstorage[i] + dt * geo.overlap[i] * p.dsink[i];
            if (i > 0) {
                dd -= dt * dq_right[i - 1];
                (*lower)[i] = -dt * dq_left[i - 1];
            }
            if (i + 1 < n) {
                dd += dt * dq_left[i];
                (*upper)[i] = dt * dq_right[i];
            } else if (model.bottom == BottomBoundary::FreeDrainage) {
                dd += dt * p.dk[i];
            }
            (*diag)[i] = dd;
        }
    }

    if (mode == SurfaceMode::Ponded) {
        // Head fixed at zero; the surface flux is whatever closes node 0's balance.
        r.q_top = (geo.volumes[0] * (p.storage[0] - storage_old[0])) / dt + q[0] +
                  geo.overlap[0] * p.sink[0];
        r.f[0] = psi[0];
        if (jac) {
            (*diag)[0] = 1.0;
            (*upper)[0] = 0.0;
        }
    } else {
        r.q_top = forcing.water_input - forcing.evaporation;
    }

    double norm = 0.0;
    for (std::size_t i = (mode == SurfaceMode::Ponded ? 1 : 0); i < n; ++i)
        norm = std::max(norm, std::abs(r.f[i]));
    r.norm = mode == SurfaceMode::Ponded ? std::max(norm, std::abs(r.f[0])) : norm;
    return r;
}

void solve_tridiagonal(const std::vector<double>& lower, std::vector<double> diag,
                       std::vector<double> upper, std::vector<double>& rhs) {
    const std::size_t n = diag.size();
    for (std::size_t i = 1; i < n; ++i) {
        const double w = lower[i] / diag[i - 1];
        diag[i] -= w * upper[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    rhs[n - 1] /= diag[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) rhs[i] = (rhs[i] - upper[i] * rhs[i + 1]) / diag[i];
}

struct NewtonResult {
    bool converged = false;
    std::vector<double> psi;
    Residual residual;
    int iterations = 0;
};

NewtonResult newton_solve(const ColumnState& state, std::span<const double> storage_old,
                          const SurfaceForcing& forcing, double dt, const ColumnModel& model,
                          const Geometry& geo, SurfaceMode mode, const StepOptions& options) {
    NewtonResult out;
    out.psi = state.psi;
    if (mode == SurfaceMode::Ponded) out.psi[0] = 0.0;
    std::vector<double> lo, di, up;
    Residual r = assemble(out.psi, storage_old, forcing, dt, model, geo, mode, &lo, &di, &up);
    for (int it = 0; it < options.max_newton_iterations; ++it) {
        if (r.norm <= options.residual_tolerance) {
            out.converged = true;
            break;
        }
        std::vector<double> delta(r.f.size());
        for (std::size_t i = 0; i < delta.size(); ++i) delta[i] = -r.f[i];
        solve_tridiagonal(lo, di, up, delta);
        bool finite = true;
        for (double v : delta) finite = finite && std::isfinite(v);
        if (!finite) break;

        double step = 1.0;
        std::vector<double> trial(out.psi.size());
        Residual rt;
        bool accepted = false;
        for (int ls = 0; ls < 30; ++ls) {
            for (std::size_t i = 0; i < trial.size(); ++i) trial[i] = out.psi[i] + step * delta[i];
            rt = assemble(trial, storage_old, forcing, dt, model, geo, mode, nullptr, nullptr, nullptr);
            if (std::isfinite(rt.norm) && rt.norm < (1.0 - 1e-4 * step) * r.norm) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        ++out.iterations;
        if (!accepted) break;
        out.psi = trial;
        r = assemble(out.psi, storage_old, forcing, dt, model, geo, mode, &lo, &di, &up);
    }
    if (!out.converged && r.norm <= options.residual_tolerance) out.converged = true;
    out.residual = r;
    return out;
}

bool single_step(const ColumnState& state, const SurfaceForcing& forcing, double dt,
                 const ColumnModel& model, const Geometry& geo, const StepOptions& options,
                 ColumnState& next, StepReport& report) {
    std::vector<double> storage_old(state.psi.size());
    for (std::size_t i = 0; i < storage_old.size(); ++i) {
        const double h = state.psi[i];
        storage_old[i] = water_retention(h, model.phi) + model.specific_storage * std::max(h, 0.0);
    }

    NewtonResult res = newton_solve(state, storage_old, forcing, dt, model, geo, SurfaceMode::Flux, options);
    report.newton_iterations += res.iterations;
    if (!res.converged) {
        report.residual = res.residual.norm;
        return false;
    }
    SurfaceMode mode = SurfaceMode::Flux;
    if (res.psi[0] > 0.0 && forcing.water_input > 0.0) {
        NewtonResult ponded =
            newton_solve(state, storage_old, forcing, dt, model, geo, SurfaceMode::Ponded, options);
        report.newton_iterations += ponded.iterations;
        if (!ponded.converged) {
            report.residual = ponded.residual.norm;
            return false;
        }
        // The soil cannot take more than is supplied; otherwise keep the flux solution.
        if (ponded.residual.q_top < forcing.water_input - forcing.evaporation) {
            res = std::move(ponded);
            mode = SurfaceMode::Ponded;
        }
    }

    const Residual& r = res.residual;
    WaterBudget b;
    b.evaporation = dt * forcing.evaporation;
    if (mode == SurfaceMode::Ponded) {
        b.runoff = dt * (forcing.water_input - forcing.evaporation) - dt * r.q_top;
        b.infiltration = dt * forcing.water_input - b.runoff;
    } else {
        b.infiltration = dt * forcing.water_input;
    }
    b.drainage = dt * r.q_bot;
    b.uptake = dt * r.uptake_rate;
    report.budget += b;
    report.residual = std::max(report.residual, r.norm);
    report.substeps += 1;
    next.psi = std::move(res.psi);
    return true;
}

void step_recursive(const ColumnState& state, const SurfaceForcing& forcing, double dt,
                    const ColumnModel& model, const Geometry& geo, const StepOptions& options,
                    int halvings_left, ColumnState& next, StepReport& report) {
    StepReport attempt;
    if (single_step(state, forcing, dt, model, geo, options, next, attempt)) {
        report.budget += attempt.budget;
        report.newton_iterations += attempt.newton_iterations;
        report.substeps += attempt.substeps;
        report.residual = std::max(report.residual, attempt.residual);
        return;
    }
    report.newton_iterations += attempt.newton_iterations;
    if (halvings_left == 0)
        throw StepFailure("Richards step failed to converge (residual " +
                              std::to_string(attempt.residual) + ")",
                          attempt.residual);
    ColumnState mid;
    step_recursive(state, forcing, 0.5 * dt, model, geo, options, halvings_left - 1, mid, report);
    step_recursive(mid, forcing, 0.5 * dt, model, geo, options, halvings_left - 1, next, report);
}

}  // namespace

ColumnState step(const ColumnState& state, const SurfaceForcing& forcing, double dt,
                 const ColumnModel& model, StepReport* report, const StepOptions& options) {
    check_lengths(state, model);
    if (!(dt > 0.0)) throw DomainError("step: dt must be positive");
    for (double h : state.psi)
        if (!std::isfinite(h)) throw DomainError("step: non-finite pressure head");
    Geometry geo{model.grid.cell_lengths(), model.grid.root_zone_overlap(forcing.zr)};
    StepReport local;
    ColumnState next;
    step_recursive(state, forcing, dt, model, geo, options, options.max_halvings, next, local);
    if (report) *report = local;
    return next;
}

}  // namespace irrig
