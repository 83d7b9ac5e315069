/**
 * @file qp_relaxation.cpp
 * @brief ADMM engine for the continuous relaxations, with polishing.
 */

#include "qp_engine.hpp"

#include "irrig/error.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace irrig::detail {

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Vec = Eigen::VectorXd;

constexpr double kRhoMin = 1e-6;
constexpr double kRhoMax = 1e6;
constexpr double kRhoEqualityFactor = 1e3;

double inf_norm(const Vec& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

double clamp_scale(double norm) {
    if (norm < 1e-4) return 1.0;
    return std::min(norm, 1e4);
}

bool is_equality(double l, double u) { return std::isfinite(l) && l == u; }

}  // namespace

QpEngine::QpEngine(const QuadraticProgram& qp, QpSettings settings)
    : qp_(qp), settings_(settings) {
    n_ = qp.num_variables();
    m_rows_ = qp.num_constraints();
    m_ = m_rows_ + n_;
    if (n_ == 0) throw DimensionError("QP has no variables");

    std::vector<Eigen::Triplet<double>> trip;
    orig_row_lower_.resize(static_cast<Eigen::Index>(m_rows_));
    orig_row_upper_.resize(static_cast<Eigen::Index>(m_rows_));
    for (std::size_t r = 0; r < m_rows_; ++r) {
        const auto& c = qp.constraints()[r];
        for (const auto& t : c.terms) trip.emplace_back(static_cast<int>(r), t.var, t.coef);
        const auto ri = static_cast<Eigen::Index>(r);
        orig_row_lower_(ri) = c.sense == Sense::LessEqual ? -kInfinity : c.rhs;
        orig_row_upper_(ri) = c.sense == Sense::GreaterEqual ? kInfinity : c.rhs;
    }
    a_orig_rows_.resize(static_cast<Eigen::Index>(m_rows_), static_cast<Eigen::Index>(n_));
    a_orig_rows_.setFromTriplets(trip.begin(), trip.end());
    for (std::size_t j = 0; j < n_; ++j)
        trip.emplace_back(static_cast<int>(m_rows_ + j), static_cast<int>(j), 1.0);
    a_.resize(static_cast<Eigen::Index>(m_), static_cast<Eigen::Index>(n_));
    a_.setFromTriplets(trip.begin(), trip.end());

    std::vector<Eigen::Triplet<double>> ptrip;
    p_diag_orig_ = Vec::Zero(static_cast<Eigen::Index>(n_));
    for (const auto& t : qp.quadratic_terms()) {
        if (t.i == t.j) {
            ptrip.emplace_back(t.i, t.i, 2.0 * t.coef);
            p_diag_orig_(t.i) += 2.0 * t.coef;
        } else {
            if (t.coef != 0.0) diagonal_ = false;
            ptrip.emplace_back(t.i, t.j, t.coef);
            ptrip.emplace_back(t.j, t.i, t.coef);
        }
    }
    p_.resize(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(n_));
    p_.setFromTriplets(ptrip.begin(), ptrip.end());
    q_ = Eigen::Map<const Vec>(qp.linear_objective().data(), static_cast<Eigen::Index>(n_));
    q_orig_ = q_;

    // Ruiz equilibration of the KKT matrix [P A'; A 0].
    d_ = Vec::Ones(static_cast<Eigen::Index>(n_));
    e_ = Vec::Ones(static_cast<Eigen::Index>(m_));
    for (int it = 0; it < settings_.ruiz_iterations; ++it) {
        Vec col(static_cast<Eigen::Index>(n_));
        col.setZero();
        Vec row(static_cast<Eigen::Index>(m_));
        row.setZero();
        for (int k = 0; k < p_.outerSize(); ++k)
            for (SpMat::InnerIterator itp(p_, k); itp; ++itp) col(k) = std::max(col(k), std::abs(itp.value()));
        for (int k = 0; k < a_.outerSize(); ++k)
            for (SpMat::InnerIterator ita(a_, k); ita; ++ita) {
                const double v = std::abs(ita.value());
                col(k) = std::max(col(k), v);
                row(ita.row()) = std::max(row(ita.row()), v);
            }
        Vec dx = col.unaryExpr([](double v) { return 1.0 / std::sqrt(clamp_scale(v)); });
        Vec dz = row.unaryExpr([](double v) { return 1.0 / std::sqrt(clamp_scale(v)); });
        p_ = dx.asDiagonal() * p_ * dx.asDiagonal();
        a_ = dz.asDiagonal() * a_ * dx.asDiagonal();
        q_ = dx.cwiseProduct(q_);
        d_ = d_.cwiseProduct(dx);
        e_ = e_.cwiseProduct(dz);
    }
    double mean_col = 0.0;
    if (p_.nonZeros() > 0) {
        Vec col = Vec::Zero(static_cast<Eigen::Index>(n_));
        for (int k = 0; k < p_.outerSize(); ++k)
            for (SpMat::InnerIterator itp(p_, k); itp; ++itp) col(k) = std::max(col(k), std::abs(itp.value()));
        mean_col = col.mean();
    }
    c_ = 1.0 / clamp_scale(std::max(mean_col, inf_norm(q_)));
    p_ *= c_;
    q_ *= c_;
    p_.makeCompressed();
    a_.makeCompressed();
    at_ = a_.transpose();
    at_.makeCompressed();

    row_lower_ = orig_row_lower_.cwiseProduct(e_.head(static_cast<Eigen::Index>(m_rows_)));
    row_upper_ = orig_row_upper_.cwiseProduct(e_.head(static_cast<Eigen::Index>(m_rows_)));
}

Vec QpEngine::make_rho(double rho, const Vec& l, const Vec& u) const {
    Vec r(static_cast<Eigen::Index>(m_));
    for (Eigen::Index i = 0; i < r.size(); ++i) {
        if (!std::isfinite(l(i)) && !std::isfinite(u(i)))
            r(i) = kRhoMin;
        else if (static_cast<std::size_t>(i) < m_rows_ && is_equality(l(i), u(i)))
            r(i) = kRhoEqualityFactor * rho;  // bound rows keep rho so fixings never refactor
        else
            r(i) = rho;
    }
    return r;
}

void QpEngine::factorize(const Vec& rho_vec) {
    SpMat k = at_ * rho_vec.asDiagonal() * a_;
    k += p_;
    SpMat sigma(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(n_));
    sigma.setIdentity();
    k += settings_.sigma * sigma;
    k.makeCompressed();
    if (!factorized_) ldlt_.analyzePattern(k);
    ldlt_.factorize(k);
    if (ldlt_.info() != Eigen::Success) {
        ldlt_.compute(k);
        if (ldlt_.info() != Eigen::Success) throw SolverError("QP engine: KKT factorization failed");
    }
    rho_vec_ = rho_vec;
    factorized_ = true;
}

void QpEngine::residuals(const Vec& x, const Vec& z, const Vec& y, double& prim, double& dual,
                         double& eps_prim, double& eps_dual, double eps_abs, double eps_rel) const {
    const Vec ax = a_ * x;
    const Vec einv = e_.cwiseInverse();
    prim = inf_norm(einv.cwiseProduct(ax - z));
    eps_prim = eps_abs + eps_rel * std::max(inf_norm(einv.cwiseProduct(ax)), inf_norm(einv.cwiseProduct(z)));
    const Vec px = p_ * x;
    const Vec aty = at_ * y;
    const Vec dinv = d_.cwiseInverse();
    dual = inf_norm(dinv.cwiseProduct(px + q_ + aty)) / c_;
    const double scale = std::max({inf_norm(dinv.cwiseProduct(px)), inf_norm(dinv.cwiseProduct(aty)),
                                   inf_norm(dinv.cwiseProduct(q_))}) /
                         c_;
    eps_dual = eps_abs + eps_rel * scale;
}

bool QpEngine::presolve_infeasible(const Vec& lo, const Vec& hi) const {
    for (Eigen::Index j = 0; j < lo.size(); ++j)
        if (lo(j) > hi(j)) return true;
    for (Eigen::Index r = 0; r < a_orig_rows_.outerSize(); ++r) {
        double amin = 0.0, amax = 0.0, mag = 0.0;
        for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(a_orig_rows_, r); it; ++it) {
            const double a = it.value();
            const double l = lo(it.col()), h = hi(it.col());
            amin += a > 0 ? a * l : a * h;
            amax += a > 0 ? a * h : a * l;
            mag += std::abs(a) * std::max(std::abs(l), std::abs(h));
        }
        const double tol = 1e-9 * (1.0 + mag);
        if (amax < orig_row_lower_(r) - tol) return true;
        if (amin > orig_row_upper_(r) + tol) return true;
    }
    return false;
}

bool QpEngine::polish(const Vec& l, const Vec& u, const Vec& x, const Vec& z, const Vec& y, Vec& x_out,
                      Vec& y_out) const {
    const auto m = static_cast<Eigen::Index>(m_);
    const auto n = static_cast<Eigen::Index>(n_);
    // -1 lower active, +1 upper active, 2 equality, 0 inactive
    std::vector<int> state(static_cast<std::size_t>(m), 0);
    for (Eigen::Index i = 0; i < m; ++i) {
        if (is_equality(l(i), u(i)))
            state[i] = 2;
        else if (std::isfinite(l(i)) && z(i) - l(i) < -y(i))
            state[i] = -1;
        else if (std::isfinite(u(i)) && u(i) - z(i) < y(i))
            state[i] = 1;
    }
    const Eigen::SparseMatrix<double, Eigen::RowMajor> a_rows = a_;
    constexpr double delta = 1e-7;

    for (int pass = 0; pass < settings_.polish_passes; ++pass) {
        std::vector<Eigen::Index> act;
        for (Eigen::Index i = 0; i < m; ++i)
            if (state[i] != 0) act.push_back(i);
        const auto k = static_cast<Eigen::Index>(act.size());
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(static_cast<std::size_t>(p_.nonZeros() + 2 * n + 2 * k) + a_.nonZeros());
        for (int c = 0; c < p_.outerSize(); ++c)
            for (SpMat::InnerIterator it(p_, c); it; ++it) trip.emplace_back(it.row(), it.col(), it.value());
        for (Eigen::Index r = 0; r < k; ++r) {
            for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(a_rows, act[r]); it; ++it) {
                trip.emplace_back(n + r, it.col(), it.value());
                trip.emplace_back(it.col(), n + r, it.value());
            }
        }
        SpMat kkt0(n + k, n + k);
        kkt0.setFromTriplets(trip.begin(), trip.end());
        for (Eigen::Index i = 0; i < n; ++i) trip.emplace_back(i, i, delta);
        for (Eigen::Index r = 0; r < k; ++r) trip.emplace_back(n + r, n + r, -delta);
        SpMat kkt(n + k, n + k);
        kkt.setFromTriplets(trip.begin(), trip.end());

        Vec rhs(n + k);
        rhs.head(n) = -q_;
        for (Eigen::Index r = 0; r < k; ++r) {
            const Eigen::Index i = act[r];
            rhs(n + r) = state[i] == 1 ? u(i) : l(i);
        }
        Eigen::SimplicialLDLT<SpMat> solver(kkt);
        if (solver.info() != Eigen::Success) return false;
        Vec sol = solver.solve(rhs);
        for (int refine = 0; refine < 5; ++refine) {
            const Vec res = rhs - kkt0 * sol;
            sol += solver.solve(res);
        }
        if (!sol.allFinite()) return false;

        const Vec xp = sol.head(n);
        Vec yp = Vec::Zero(m);
        for (Eigen::Index r = 0; r < k; ++r) yp(act[r]) = sol(n + r);
        const Vec axp = a_ * xp;

        bool changed = false;
        bool ok = true;
        const double ytol = 1e-9 * std::max(1.0, inf_norm(yp));
        for (Eigen::Index r = 0; r < k; ++r) {
            const Eigen::Index i = act[r];
            if ((state[i] == -1 && yp(i) > ytol) || (state[i] == 1 && yp(i) < -ytol)) {
                state[i] = 0;
                ok = false;
                changed = true;
            }
        }
        for (Eigen::Index i = 0; i < m; ++i) {
            if (state[i] != 0) continue;
            const double tol = 1e-9 * (1.0 + std::abs(axp(i)));
            if (axp(i) < l(i) - tol) {
                state[i] = -1;
                ok = false;
                changed = true;
            } else if (axp(i) > u(i) + tol) {
                state[i] = 1;
                ok = false;
                changed = true;
            }
        }
        if (ok) {
            x_out = xp;
            y_out = yp;
            return true;
        }
        if (!changed) return false;
    }
    (void)x;
    return false;
}

double QpEngine::dual_bound(const Vec& y_scaled, const Vec& lo, const Vec& hi) const {
    if (!diagonal_) return -kInfinity;
    const auto mr = static_cast<Eigen::Index>(m_rows_);
    // Row multipliers in original units, projected onto the signs the row
    // bounds allow so that every support term stays finite.
    Vec y = e_.head(mr).cwiseProduct(y_scaled.head(mr)) / c_;
    double bound = qp_.constant();
    for (Eigen::Index i = 0; i < mr; ++i) {
        if (!std::isfinite(orig_row_upper_(i))) y(i) = std::min(y(i), 0.0);
        if (!std::isfinite(orig_row_lower_(i))) y(i) = std::max(y(i), 0.0);
        if (y(i) > 0.0) bound -= y(i) * orig_row_upper_(i);
        else if (y(i) < 0.0) bound -= y(i) * orig_row_lower_(i);
    }
    const Vec r = q_orig_ + a_orig_rows_.transpose() * y;
    // The remaining minimisation over the variable box is separable.
    for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(n_); ++j) {
        const double p = p_diag_orig_(j);
        double v;
        if (p > 0.0) {
            const double xs = std::clamp(-r(j) / p, lo(j), hi(j));
            v = 0.5 * p * xs * xs + r(j) * xs;
        } else if (r(j) > 0.0) {
            v = r(j) * lo(j);
        } else if (r(j) < 0.0) {
            v = r(j) * hi(j);
        } else {
            v = 0.0;
        }
        if (!std::isfinite(v)) return -kInfinity;
        bound += v;
    }
    return bound;
}

double QpEngine::box_bound(std::span<const double> lower, std::span<const double> upper) const {
    const auto n = static_cast<Eigen::Index>(n_);
    return dual_bound(Vec::Zero(static_cast<Eigen::Index>(m_)), Eigen::Map<const Vec>(lower.data(), n),
                      Eigen::Map<const Vec>(upper.data(), n));
}

EngineResult QpEngine::solve(std::span<const double> lower, std::span<const double> upper, const WarmStart* warm,
                             double time_budget) {
    const auto started = std::chrono::steady_clock::now();
    if (lower.size() != n_ || upper.size() != n_) throw DimensionError("QP engine: bound vector size mismatch");
    const auto n = static_cast<Eigen::Index>(n_);
    const auto m = static_cast<Eigen::Index>(m_);
    const auto mr = static_cast<Eigen::Index>(m_rows_);

    EngineResult result;
    const Vec lo = Eigen::Map<const Vec>(lower.data(), n);
    const Vec hi = Eigen::Map<const Vec>(upper.data(), n);
    if (presolve_infeasible(lo, hi)) {
        result.status = EngineStatus::Infeasible;
        return result;
    }

    Vec l(m), u(m);
    l.head(mr) = row_lower_;
    u.head(mr) = row_upper_;
    l.tail(n) = lo.cwiseProduct(e_.tail(n));
    u.tail(n) = hi.cwiseProduct(e_.tail(n));

    double rho = warm && warm->rho > 0.0 ? warm->rho : settings_.rho;
    Vec rho_vec = make_rho(rho, l, u);
    if (!factorized_ || rho_vec_.size() != rho_vec.size() || rho_vec_ != rho_vec) factorize(rho_vec);

    Vec x, z, y;
    if (warm && warm->x.size() == n && warm->y.size() == m) {
        x = warm->x;
        y = warm->y;
        z = (a_ * x).cwiseMax(l).cwiseMin(u);
    } else {
        x = Vec::Zero(n);
        y = Vec::Zero(m);
        z = Vec::Zero(m).cwiseMax(l).cwiseMin(u);
    }

    const double sigma = settings_.sigma;
    const double alpha = settings_.alpha;
    double eps_now = settings_.eps_loose;
    const double eps_final = settings_.eps_abs;
    Vec dx = Vec::Zero(n), dy = Vec::Zero(m);
    int checks = 0;

    auto finish = [&](const Vec& xs, const Vec& ys, bool polished, EngineStatus status, int iters) {
        Vec xu = d_.cwiseProduct(xs);
        xu = xu.cwiseMax(lo).cwiseMin(hi);
        result.x.assign(xu.data(), xu.data() + n);
        result.objective = qp_.objective(result.x);
        const Vec zs = (a_ * xs).cwiseMax(l).cwiseMin(u);
        double ep = 0, ed = 0;
        residuals(xs, zs, ys, result.primal_residual, result.dual_residual, ep, ed, 0.0, 0.0);
        result.status = status;
        result.iterations = iters;
        result.polished = polished;
        result.dual_bound = dual_bound(ys, lo, hi);
        auto ws = std::make_shared<WarmStart>();
        ws->x = xs;
        ws->z = zs;
        ws->y = ys;
        ws->rho = rho;
        result.warm = std::move(ws);
        return result;
    };

    for (int iter = 1; iter <= settings_.max_iterations; ++iter) {
        const Vec rhs = sigma * x - q_ + at_ * (rho_vec_.cwiseProduct(z) - y);
        const Vec xt = ldlt_.solve(rhs);
        const Vec zt = a_ * xt;
        const Vec xn = alpha * xt + (1.0 - alpha) * x;
        const Vec zh = alpha * zt + (1.0 - alpha) * z;
        const Vec zn = (zh + y.cwiseQuotient(rho_vec_)).cwiseMax(l).cwiseMin(u);
        const Vec yn = y + rho_vec_.cwiseProduct(zh - zn);
        dx = xn - x;
        dy = yn - y;
        x = xn;
        z = zn;
        y = yn;

        if (iter % settings_.check_interval != 0 && iter != 1) continue;
        ++checks;
        if (std::isfinite(time_budget) &&
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count() > time_budget)
            return finish(x, y, false, EngineStatus::IterationLimit, iter);

        double prim, dual, eps_p, eps_d;
        residuals(x, z, y, prim, dual, eps_p, eps_d, eps_now, eps_now);
        if (prim <= eps_p && dual <= eps_d) {
            Vec xp, yp;
            if (polish(l, u, x, z, y, xp, yp)) {
                const Vec zp = (a_ * xp).cwiseMax(l).cwiseMin(u);
                double pp, pd, pep, ped;
                residuals(xp, zp, yp, pp, pd, pep, ped, 1e-9, 1e-9);
                if (pp <= pep && pd <= ped) return finish(xp, yp, true, EngineStatus::Optimal, iter);
            }
            if (eps_now <= eps_final) return finish(x, y, false, EngineStatus::Optimal, iter);
            eps_now = std::max(eps_final, eps_now * 0.1);
        }

        // Primal infeasibility certificate.
        const double ndy = inf_norm(e_.cwiseProduct(dy));
        if (ndy > settings_.eps_infeasible) {
            const double tol = settings_.eps_infeasible * ndy;
            const Vec atdy = d_.cwiseInverse().cwiseProduct(at_ * dy);
            if (inf_norm(atdy) <= tol) {
                double support = 0.0;
                bool finite = true;
                for (Eigen::Index i = 0; i < m && finite; ++i) {
                    if (dy(i) > 0) {
                        if (!std::isfinite(u(i))) finite = dy(i) * e_(i) <= tol;
                        else support += u(i) * dy(i);
                    } else if (dy(i) < 0) {
                        if (!std::isfinite(l(i))) finite = -dy(i) * e_(i) <= tol;
                        else support += l(i) * dy(i);
                    }
                }
                if (finite && support < -tol) {
                    result.status = EngineStatus::Infeasible;
                    result.iterations = iter;
                    return result;
                }
            }
        }
        // Dual infeasibility (unboundedness) certificate.
        const double ndx = inf_norm(d_.cwiseProduct(dx));
        if (ndx > settings_.eps_infeasible) {
            const double tol = settings_.eps_infeasible * ndx;
            const Vec pdx = d_.cwiseInverse().cwiseProduct(p_ * dx) / c_;
            if (inf_norm(pdx) <= tol && q_.dot(dx) / c_ < -tol) {
                const Vec adx = e_.cwiseInverse().cwiseProduct(a_ * dx);
                bool ray = true;
                for (Eigen::Index i = 0; i < m && ray; ++i) {
                    if (std::isfinite(u(i)) && adx(i) > tol) ray = false;
                    if (std::isfinite(l(i)) && adx(i) < -tol) ray = false;
                }
                if (ray) {
                    result.status = EngineStatus::Unbounded;
                    result.iterations = iter;
                    return result;
                }
            }
        }

        // Adaptive step size.
        if (checks % 5 == 0) {
            const Vec ax = a_ * x;
            const Vec px = p_ * x;
            const Vec aty = at_ * y;
            const double pr = inf_norm(ax - z) / (std::max(inf_norm(ax), inf_norm(z)) + 1e-30);
            const double du =
                inf_norm(px + q_ + aty) / (std::max({inf_norm(px), inf_norm(aty), inf_norm(q_)}) + 1e-30);
            const double ratio = std::sqrt(pr / (du + 1e-30));
            const double rho_new = std::clamp(rho * ratio, kRhoMin, kRhoMax);
            if (rho_new > 5.0 * rho || rho_new < 0.2 * rho) {
                rho = rho_new;
                factorize(make_rho(rho, l, u));
            }
        }
    }
    // Last resort: try polishing from wherever ADMM ended.
    Vec xp, yp;
    if (polish(l, u, x, z, y, xp, yp)) {
        const Vec zp = (a_ * xp).cwiseMax(l).cwiseMin(u);
        double pp, pd, pep, ped;
        residuals(xp, zp, yp, pp, pd, pep, ped, 1e-9, 1e-9);
        if (pp <= pep && pd <= ped) return finish(xp, yp, true, EngineStatus::Optimal, settings_.max_iterations);
    }
    return finish(x, y, false, EngineStatus::IterationLimit, settings_.max_iterations);
}

}  // namespace irrig::detail

namespace irrig {

RelaxationResult solve_qp_relaxation(const QuadraticProgram& qp, std::span<const BinaryFixing> fixed) {
    qp.validate();
    std::vector<double> lo, hi;
    for (const auto& v : qp.variables()) {
        lo.push_back(v.lower);
        hi.push_back(v.upper);
    }
    for (const auto& f : fixed) {
        if (f.var < 0 || f.var >= static_cast<int>(qp.num_variables()))
            throw DimensionError("solve_qp_relaxation: fixing references unknown variable");
        if (!qp.variables()[f.var].binary) throw DomainError("solve_qp_relaxation: can only fix binaries");
        if (f.value != 0.0 && f.value != 1.0) throw DomainError("solve_qp_relaxation: fixing must be 0 or 1");
        lo[f.var] = hi[f.var] = f.value;
    }
    detail::QpEngine engine(qp);
    const auto r = engine.solve(lo, hi);
    if (r.status == detail::EngineStatus::Unbounded) throw SolverError("QP relaxation is unbounded");
    RelaxationResult out;
    out.status = r.status == detail::EngineStatus::Optimal      ? RelaxationStatus::Optimal
                 : r.status == detail::EngineStatus::Infeasible ? RelaxationStatus::Infeasible
                                                                 : RelaxationStatus::IterationLimit;
    out.x = r.x;
    out.objective = r.objective;
    out.primal_residual = r.primal_residual;
    out.dual_residual = r.dual_residual;
    out.iterations = r.iterations;
    out.polished = r.polished;
    return out;
}

}  // namespace irrig
