/**
 * @file qp_engine.hpp
 * @brief Operator-splitting (ADMM) convex QP engine with active-set polishing.
 *
 * Internal to the miqp module. Solves
 *
 *   min 1/2 x'Px + q'x   s.t.  l <= A x <= u
 *
 * where A stacks the model rows and an identity block for the variable
 * bounds, so branch-and-bound can change binary bounds without touching
 * the matrix. The problem is Ruiz-equilibrated once at construction.
 */

#pragma once

#include "irrig/miqp.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <memory>
#include <span>
#include <vector>

namespace irrig::detail {

struct QpSettings {
    double eps_abs = 1e-9;
    double eps_rel = 1e-9;
    double eps_loose = 1e-5;  ///< ADMM tolerance at which polishing is first attempted
    double eps_infeasible = 1e-6;
    double sigma = 1e-6;
    double alpha = 1.6;
    double rho = 0.1;
    int max_iterations = 20000;
    int check_interval = 10;
    int ruiz_iterations = 15;
    int polish_passes = 12;
};

/// Scaled ADMM iterates, reused to warm-start a related solve.
struct WarmStart {
    Eigen::VectorXd x;
    Eigen::VectorXd z;
    Eigen::VectorXd y;
    double rho = 0.0;
};

enum class EngineStatus { Optimal, Infeasible, Unbounded, IterationLimit };

struct EngineResult {
    EngineStatus status = EngineStatus::IterationLimit;
    std::vector<double> x;  ///< unscaled primal
    double objective = kInfinity;
    double primal_residual = kInfinity;
    double dual_residual = kInfinity;
    int iterations = 0;
    bool polished = false;
    /// Lagrangian lower bound from the row multipliers, valid at any
    /// iterate; -inf when the quadratic form is not diagonal.
    double dual_bound = -kInfinity;
    std::shared_ptr<const WarmStart> warm;
};

class QpEngine {
public:
    explicit QpEngine(const QuadraticProgram& qp, QpSettings settings = {});

    std::size_t num_variables() const { return n_; }

    /// Solves with the given variable bounds (original units). Bounds of
    /// the model itself are ignored in favour of these. Stops with
    /// IterationLimit once `time_budget` seconds have passed.
    EngineResult solve(std::span<const double> lower, std::span<const double> upper,
                       const WarmStart* warm = nullptr, double time_budget = kInfinity);

private:
    void factorize(const Eigen::VectorXd& rho_vec);
    Eigen::VectorXd make_rho(double rho, const Eigen::VectorXd& l, const Eigen::VectorXd& u) const;
    bool polish(const Eigen::VectorXd& l, const Eigen::VectorXd& u, const Eigen::VectorXd& x,
                const Eigen::VectorXd& z, const Eigen::VectorXd& y, Eigen::VectorXd& x_out,
                Eigen::VectorXd& y_out) const;
    void residuals(const Eigen::VectorXd& x, const Eigen::VectorXd& z, const Eigen::VectorXd& y,
                   double& prim, double& dual, double& eps_prim, double& eps_dual, double eps_abs,
                   double eps_rel) const;
    bool presolve_infeasible(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) const;
public:
    /// Lower bound over the variable box alone (zero row multipliers).
    double box_bound(std::span<const double> lower, std::span<const double> upper) const;

private:
    double dual_bound(const Eigen::VectorXd& y_scaled, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) const;

    const QuadraticProgram& qp_;
    QpSettings settings_;
    std::size_t n_ = 0;
    std::size_t m_rows_ = 0;  // model rows; total rows = m_rows_ + n_
    std::size_t m_ = 0;

    // Scaled data
    Eigen::SparseMatrix<double> p_;   // full symmetric
    Eigen::SparseMatrix<double> a_;   // m x n
    Eigen::SparseMatrix<double> at_;  // n x m
    Eigen::VectorXd q_;
    Eigen::VectorXd d_;  // variable scaling
    Eigen::VectorXd e_;  // row scaling
    double c_ = 1.0;     // cost scaling
    Eigen::VectorXd row_lower_;  // scaled model-row bounds
    Eigen::VectorXd row_upper_;

    // Unscaled model rows for presolve checks
    Eigen::SparseMatrix<double, Eigen::RowMajor> a_orig_rows_;
    Eigen::VectorXd orig_row_lower_;
    Eigen::VectorXd orig_row_upper_;
    bool diagonal_ = true;           // quadratic form without cross terms
    Eigen::VectorXd p_diag_orig_;    // unscaled diagonal of P
    Eigen::VectorXd q_orig_;

    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt_;
    Eigen::VectorXd rho_vec_;
    bool factorized_ = false;
};

}  // namespace irrig::detail
