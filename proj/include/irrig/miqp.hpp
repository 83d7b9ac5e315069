/**
 * @file miqp.hpp
 * @brief Convex mixed-integer quadratic programs over binary variables.
 *
 *   minimize    sum_k coef_k x_i x_j + c^T x + c0
 *   subject to  row_r(x) {<=, =, >=} rhs_r
 *               lower <= x <= upper,  x_b in {0, 1} for binary b
 *
 * The quadratic form must be positive semidefinite. Solved by best-first
 * branch-and-bound on the binaries with an operator-splitting QP engine
 * for the continuous relaxations.
 */

#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace irrig {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

enum class Sense { LessEqual, Equal, GreaterEqual };

struct LinearTerm {
    int var = 0;
    double coef = 0.0;
};

struct Variable {
    std::string name;
    double lower = -kInfinity;
    double upper = kInfinity;
    bool binary = false;
};

struct Constraint {
    std::string name;
    std::vector<LinearTerm> terms;
    Sense sense = Sense::LessEqual;
    double rhs = 0.0;
};

struct QuadraticTerm {
    int i = 0;
    int j = 0;
    double coef = 0.0;  ///< contributes coef * x_i * x_j
};

class QuadraticProgram {
public:
    int add_variable(std::string name, double lower, double upper);
    int add_binary(std::string name);
    int add_constraint(std::vector<LinearTerm> terms, Sense sense, double rhs, std::string name = {});

    /// Adds coef * x_i * x_j to the objective.
    void add_quadratic(int i, int j, double coef);
    void add_linear(int i, double coef);
    void add_constant(double value) { constant_ += value; }

    void set_bounds(int var, double lower, double upper);

    std::size_t num_variables() const { return variables_.size(); }
    std::size_t num_constraints() const { return constraints_.size(); }
    std::size_t num_binaries() const;
    std::vector<int> binary_indices() const;

    const std::vector<Variable>& variables() const { return variables_; }
    const std::vector<Constraint>& constraints() const { return constraints_; }
    const std::vector<QuadraticTerm>& quadratic_terms() const { return quadratic_; }
    const std::vector<double>& linear_objective() const { return linear_; }
    double constant() const { return constant_; }

    double objective(std::span<const double> x) const;
    /// Largest violation of any row, bound, or binary integrality.
    double max_violation(std::span<const double> x) const;

    /// Checks bounds, binary bounds within [0, 1], and that the quadratic
    /// form is PSD (smallest eigenvalue above -1e-10 times the largest entry).
    void validate() const;

    /// Human-readable LP-format dump (objective, constraints, bounds, binaries).
    void write_lp(std::ostream& out) const;

private:
    std::vector<Variable> variables_;
    std::vector<Constraint> constraints_;
    std::vector<QuadraticTerm> quadratic_;
    std::vector<double> linear_;
    double constant_ = 0.0;
};

enum class SolveStatus { Optimal, Infeasible, TimeLimit, NodeLimit };

const char* to_string(SolveStatus status);

struct SolveResult {
    SolveStatus status = SolveStatus::Infeasible;
    double objective = kInfinity;
    std::vector<double> x;
    double best_bound = -kInfinity;
    double relative_gap = kInfinity;
    long nodes = 0;
    double seconds = 0.0;

    bool has_solution() const { return !x.empty(); }
};

/// Candidate generator called with a node's relaxed solution; returns a full
/// binary assignment (indexed like QuadraticProgram::binary_indices()) to be
/// evaluated with the binaries fixed, or nothing.
using IncumbentHeuristic =
    std::function<std::optional<std::vector<double>>(std::span<const double> relaxed_x)>;

/// Candidate generator returning a complete solution vector, checked for
/// feasibility and integrality before it is accepted as incumbent.
using SolutionHeuristic =
    std::function<std::optional<std::vector<double>>(std::span<const double> relaxed_x)>;

/// Structure hint for z = max(0, a) with activation binary e. The row is
/// the one stating z >= a, so a = rhs - (row terms other than z).
struct ReluLink {
    int output = -1;
    int indicator = -1;
    int row = -1;
};

struct BnbOptions {
    double relative_gap = 1e-6;
    double absolute_gap = 1e-9;
    double time_limit = kInfinity;  ///< seconds
    long node_limit = std::numeric_limits<long>::max();
    double integrality_tolerance = 1e-6;
    /// Per-variable priority; branching picks the most fractional binary
    /// among those with the highest priority. Empty means all equal.
    std::vector<int> branch_priority;
    IncumbentHeuristic heuristic;
    SolutionHeuristic solution_heuristic;
    /// Call the heuristic every this many nodes (root always).
    int heuristic_frequency = 10;
    /// Binary assignments (binary_indices() order) evaluated before the search.
    std::vector<std::vector<double>> initial_assignments;
    /// Complete solution vectors evaluated before the search.
    std::vector<std::vector<double>> initial_solutions;
    /// Tighten variable bounds at every node by interval propagation of the
    /// rows; binaries whose range shrinks below [0, 1] become fixed.
    bool propagate = true;
    /// ReLU hints used by propagation to bound outputs by the current
    /// pre-activation range and to fix decided activations.
    std::vector<ReluLink> relu_links;
    /// ADMM iteration cap per node relaxation.
    int relaxation_iterations = 20000;
    bool verbose = false;
};

/// Fixed binary values: index into QuadraticProgram variables -> 0 or 1.
struct BinaryFixing {
    int var = 0;
    double value = 0.0;
};

enum class RelaxationStatus { Optimal, Infeasible, IterationLimit };

struct RelaxationResult {
    RelaxationStatus status = RelaxationStatus::Infeasible;
    std::vector<double> x;
    double objective = kInfinity;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    int iterations = 0;
    bool polished = false;
};

/// Continuous relaxation with some binaries fixed and the rest relaxed to [0, 1].
RelaxationResult solve_qp_relaxation(const QuadraticProgram& qp, std::span<const BinaryFixing> fixed = {});

SolveResult branch_and_bound(const QuadraticProgram& qp, const BnbOptions& options = {});

/// Solves the QP for every binary pattern; refuses more than 20 binaries.
SolveResult enumerate_exhaustive(const QuadraticProgram& qp);

}  // namespace irrig
