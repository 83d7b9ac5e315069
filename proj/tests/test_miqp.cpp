/**
 * @file test_miqp.cpp
 * @brief QP relaxation engine, branch-and-bound and the exhaustive oracle.
 */

#include <doctest.h>

#include "irrig/error.hpp"
#include "irrig/miqp.hpp"

#include <random>
#include <sstream>

using namespace irrig;

namespace {

/// Random convex MIQP with a PSD objective built as G'G plus a linear term.
QuadraticProgram random_miqp(std::mt19937_64& rng, int n_cont, int n_bin) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    QuadraticProgram qp;
    const int n = n_cont + n_bin;
    for (int i = 0; i < n_cont; ++i) qp.add_variable("x" + std::to_string(i), -3.0, 3.0);
    for (int i = 0; i < n_bin; ++i) qp.add_binary("b" + std::to_string(i));
    const int rank = 1 + static_cast<int>(rng() % static_cast<unsigned>(n));
    for (int r = 0; r < rank; ++r) {
        std::vector<double> g(n);
        for (auto& v : g) v = u(rng);
        for (int i = 0; i < n; ++i) {
            qp.add_quadratic(i, i, g[i] * g[i]);
            for (int j = i + 1; j < n; ++j) qp.add_quadratic(i, j, 2.0 * g[i] * g[j]);
        }
    }
    for (int i = 0; i < n; ++i) qp.add_linear(i, 2.0 * u(rng));
    const int rows = 1 + static_cast<int>(rng() % 4);
    for (int r = 0; r < rows; ++r) {
        std::vector<LinearTerm> terms;
        for (int i = 0; i < n; ++i)
            if (rng() % 2) terms.push_back({i, u(rng)});
        if (terms.empty()) terms.push_back({0, 1.0});
        const Sense s = r % 3 == 2 ? Sense::Equal : (r % 2 ? Sense::GreaterEqual : Sense::LessEqual);
        // Keep equality rows satisfiable with a continuous variable when present.
        if (s == Sense::Equal && n_cont > 0) terms.push_back({0, 1.0});
        qp.add_constraint(terms, s, 0.5 * u(rng));
    }
    return qp;
}

}  // namespace

TEST_CASE("relaxation: clipped unconstrained minimum") {
    QuadraticProgram qp;
    const int x = qp.add_variable("x", 0.0, 0.5);
    qp.add_quadratic(x, x, 1.0);
    qp.add_linear(x, -2.0);
    qp.add_constant(1.0);
    const auto r = solve_qp_relaxation(qp);
    REQUIRE(r.status == RelaxationStatus::Optimal);
    CHECK(r.x[0] == doctest::Approx(0.5).epsilon(1e-10));
    CHECK(r.objective == doctest::Approx(0.25).epsilon(1e-10));
    CHECK(r.primal_residual <= 1e-8);
    CHECK(r.dual_residual <= 1e-8);
}

TEST_CASE("relaxation: unconstrained convex quadratic solves normal equations") {
    // min (x - 1)^2 + (x + y - 3)^2 -> x = 1, y = 2
    QuadraticProgram qp;
    const int x = qp.add_variable("x", -kInfinity, kInfinity);
    const int y = qp.add_variable("y", -kInfinity, kInfinity);
    qp.add_quadratic(x, x, 2.0);
    qp.add_quadratic(y, y, 1.0);
    qp.add_quadratic(x, y, 2.0);
    qp.add_linear(x, -8.0);
    qp.add_linear(y, -6.0);
    qp.add_constant(10.0);
    const auto r = solve_qp_relaxation(qp);
    REQUIRE(r.status == RelaxationStatus::Optimal);
    CHECK(r.x[0] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(r.x[1] == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(std::abs(r.objective) <= 1e-9);
}

TEST_CASE("relaxation: contradictory rows are infeasible") {
    QuadraticProgram qp;
    const int x = qp.add_variable("x", -kInfinity, kInfinity);
    const int y = qp.add_variable("y", -kInfinity, kInfinity);
    qp.add_quadratic(x, x, 1.0);
    qp.add_constraint({{x, 1.0}}, Sense::GreaterEqual, 1.0);
    qp.add_constraint({{x, 1.0}}, Sense::LessEqual, 0.0);
    CHECK(solve_qp_relaxation(qp).status == RelaxationStatus::Infeasible);

    // Infeasibility that only shows through a combination of rows.
    QuadraticProgram qp2;
    const int a = qp2.add_variable("a", -kInfinity, kInfinity);
    const int b = qp2.add_variable("b", -kInfinity, kInfinity);
    qp2.add_quadratic(a, a, 1.0);
    qp2.add_quadratic(b, b, 1.0);
    qp2.add_constraint({{a, 1.0}, {b, 1.0}}, Sense::GreaterEqual, 2.0);
    qp2.add_constraint({{a, 1.0}, {b, -1.0}}, Sense::GreaterEqual, 0.0);
    qp2.add_constraint({{a, 1.0}}, Sense::LessEqual, 0.5);
    CHECK(solve_qp_relaxation(qp2).status == RelaxationStatus::Infeasible);
    (void)y;
}

TEST_CASE("relaxation: fixings are honoured") {
    QuadraticProgram qp;
    const int b = qp.add_binary("b");
    qp.add_quadratic(b, b, 1.0);
    qp.add_linear(b, -0.6);
    const auto free = solve_qp_relaxation(qp);
    CHECK(free.x[0] == doctest::Approx(0.3).epsilon(1e-9));
    const BinaryFixing fix[] = {{b, 1.0}};
    const auto fixed = solve_qp_relaxation(qp, fix);
    CHECK(fixed.x[0] == 1.0);
    CHECK(fixed.objective == doctest::Approx(0.4).epsilon(1e-12));
    const BinaryFixing bad[] = {{b, 0.5}};
    CHECK_THROWS_AS(solve_qp_relaxation(qp, bad), DomainError);
}

TEST_CASE("validate rejects a nonconvex objective") {
    QuadraticProgram qp;
    const int x = qp.add_variable("x", 0, 1);
    const int y = qp.add_variable("y", 0, 1);
    qp.add_quadratic(x, y, 1.0);
    CHECK_THROWS_AS(qp.validate(), DomainError);
    QuadraticProgram ok;
    const int a = ok.add_variable("a", 0, 1);
    const int c = ok.add_variable("c", 0, 1);
    ok.add_quadratic(a, a, 1.0);
    ok.add_quadratic(c, c, 1.0);
    ok.add_quadratic(a, c, 2.0);  // (a + c)^2, singular but PSD
    CHECK_NOTHROW(ok.validate());
}

TEST_CASE("branch and bound: single binary") {
    QuadraticProgram qp;
    const int b = qp.add_binary("b");
    qp.add_quadratic(b, b, 1.0);
    qp.add_linear(b, -0.6);
    qp.add_constant(0.09);
    const auto r = branch_and_bound(qp);
    REQUIRE(r.status == SolveStatus::Optimal);
    CHECK(r.x[0] == 0.0);
    CHECK(r.objective == doctest::Approx(0.09).epsilon(1e-12));
}

TEST_CASE("branch and bound: pre-fixed binaries take one node") {
    QuadraticProgram qp;
    const int b0 = qp.add_binary("b0");
    const int b1 = qp.add_binary("b1");
    const int x = qp.add_variable("x", -5, 5);
    qp.set_bounds(b0, 1, 1);
    qp.set_bounds(b1, 0, 0);
    qp.add_quadratic(x, x, 1.0);
    qp.add_constraint({{x, 1.0}, {b0, -2.0}, {b1, 1.0}}, Sense::GreaterEqual, 0.0);
    const auto r = branch_and_bound(qp);
    REQUIRE(r.status == SolveStatus::Optimal);
    CHECK(r.nodes == 1);
    CHECK(r.x[x] == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("exhaustive enumeration: zero binaries and infeasible patterns") {
    QuadraticProgram qp;
    const int x = qp.add_variable("x", -1, 1);
    qp.add_quadratic(x, x, 1.0);
    qp.add_linear(x, -4.0);
    const auto r = enumerate_exhaustive(qp);
    REQUIRE(r.status == SolveStatus::Optimal);
    CHECK(r.nodes == 1);
    CHECK(r.x[0] == doctest::Approx(1.0).epsilon(1e-9));

    QuadraticProgram inf;
    const int b = inf.add_binary("b");
    inf.add_constraint({{b, 1.0}}, Sense::GreaterEqual, 0.5);
    inf.add_constraint({{b, 1.0}}, Sense::LessEqual, 0.7);
    CHECK(enumerate_exhaustive(inf).status == SolveStatus::Infeasible);
    CHECK(branch_and_bound(inf).status == SolveStatus::Infeasible);

    QuadraticProgram big;
    for (int i = 0; i < 21; ++i) big.add_binary("b" + std::to_string(i));
    CHECK_THROWS_AS(enumerate_exhaustive(big), DomainError);
}

TEST_CASE("branch and bound matches exhaustive enumeration on random instances") {
    std::mt19937_64 rng(20240501);
    for (int trial = 0; trial < 30; ++trial) {
        const int n_bin = 1 + static_cast<int>(rng() % 8);
        const int n_cont = 1 + static_cast<int>(rng() % 5);
        const auto qp = random_miqp(rng, n_cont, n_bin);
        const auto ref = enumerate_exhaustive(qp);
        const auto bnb = branch_and_bound(qp);
        REQUIRE(ref.status == bnb.status);
        if (ref.status != SolveStatus::Optimal) continue;
        CHECK(bnb.objective == doctest::Approx(ref.objective).epsilon(1e-6).scale(1.0));
        CHECK(qp.max_violation(bnb.x) <= 1e-6);
        for (int bi : qp.binary_indices()) CHECK((bnb.x[bi] == 0.0 || bnb.x[bi] == 1.0));
    }
}

TEST_CASE("branch and bound is deterministic") {
    std::mt19937_64 rng(7);
    const auto qp = random_miqp(rng, 3, 6);
    const auto a = branch_and_bound(qp);
    const auto b = branch_and_bound(qp);
    CHECK(a.objective == b.objective);
    CHECK(a.x == b.x);
    CHECK(a.nodes == b.nodes);
}

TEST_CASE("child relaxation bounds never fall below the parent") {
    std::mt19937_64 rng(99);
    for (int trial = 0; trial < 10; ++trial) {
        const auto qp = random_miqp(rng, 3, 4);
        const auto root = solve_qp_relaxation(qp);
        if (root.status != RelaxationStatus::Optimal) continue;
        const int b = qp.binary_indices().front();
        for (double v : {0.0, 1.0}) {
            const BinaryFixing fix[] = {{b, v}};
            const auto child = solve_qp_relaxation(qp, fix);
            if (child.status != RelaxationStatus::Optimal) continue;
            CHECK(child.objective >= root.objective - 1e-9 * std::max(1.0, std::abs(root.objective)));
        }
    }
}

TEST_CASE("node limit returns the incumbent honestly") {
    std::mt19937_64 rng(3);
    const auto qp = random_miqp(rng, 2, 10);
    BnbOptions opt;
    opt.node_limit = 1;
    const auto r = branch_and_bound(qp, opt);
    if (r.status == SolveStatus::NodeLimit && r.has_solution()) {
        CHECK(r.relative_gap >= 0.0);
        CHECK(r.best_bound <= r.objective + 1e-12);
    }
    CHECK(r.nodes <= 1);
}

TEST_CASE("LP export lists every section") {
    QuadraticProgram qp;
    const int x = qp.add_variable("x", 0, 2);
    const int b = qp.add_binary("b");
    qp.add_quadratic(x, x, 1.5);
    qp.add_linear(b, 3.0);
    qp.add_constraint({{x, 1.0}, {b, -2.0}}, Sense::LessEqual, 0.0, "link");
    std::ostringstream out;
    qp.write_lp(out);
    const std::string s = out.str();
    CHECK(s.find("Minimize") != std::string::npos);
    CHECK(s.find("[ 3 x ^ 2 ] / 2") != std::string::npos);
    CHECK(s.find("link: 1 x - 2 b <= 0") != std::string::npos);
    CHECK(s.find("0 <= x <= 2") != std::string::npos);
    CHECK(s.find("Binaries\n b\n") != std::string::npos);
}
