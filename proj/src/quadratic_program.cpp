/**
 * @file quadratic_program.cpp
 * @brief Model container, validation and LP-format export.
 */

#include "irrig/miqp.hpp"

#include "irrig/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <ostream>

namespace irrig {

int QuadraticProgram::add_variable(std::string name, double lower, double upper) {
    if (std::isnan(lower) || std::isnan(upper) || lower > upper)
        throw DomainError("variable " + name + ": inconsistent bounds");
    variables_.push_back({std::move(name), lower, upper, false});
    linear_.push_back(0.0);
    return static_cast<int>(variables_.size()) - 1;
}

int QuadraticProgram::add_binary(std::string name) {
    const int idx = add_variable(std::move(name), 0.0, 1.0);
    variables_[idx].binary = true;
    return idx;
}

int QuadraticProgram::add_constraint(std::vector<LinearTerm> terms, Sense sense, double rhs, std::string name) {
    for (const auto& t : terms) {
        if (t.var < 0 || t.var >= static_cast<int>(variables_.size()))
            throw DimensionError("constraint references unknown variable");
    }
    if (!std::isfinite(rhs)) throw DomainError("constraint right-hand side must be finite");
    // Merge duplicate variables so rows stay canonical.
    std::map<int, double> merged;
    for (const auto& t : terms) merged[t.var] += t.coef;
    std::vector<LinearTerm> clean;
    clean.reserve(merged.size());
    for (const auto& [v, c] : merged)
        if (c != 0.0) clean.push_back({v, c});
    if (name.empty()) name = "c" + std::to_string(constraints_.size());
    constraints_.push_back({std::move(name), std::move(clean), sense, rhs});
    return static_cast<int>(constraints_.size()) - 1;
}

void QuadraticProgram::add_quadratic(int i, int j, double coef) {
    const int n = static_cast<int>(variables_.size());
    if (i < 0 || j < 0 || i >= n || j >= n) throw DimensionError("quadratic term references unknown variable");
    if (coef != 0.0) quadratic_.push_back({i, j, coef});
}

void QuadraticProgram::add_linear(int i, double coef) {
    if (i < 0 || i >= static_cast<int>(variables_.size()))
        throw DimensionError("linear term references unknown variable");
    linear_[i] += coef;
}

void QuadraticProgram::set_bounds(int var, double lower, double upper) {
    if (var < 0 || var >= static_cast<int>(variables_.size())) throw DimensionError("unknown variable");
    if (lower > upper) throw DomainError("set_bounds: lower exceeds upper");
    variables_[var].lower = lower;
    variables_[var].upper = upper;
}

std::size_t QuadraticProgram::num_binaries() const {
    return static_cast<std::size_t>(
        std::count_if(variables_.begin(), variables_.end(), [](const Variable& v) { return v.binary; }));
}

std::vector<int> QuadraticProgram::binary_indices() const {
    std::vector<int> out;
    for (std::size_t i = 0; i < variables_.size(); ++i)
        if (variables_[i].binary) out.push_back(static_cast<int>(i));
    return out;
}

double QuadraticProgram::objective(std::span<const double> x) const {
    if (x.size() != variables_.size()) throw DimensionError("objective: wrong point dimension");
    double value = constant_;
    for (const auto& t : quadratic_) value += t.coef * x[t.i] * x[t.j];
    for (std::size_t i = 0; i < x.size(); ++i) value += linear_[i] * x[i];
    return value;
}

double QuadraticProgram::max_violation(std::span<const double> x) const {
    if (x.size() != variables_.size()) throw DimensionError("max_violation: wrong point dimension");
    double worst = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const auto& v = variables_[i];
        worst = std::max({worst, v.lower - x[i], x[i] - v.upper});
        if (v.binary) worst = std::max(worst, std::abs(x[i] - std::round(x[i])));
    }
    for (const auto& c : constraints_) {
        double act = 0.0;
        for (const auto& t : c.terms) act += t.coef * x[t.var];
        switch (c.sense) {
            case Sense::LessEqual: worst = std::max(worst, act - c.rhs); break;
            case Sense::GreaterEqual: worst = std::max(worst, c.rhs - act); break;
            case Sense::Equal: worst = std::max(worst, std::abs(act - c.rhs)); break;
        }
    }
    return worst;
}

void QuadraticProgram::validate() const {
    for (const auto& v : variables_) {
        if (v.lower > v.upper) throw DomainError("variable " + v.name + ": lower bound above upper bound");
        if (v.binary && (v.lower < 0.0 || v.upper > 1.0))
            throw DomainError("binary variable " + v.name + " has bounds outside [0, 1]");
    }
    if (quadratic_.empty()) return;

    // Only variables that appear in the quadratic form need checking.
    std::map<int, int> local;
    for (const auto& t : quadratic_) {
        local.emplace(t.i, 0);
        local.emplace(t.j, 0);
    }
    int k = 0;
    for (auto& [var, idx] : local) idx = k++;
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(k, k);
    for (const auto& t : quadratic_) {
        const int a = local[t.i], b = local[t.j];
        p(a, b) += 0.5 * t.coef;
        p(b, a) += 0.5 * t.coef;
    }
    const double scale = std::max(1.0, p.cwiseAbs().maxCoeff());
    // Pivoted LDLT reports rank-deficient PSD forms as numerical issues, so
    // the smallest eigenvalue decides convexity.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(p, Eigen::EigenvaluesOnly);
    if (eig.info() != Eigen::Success) throw DomainError("objective eigenvalue computation failed");
    if (eig.eigenvalues().minCoeff() < -1e-10 * scale)
        throw DomainError("objective quadratic form is not positive semidefinite");
}

namespace {

std::string fmt(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string lp_name(const std::string& name, std::size_t idx) {
    if (name.empty()) return "x" + std::to_string(idx);
    std::string out;
    for (char c : name) {
        const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '[' ||
                        c == ']' || c == '#';
        out.push_back(ok ? c : '_');
    }
    if (std::isdigit(static_cast<unsigned char>(out.front())) || out.front() == '.') out.insert(0, "_");
    return out;
}

void write_term(std::ostream& out, double coef, const std::string& name, bool first) {
    if (coef < 0.0)
        out << (first ? "- " : " - ");
    else if (!first)
        out << " + ";
    out << fmt(std::abs(coef)) << ' ' << name;
}

}  // namespace

void QuadraticProgram::write_lp(std::ostream& out) const {
    std::vector<std::string> names(variables_.size());
    for (std::size_t i = 0; i < variables_.size(); ++i) names[i] = lp_name(variables_[i].name, i);

    out << "\\ irrig MIQP export\n";
    out << "Minimize\n obj: ";
    bool first = true;
    for (std::size_t i = 0; i < linear_.size(); ++i) {
        if (linear_[i] == 0.0) continue;
        write_term(out, linear_[i], names[i], first);
        first = false;
    }
    if (!quadratic_.empty()) {
        out << (first ? "[ " : " + [ ");
        bool qfirst = true;
        for (const auto& t : quadratic_) {
            const std::string term =
                t.i == t.j ? names[t.i] + " ^ 2" : names[t.i] + " * " + names[t.j];
            write_term(out, 2.0 * t.coef, term, qfirst);
            qfirst = false;
        }
        out << " ] / 2";
        first = false;
    }
    if (constant_ != 0.0 || first) {
        if (!first) out << (constant_ < 0.0 ? " - " : " + ");
        else if (constant_ < 0.0) out << "- ";
        out << fmt(std::abs(constant_));
    }
    out << "\nSubject To\n";
    for (const auto& c : constraints_) {
        out << ' ' << lp_name(c.name, 0) << ": ";
        if (c.terms.empty() && !names.empty()) out << "0 " << names.front();
        bool f = true;
        for (const auto& t : c.terms) {
            write_term(out, t.coef, names[t.var], f);
            f = false;
        }
        const char* op = c.sense == Sense::LessEqual ? " <= " : (c.sense == Sense::Equal ? " = " : " >= ");
        out << op << fmt(c.rhs) << '\n';
    }
    out << "Bounds\n";
    for (std::size_t i = 0; i < variables_.size(); ++i) {
        const auto& v = variables_[i];
        if (v.binary) continue;
        if (std::isinf(v.lower) && std::isinf(v.upper)) {
            out << ' ' << names[i] << " free\n";
        } else if (std::isinf(v.upper)) {
            out << ' ' << names[i] << " >= " << fmt(v.lower) << '\n';
        } else if (std::isinf(v.lower)) {
            out << " -inf <= " << names[i] << " <= " << fmt(v.upper) << '\n';
        } else {
            out << ' ' << fmt(v.lower) << " <= " << names[i] << " <= " << fmt(v.upper) << '\n';
        }
    }
    const auto bins = binary_indices();
    if (!bins.empty()) {
        out << "Binaries\n";
        for (int b : bins) out << ' ' << names[b] << '\n';
    }
    out << "End\n";
}

const char* to_string(SolveStatus status) {
    switch (status) {
        case SolveStatus::Optimal: return "Optimal";
        case SolveStatus::Infeasible: return "Infeasible";
        case SolveStatus::TimeLimit: return "TimeLimit";
        case SolveStatus::NodeLimit: return "NodeLimit";
    }
    return "Unknown";
}

}  // namespace irrig
