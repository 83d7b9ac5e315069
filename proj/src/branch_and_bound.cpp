/**
 * @file branch_and_bound.cpp
 * @brief Best-first branch-and-bound over binary variables.
 */

#include "qp_engine.hpp"

#include "irrig/error.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <limits>
#include <queue>
#include <span>

namespace irrig {

namespace {

using Clock = std::chrono::steady_clock;

struct Node {
    double bound = -kInfinity;
    int depth = 0;
    long id = 0;
    std::vector<signed char> fix;  // per binary: -1 free, 0, 1
    std::shared_ptr<const detail::WarmStart> warm;
};

struct NodeOrder {
    bool operator()(const Node& a, const Node& b) const {
        // priority_queue pops the "largest"; we want the smallest bound,
        // then the deepest node, then the oldest.
        if (a.bound != b.bound) return a.bound > b.bound;
        if (a.depth != b.depth) return a.depth < b.depth;
        return a.id > b.id;
    }
};

/// Interval propagation of the model rows onto variable bounds. Only
/// points violating some row are removed, so the search stays exact.
class Propagator {
public:
    Propagator(const QuadraticProgram& qp, std::span<const ReluLink> links) : var_rows_(qp.num_variables()) {
        for (const auto& c : qp.constraints()) {
            Row r;
            r.terms = c.terms;
            r.lower = c.sense == Sense::LessEqual ? -kInfinity : c.rhs;
            r.upper = c.sense == Sense::GreaterEqual ? kInfinity : c.rhs;
            for (const auto& t : r.terms) var_rows_[static_cast<std::size_t>(t.var)].push_back(static_cast<int>(rows_.size()));
            rows_.push_back(std::move(r));
        }
        for (const auto& v : qp.variables()) binary_.push_back(v.binary);
        for (const auto& l : links) {
            const auto n = static_cast<int>(qp.num_variables());
            if (l.output < 0 || l.output >= n || l.indicator < 0 || l.indicator >= n || l.row < 0 ||
                l.row >= static_cast<int>(rows_.size()))
                throw DimensionError("ReLU link refers to a missing variable or row");
            if (!binary_[static_cast<std::size_t>(l.indicator)])
                throw DomainError("ReLU link indicator must be binary");
            const auto& c = qp.constraints()[static_cast<std::size_t>(l.row)];
            if (c.sense != Sense::GreaterEqual) throw DomainError("ReLU link row must be a lower bound on the output");
            Link link{l.output, l.indicator, c.rhs, {}};
            bool has_output = false;
            for (const auto& t : c.terms) {
                if (t.var == l.output && t.coef == 1.0) has_output = true;
                else link.pre.push_back({t.var, -t.coef});
            }
            if (!has_output) throw DomainError("ReLU link row must contain the output with coefficient one");
            links_.push_back(std::move(link));
        }
    }

    /// Returns false when the box contains no point satisfying every row.
    bool run(std::vector<double>& lo, std::vector<double>& hi) const {
        for (int round = 0; round < 50; ++round) {
            if (!run_rows(lo, hi)) return false;
            bool changed = false;
            for (const auto& l : links_) {
                double a_lo = l.constant, a_hi = l.constant;
                for (const auto& t : l.pre) {
                    const double a = lo[static_cast<std::size_t>(t.var)] * t.coef;
                    const double b = hi[static_cast<std::size_t>(t.var)] * t.coef;
                    a_lo += std::min(a, b);
                    a_hi += std::max(a, b);
                }
                if (std::isnan(a_lo) || std::isnan(a_hi)) continue;
                const double margin = static_cast<double>(l.pre.size() + 4) * 4.0 * std::numeric_limits<double>::epsilon() *
                                      (1.0 + std::abs(a_lo) + std::abs(a_hi));
                const auto z = static_cast<std::size_t>(l.output), e = static_cast<std::size_t>(l.indicator);
                const double z_hi = std::max(0.0, a_hi + margin);
                const double z_lo = std::max(0.0, a_lo - margin);
                if (z_hi < hi[z] - std::max(1e-3 * (z_hi - lo[z]), 1e-12 * (1.0 + std::abs(hi[z])))) {
                    hi[z] = z_hi;
                    changed = true;
                }
                if (z_lo > lo[z] + std::max(1e-3 * (hi[z] - z_lo), 1e-12 * (1.0 + std::abs(lo[z])))) {
                    lo[z] = z_lo;
                    changed = true;
                }
                if (lo[z] > hi[z] + 1e-7 * (1.0 + std::abs(lo[z]))) return false;
                if (lo[z] > hi[z]) lo[z] = hi[z];
                if (a_hi + margin < 0.0 && hi[e] > 0.0) {
                    hi[e] = 0.0;
                    changed = true;
                }
                if (a_lo - margin > 0.0 && lo[e] < 1.0) {
                    lo[e] = 1.0;
                    changed = true;
                }
                if (lo[e] > hi[e]) return false;
            }
            if (!changed) break;
        }
        return true;
    }

private:
    bool run_rows(std::vector<double>& lo, std::vector<double>& hi) const {

        std::vector<int> queue(rows_.size());
        std::vector<char> queued(rows_.size(), 1);
        for (std::size_t r = 0; r < rows_.size(); ++r) queue[r] = static_cast<int>(r);
        std::vector<double> term_min, term_max;
        std::size_t head = 0;
        const std::size_t budget = 2000 * rows_.size() + 100;
        for (std::size_t visits = 0; head < queue.size() && visits < budget; ++visits) {
            const int ri = queue[head++];
            queued[static_cast<std::size_t>(ri)] = 0;
            const Row& row = rows_[static_cast<std::size_t>(ri)];
            // Activity range of each term from the bounds at the start of the pass.
            term_min.resize(row.terms.size());
            term_max.resize(row.terms.size());
            double min_fin = 0.0, max_fin = 0.0;
            int min_inf = 0, max_inf = 0;
            for (std::size_t i = 0; i < row.terms.size(); ++i) {
                const auto& t = row.terms[i];
                const double a = lo[static_cast<std::size_t>(t.var)] * t.coef;
                const double b = hi[static_cast<std::size_t>(t.var)] * t.coef;
                term_min[i] = t.coef > 0 ? a : b;
                term_max[i] = t.coef > 0 ? b : a;
                if (std::isfinite(term_min[i])) min_fin += term_min[i]; else ++min_inf;
                if (std::isfinite(term_max[i])) max_fin += term_max[i]; else ++max_inf;
            }
            const double scale = 1.0 + std::abs(min_fin) + std::abs(max_fin);
            // Bound on the floating-point error of the activity sums.
            const double rounding = static_cast<double>(row.terms.size() + 4) * 4.0 * std::numeric_limits<double>::epsilon();
            if (min_inf == 0 && min_fin > row.upper + 1e-9 * scale) return false;
            if (max_inf == 0 && max_fin < row.lower - 1e-9 * scale) return false;
            for (std::size_t i = 0; i < row.terms.size(); ++i) {
                const auto& t = row.terms[i];
                const auto j = static_cast<std::size_t>(t.var);
                const double mn = term_min[i], mx = term_max[i];
                double new_lo = -kInfinity, new_hi = kInfinity;
                // coef x_j <= upper - (min activity of the other terms)
                if (std::isfinite(row.upper)) {
                    double rest = kInfinity;
                    if (min_inf == 0) rest = min_fin - mn;
                    else if (min_inf == 1 && !std::isfinite(mn)) rest = min_fin;
                    if (std::isfinite(rest)) {
                        const double v = (row.upper - rest) / t.coef;
                        if (t.coef > 0) new_hi = v; else new_lo = v;
                    }
                }
                // coef x_j >= lower - (max activity of the other terms)
                if (std::isfinite(row.lower)) {
                    double rest = kInfinity;
                    if (max_inf == 0) rest = max_fin - mx;
                    else if (max_inf == 1 && !std::isfinite(mx)) rest = max_fin;
                    if (std::isfinite(rest)) {
                        const double v = (row.lower - rest) / t.coef;
                        if (t.coef > 0) new_lo = std::max(new_lo, v); else new_hi = std::min(new_hi, v);
                    }
                }
                // Widen by a rounding margin so no feasible point is cut.
                const double margin = rounding * scale / std::abs(t.coef);
                new_lo -= margin;
                new_hi += margin;
                bool changed = false;
                if (binary_[j]) {
                    new_lo = std::ceil(new_lo - 1e-6);
                    new_hi = std::floor(new_hi + 1e-6);
                    if (new_lo > lo[j]) { lo[j] = new_lo; changed = true; }
                    if (new_hi < hi[j]) { hi[j] = new_hi; changed = true; }
                } else {
                    // Require a tenth of a percent of the resulting width so the passes terminate.
                    const double width = std::min(hi[j], new_hi) - std::max(lo[j], new_lo);
                    double magnitude = 1.0;
                    for (double b : {std::max(lo[j], new_lo), std::min(hi[j], new_hi)})
                        if (std::isfinite(b)) magnitude += std::abs(b);
                    const double step = std::isfinite(width) ? std::max(1e-3 * width, 1e-12 * magnitude) : 1e-6 * magnitude;
                    if (new_lo > lo[j] + step || (!std::isfinite(lo[j]) && std::isfinite(new_lo))) { lo[j] = new_lo; changed = true; }
                    if (new_hi < hi[j] - step || (!std::isfinite(hi[j]) && std::isfinite(new_hi))) { hi[j] = new_hi; changed = true; }
                }
                if (lo[j] > hi[j]) {
                    if (binary_[j] || lo[j] > hi[j] + 1e-7 * (1.0 + std::abs(lo[j]))) return false;
                    lo[j] = hi[j] = 0.5 * (lo[j] + hi[j]);
                }
                if (!changed) continue;
                for (int other : var_rows_[j]) {
                    if (other == ri || queued[static_cast<std::size_t>(other)]) continue;
                    queued[static_cast<std::size_t>(other)] = 1;
                    queue.push_back(other);
                }
            }
        }
        return true;
    }

    struct Link {
        int output;
        int indicator;
        double constant;
        std::vector<LinearTerm> pre;
    };
    struct Row {
        std::vector<LinearTerm> terms;
        double lower = -kInfinity;
        double upper = kInfinity;
    };
    std::vector<Row> rows_;
    std::vector<std::vector<int>> var_rows_;
    std::vector<bool> binary_;
    std::vector<Link> links_;
};

detail::QpSettings engine_settings(const BnbOptions& opt) {
    if (opt.relaxation_iterations < 1) throw DomainError("branch-and-bound: relaxation iteration cap must be positive");
    detail::QpSettings s;
    s.max_iterations = opt.relaxation_iterations;
    return s;
}

class Search {
public:
    Search(const QuadraticProgram& qp, const BnbOptions& opt)
        : qp_(qp), opt_(opt), engine_(qp, engine_settings(opt)), propagator_(qp, opt.relu_links), bins_(qp.binary_indices()),
          start_(Clock::now()) {
        for (const auto& v : qp.variables()) {
            lower_.push_back(v.lower);
            upper_.push_back(v.upper);
        }
        if (!opt.branch_priority.empty() && opt.branch_priority.size() != qp.num_variables())
            throw DimensionError("branch_priority must have one entry per variable");
    }

    SolveResult run();

private:
    double elapsed() const { return std::chrono::duration<double>(Clock::now() - start_).count(); }

    /// Variable box of a node, tightened by propagation. Returns false when
    /// the node is infeasible. Binaries fixed by propagation are recorded in fix.
    bool node_box(std::vector<signed char>& fix, std::vector<double>& lo, std::vector<double>& hi) const {
        lo = lower_;
        hi = upper_;
        for (std::size_t k = 0; k < bins_.size(); ++k) {
            const auto b = static_cast<std::size_t>(bins_[k]);
            if (fix[k] >= 0) lo[b] = hi[b] = fix[k];
        }
        if (opt_.propagate && !propagator_.run(lo, hi)) return false;
        for (std::size_t k = 0; k < bins_.size(); ++k) {
            const auto b = static_cast<std::size_t>(bins_[k]);
            if (fix[k] < 0 && lo[b] == hi[b]) fix[k] = static_cast<signed char>(lo[b]);
        }
        return true;
    }

    detail::EngineResult solve_box(const std::vector<double>& lo, const std::vector<double>& hi,
                                   const detail::WarmStart* warm) {
        auto r = engine_.solve(lo, hi, warm, std::max(0.0, opt_.time_limit - elapsed()));
        if (r.status == detail::EngineStatus::Unbounded) throw SolverError("branch-and-bound: relaxation unbounded");
        return r;
    }

    double prune_tolerance() const {
        return std::max(opt_.absolute_gap, opt_.relative_gap * std::abs(incumbent_obj_));
    }

    /// Accepts a point when it is integral and feasible.
    void consider(std::vector<double> x) {
        for (int b : bins_) {
            const double v = x[static_cast<std::size_t>(b)];
            if (std::abs(v - std::round(v)) > opt_.integrality_tolerance) return;
            x[static_cast<std::size_t>(b)] = std::round(v);
        }
        if (qp_.max_violation(x) > 1e-6) return;
        const double obj = qp_.objective(x);
        if (obj < incumbent_obj_ - 1e-12 * std::max(1.0, std::abs(obj))) {
            incumbent_obj_ = obj;
            incumbent_ = std::move(x);
            if (opt_.verbose) std::cerr << "bnb: incumbent " << obj << " at node " << nodes_ << '\n';
        }
    }

    void try_solution(std::vector<double> x) {
        if (x.size() != qp_.num_variables()) throw DimensionError("solution must have one value per variable");
        consider(std::move(x));
    }

    /// Evaluates a full binary assignment by solving the fixed QP.
    void try_assignment(std::vector<signed char> fix, const detail::WarmStart* warm) {
        std::vector<double> lo, hi;
        if (!node_box(fix, lo, hi)) return;
        if (!incumbent_.empty() && engine_.box_bound(lo, hi) >= incumbent_obj_ - prune_tolerance()) return;
        auto r = solve_box(lo, hi, warm);
        if (r.status == detail::EngineStatus::Infeasible || r.x.empty()) return;
        consider(r.x);
    }

    /// Lower bound of a node relaxation: the objective when it converged,
    /// otherwise the certified dual bound.
    static double relaxation_bound(const detail::EngineResult& r) {
        return r.status == detail::EngineStatus::Optimal ? r.objective : r.dual_bound;
    }

    std::vector<signed char> round_relaxed(const std::vector<double>& x) const {
        std::vector<signed char> fix(bins_.size());
        for (std::size_t k = 0; k < bins_.size(); ++k) fix[k] = x[bins_[k]] >= 0.5 ? 1 : 0;
        return fix;
    }

    const QuadraticProgram& qp_;
    const BnbOptions& opt_;
    detail::QpEngine engine_;
    Propagator propagator_;
    std::vector<int> bins_;
    std::vector<double> lower_, upper_;
    Clock::time_point start_;
    double incumbent_obj_ = kInfinity;
    std::vector<double> incumbent_;
    double lost_bound_ = kInfinity;  // smallest bound of nodes closed without a resolved relaxation
    long nodes_ = 0;
};

SolveResult Search::run() {
    std::priority_queue<Node, std::vector<Node>, NodeOrder> open;
    long next_id = 0;
    Node root;
    root.id = next_id++;
    root.fix.assign(bins_.size(), -1);
    for (std::size_t k = 0; k < bins_.size(); ++k) {
        const auto& v = qp_.variables()[bins_[k]];
        if (v.lower == v.upper) root.fix[k] = static_cast<signed char>(v.lower);
        else if (v.lower > 0.0) root.fix[k] = 1;
        else if (v.upper < 1.0) root.fix[k] = 0;
    }
    for (const auto& a : opt_.initial_assignments) {
        if (a.size() != bins_.size()) throw DimensionError("initial assignment must have one value per binary");
        std::vector<signed char> fix(bins_.size());
        for (std::size_t k = 0; k < bins_.size(); ++k) fix[k] = a[k] >= 0.5 ? 1 : 0;
        try_assignment(fix, nullptr);
    }
    for (const auto& x : opt_.initial_solutions) try_solution(x);
    open.push(std::move(root));

    SolveResult result;
    bool limit_hit = false;
    SolveStatus limit_status = SolveStatus::TimeLimit;
    constexpr std::size_t kWarmStartCap = 4000;

    while (!open.empty()) {
        const double global_lb = open.top().bound;
        if (!incumbent_.empty() && global_lb >= incumbent_obj_ - prune_tolerance()) break;
        if (elapsed() >= opt_.time_limit) {
            limit_hit = true;
            limit_status = SolveStatus::TimeLimit;
            break;
        }
        if (nodes_ >= opt_.node_limit) {
            limit_hit = true;
            limit_status = SolveStatus::NodeLimit;
            break;
        }
        Node node = open.top();
        open.pop();
        ++nodes_;

        std::vector<double> lo, hi;
        if (!node_box(node.fix, lo, hi)) continue;
        // Propagation often pins the box down to a single point.
        {
            std::vector<double> point(lo.size());
            for (std::size_t j = 0; j < lo.size(); ++j) point[j] = std::clamp(0.0, lo[j], hi[j]);
            if (opt_.solution_heuristic) {
                if (auto cand = opt_.solution_heuristic(point)) try_solution(std::move(*cand));
            }
            consider(std::move(point));
        }
        double bound = std::max(node.bound, engine_.box_bound(lo, hi));
        if (!incumbent_.empty() && bound >= incumbent_obj_ - prune_tolerance()) continue;

        auto r = solve_box(lo, hi, node.warm.get());
        if (r.status == detail::EngineStatus::Infeasible) continue;
        bound = std::max(bound, relaxation_bound(r));
        if (r.status != detail::EngineStatus::Optimal && elapsed() >= opt_.time_limit) {
            // Interrupted by the deadline: keep the node open with what was proven.
            node.bound = bound;
            open.push(std::move(node));
            limit_hit = true;
            limit_status = SolveStatus::TimeLimit;
            break;
        }
        if (!incumbent_.empty() && bound >= incumbent_obj_ - prune_tolerance()) continue;

        // Integrality check and branching variable choice.
        int branch = -1;
        double best_frac = -1.0;
        int best_prio = std::numeric_limits<int>::min();
        for (std::size_t k = 0; k < bins_.size(); ++k) {
            if (node.fix[k] >= 0) continue;
            const double v = r.x[bins_[k]];
            const double frac = std::min(v, 1.0 - v);
            const int prio = opt_.branch_priority.empty() ? 0 : opt_.branch_priority[bins_[k]];
            // Unconverged relaxations carry no integrality information: any
            // free binary is a branching candidate.
            if (frac <= opt_.integrality_tolerance && r.status == detail::EngineStatus::Optimal) continue;
            const double score = 0.5 - std::abs(v - 0.5);
            if (prio > best_prio || (prio == best_prio && score > best_frac + 1e-12)) {
                best_prio = prio;
                best_frac = score;
                branch = static_cast<int>(k);
            }
        }

        if (branch < 0) {
            // Either every binary is fixed or the converged relaxation is integral.
            consider(r.x);
            // A leaf that neither converged nor yielded an accepted point keeps its bound.
            if (r.status != detail::EngineStatus::Optimal || bound < incumbent_obj_ - prune_tolerance())
                lost_bound_ = std::min(lost_bound_, bound);
            continue;
        }

        // Primal heuristics.
        if (nodes_ == 1 || (opt_.heuristic_frequency > 0 && nodes_ % opt_.heuristic_frequency == 0)) {
            auto rounded = round_relaxed(r.x);
            for (std::size_t k = 0; k < bins_.size(); ++k)
                if (node.fix[k] >= 0) rounded[k] = node.fix[k];
            try_assignment(rounded, r.warm.get());
            if (opt_.heuristic) {
                if (auto cand = opt_.heuristic(r.x)) {
                    if (cand->size() != bins_.size())
                        throw DimensionError("heuristic must return one value per binary");
                    std::vector<signed char> fix(bins_.size());
                    for (std::size_t k = 0; k < bins_.size(); ++k) fix[k] = (*cand)[k] >= 0.5 ? 1 : 0;
                    try_assignment(fix, r.warm.get());
                }
            }
            if (opt_.solution_heuristic) {
                if (auto cand = opt_.solution_heuristic(r.x)) try_solution(std::move(*cand));
            }
            if (!incumbent_.empty() && bound >= incumbent_obj_ - prune_tolerance()) continue;
        }

        auto warm = open.size() < kWarmStartCap ? r.warm : nullptr;
        for (signed char value : {static_cast<signed char>(0), static_cast<signed char>(1)}) {
            Node child;
            child.bound = bound;
            child.depth = node.depth + 1;
            child.id = next_id++;
            child.fix = node.fix;
            child.fix[branch] = value;
            child.warm = warm;
            open.push(std::move(child));
        }
    }

    result.nodes = nodes_;
    result.seconds = elapsed();
    double lb = std::min(open.empty() ? kInfinity : open.top().bound, lost_bound_);
    if (incumbent_.empty()) {
        if (limit_hit) result.status = limit_status;
        else result.status = std::isfinite(lost_bound_) ? SolveStatus::NodeLimit : SolveStatus::Infeasible;
        result.best_bound = lb;
        return result;
    }
    lb = std::min(lb, incumbent_obj_);
    result.x = incumbent_;
    result.objective = incumbent_obj_;
    result.best_bound = lb;
    result.relative_gap = std::max(0.0, incumbent_obj_ - lb) / std::max(std::abs(incumbent_obj_), 1e-10);
    if (limit_hit) result.status = limit_status;
    else if (incumbent_obj_ - lb <= prune_tolerance()) result.status = SolveStatus::Optimal;
    else result.status = SolveStatus::NodeLimit;  // unresolved leaves leave a gap
    return result;
}

}  // namespace

SolveResult branch_and_bound(const QuadraticProgram& qp, const BnbOptions& options) {
    qp.validate();
    if (options.relative_gap < 0.0 || options.absolute_gap < 0.0) throw DomainError("gaps must be nonnegative");
    Search search(qp, options);
    return search.run();
}

SolveResult enumerate_exhaustive(const QuadraticProgram& qp) {
    qp.validate();
    const auto bins = qp.binary_indices();
    if (bins.size() > 20) throw DomainError("enumerate_exhaustive: more than 20 binaries");
    const auto start = Clock::now();
    detail::QpEngine engine(qp);
    std::vector<double> lo, hi;
    for (const auto& v : qp.variables()) {
        lo.push_back(v.lower);
        hi.push_back(v.upper);
    }
    SolveResult best;
    const long patterns = 1L << bins.size();
    for (long p = 0; p < patterns; ++p) {
        auto l = lo, h = hi;
        bool allowed = true;
        for (std::size_t k = 0; k < bins.size(); ++k) {
            const double v = (p >> k) & 1L ? 1.0 : 0.0;
            if (v < lo[bins[k]] || v > hi[bins[k]]) allowed = false;
            l[bins[k]] = h[bins[k]] = v;
        }
        if (!allowed) continue;
        const auto r = engine.solve(l, h);
        if (r.status != detail::EngineStatus::Optimal) continue;
        if (r.objective < best.objective - 1e-12 * std::max(1.0, std::abs(r.objective))) {
            best.objective = r.objective;
            best.x = r.x;
        }
    }
    best.nodes = patterns;
    best.seconds = std::chrono::duration<double>(Clock::now() - start).count();
    if (best.has_solution()) {
        best.status = SolveStatus::Optimal;
        best.best_bound = best.objective;
        best.relative_gap = 0.0;
    }
    return best;
}

}  // namespace irrig
