/**
 * @file neural_encoding.cpp
 */

#include "irrig/neural_encoding.hpp"

#include "irrig/error.hpp"

#include <cmath>
#include <limits>
#include <random>

namespace irrig {

void BoxBounds::validate() const {
    if (lower.size() != upper.size()) throw DimensionError("box: lower and upper differ in length");
    for (std::size_t i = 0; i < lower.size(); ++i) {
        if (std::isnan(lower[i]) || std::isnan(upper[i]) || lower[i] > upper[i])
            throw DomainError("box: lower bound above upper bound at coordinate " + std::to_string(i));
    }
}

double AffineExpr::evaluate(std::span<const double> x) const {
    double v = constant;
    for (const auto& t : terms) v += t.coef * x[t.var];
    return v;
}

BoxBounds affine_bounds(const Eigen::MatrixXd& w, const Eigen::VectorXd& b, const BoxBounds& box) {
    box.validate();
    if (static_cast<std::size_t>(w.cols()) != box.size() || w.rows() != b.size())
        throw DimensionError("affine_bounds: shape mismatch");
    BoxBounds out;
    out.lower.resize(static_cast<std::size_t>(w.rows()));
    out.upper.resize(static_cast<std::size_t>(w.rows()));
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
        double lo = b(i), hi = b(i);
        for (Eigen::Index j = 0; j < w.cols(); ++j) {
            const double a = w(i, j);
            const auto jj = static_cast<std::size_t>(j);
            if (a >= 0.0) {
                lo += a * box.lower[jj];
                hi += a * box.upper[jj];
            } else {
                lo += a * box.upper[jj];
                hi += a * box.lower[jj];
            }
        }
        out.lower[static_cast<std::size_t>(i)] = lo;
        out.upper[static_cast<std::size_t>(i)] = hi;
    }
    return out;
}

std::vector<BoxBounds> propagate_bounds(const MLPNetwork& net, const BoxBounds& scaled_input_box) {
    if (static_cast<int>(scaled_input_box.size()) != net.num_inputs())
        throw DimensionError("propagate_bounds: box dimension does not match the network input");
    std::vector<BoxBounds> out;
    BoxBounds box = scaled_input_box;
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        BoxBounds pre = affine_bounds(net.weights[l], net.biases[l], box);
        out.push_back(pre);
        if (l + 1 < net.weights.size()) {
            for (auto& v : pre.lower) v = std::max(v, 0.0);
            for (auto& v : pre.upper) v = std::max(v, 0.0);
            box = std::move(pre);
        }
    }
    return out;
}

BoxBounds scale_box(const MLPNetwork& net, const BoxBounds& raw_box) {
    raw_box.validate();
    if (static_cast<int>(raw_box.size()) != net.num_inputs())
        throw DimensionError("scale_box: box dimension does not match the network input");
    BoxBounds s = raw_box;
    for (std::size_t i = 0; i < s.size(); ++i) {
        s.lower[i] = net.input_scaler.scale(i, raw_box.lower[i]);
        s.upper[i] = net.input_scaler.scale(i, raw_box.upper[i]);
    }
    return s;
}

std::vector<AffineExpr> encode_relu_layer(QuadraticProgram& qp, const Eigen::MatrixXd& w, const Eigen::VectorXd& b,
                                          std::span<const AffineExpr> inputs, const BoxBounds& preact_bounds,
                                          const EncodingOptions& options, std::vector<EncodedNeuron>& neurons,
                                          const std::string& layer_name) {
    preact_bounds.validate();
    if (static_cast<std::size_t>(w.cols()) != inputs.size() || static_cast<std::size_t>(w.rows()) != preact_bounds.size())
        throw DimensionError("encode_relu_layer: shape mismatch");
    std::vector<AffineExpr> outputs;
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
        const auto ii = static_cast<std::size_t>(i);
        // Pre-activation a = sum_j W_ij in_j + b_i as (terms, constant).
        std::vector<LinearTerm> pre;
        double pre_const = b(i);
        for (Eigen::Index j = 0; j < w.cols(); ++j) {
            const double wij = w(i, j);
            if (wij == 0.0) continue;
            const auto& in = inputs[static_cast<std::size_t>(j)];
            pre_const += wij * in.constant;
            for (const auto& t : in.terms) pre.push_back({t.var, wij * t.coef});
        }
        auto minus_pre = [&](int z) {
            std::vector<LinearTerm> terms{{z, 1.0}};
            for (const auto& t : pre) terms.push_back({t.var, -t.coef});
            return terms;
        };
        const double lo = preact_bounds.lower[ii];
        const double hi = preact_bounds.upper[ii];
        const std::string name = layer_name + "_" + std::to_string(i);
        EncodedNeuron neuron;
        if (options.eliminate_stable && lo >= 0.0) {
            neuron.lower = std::max(0.0, lo - options.bound_slack);
            neuron.upper = hi + options.bound_slack;
            neuron.z = qp.add_variable("z_" + name, neuron.lower, neuron.upper);
            neuron.rows.push_back(qp.add_constraint(minus_pre(neuron.z), Sense::Equal, pre_const, "act_" + name));
            outputs.push_back(AffineExpr::variable(neuron.z));
        } else if (options.eliminate_stable && hi <= 0.0) {
            neuron.lower = lo - options.bound_slack;
            neuron.upper = 0.0;
            neuron.z = qp.add_variable("z_" + name, 0.0, 0.0);
            neuron.rows.push_back(qp.add_constraint({{neuron.z, 1.0}}, Sense::Equal, 0.0, "off_" + name));
            outputs.push_back(AffineExpr::constant_value(0.0));
        } else {
            const double big_l = (lo - options.bound_slack) * options.big_m_scale;
            const double big_u = (hi + options.bound_slack) * options.big_m_scale;
            neuron.lower = big_l;
            neuron.upper = big_u;
            neuron.z = qp.add_variable("z_" + name, 0.0, std::max(0.0, big_u));
            neuron.e = qp.add_binary("e_" + name);
            // z >= a
            neuron.rows.push_back(qp.add_constraint(minus_pre(neuron.z), Sense::GreaterEqual, pre_const, "ge_" + name));
            // z >= 0
            neuron.rows.push_back(qp.add_constraint({{neuron.z, 1.0}}, Sense::GreaterEqual, 0.0, "nn_" + name));
            // z <= a - L (1 - e)
            auto t3 = minus_pre(neuron.z);
            t3.push_back({neuron.e, -big_l});
            neuron.rows.push_back(qp.add_constraint(std::move(t3), Sense::LessEqual, pre_const - big_l, "lo_" + name));
            // z <= U e
            neuron.rows.push_back(
                qp.add_constraint({{neuron.z, 1.0}, {neuron.e, -big_u}}, Sense::LessEqual, 0.0, "up_" + name));
            outputs.push_back(AffineExpr::variable(neuron.z));
        }
        neurons.push_back(std::move(neuron));
    }
    return outputs;
}

EncodedNetwork encode_network_into(QuadraticProgram& qp, const MLPNetwork& net, std::span<const AffineExpr> raw_inputs,
                                   const BoxBounds& raw_box, const EncodingOptions& options) {
    net.validate();
    if (net.weights.empty()) throw EncodingError("encode_network: empty network");
    if (static_cast<int>(raw_inputs.size()) != net.num_inputs())
        throw DimensionError("encode_network: wrong number of input expressions");
    if (options.bound_slack < 0.0) throw DomainError("encode_network: negative bound slack");
    const std::size_t rows_before = qp.num_constraints();

    EncodedNetwork enc;
    const BoxBounds scaled_box = scale_box(net, raw_box);
    enc.preactivation = propagate_bounds(net, scaled_box);

    std::vector<AffineExpr> act;
    for (std::size_t i = 0; i < raw_inputs.size(); ++i) {
        const double inv = 1.0 / net.input_scaler.range[i];
        AffineExpr s;
        s.constant = (raw_inputs[i].constant - net.input_scaler.min[i]) * inv;
        for (const auto& t : raw_inputs[i].terms) s.terms.push_back({t.var, t.coef * inv});
        act.push_back(std::move(s));
    }
    const std::size_t hidden = net.weights.size() - 1;
    for (std::size_t l = 0; l < hidden; ++l) {
        std::vector<EncodedNeuron> neurons;
        act = encode_relu_layer(qp, net.weights[l], net.biases[l], act, enc.preactivation[l], options, neurons,
                                options.prefix + "_l" + std::to_string(l + 1));
        for (const auto& n : neurons) {
            if (n.e >= 0) {
                ++enc.unstable;
                enc.binaries.push_back(n.e);
            } else if (n.upper > 0.0) {
                ++enc.stable_active;
            } else {
                ++enc.stable_inactive;
            }
        }
        enc.layers.push_back(std::move(neurons));
    }

    // Raw output y = min + range (W a + b).
    const auto& w = net.weights.back();
    const double range = net.output_scaler.range[0];
    const double omin = net.output_scaler.min[0];
    const auto& out_box = enc.preactivation.back();
    enc.output_lower = omin + range * (out_box.lower[0] - options.bound_slack);
    enc.output_upper = omin + range * (out_box.upper[0] + options.bound_slack);
    enc.output = qp.add_variable(options.prefix + "_out", enc.output_lower, enc.output_upper);
    std::vector<LinearTerm> terms{{enc.output, 1.0}};
    double rhs = omin + range * net.biases.back()(0);
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
        const double c = range * w(0, j);
        if (c == 0.0) continue;
        const auto& in = act[static_cast<std::size_t>(j)];
        rhs += c * in.constant;
        for (const auto& t : in.terms) terms.push_back({t.var, -c * t.coef});
    }
    enc.output_row = qp.add_constraint(std::move(terms), Sense::Equal, rhs, options.prefix + "_out_def");
    enc.constraint_count = qp.num_constraints() - rows_before;
    return enc;
}

StandaloneEncoding encode_network(const MLPNetwork& net, const BoxBounds& raw_box, const EncodingOptions& options) {
    raw_box.validate();
    if (static_cast<int>(raw_box.size()) != net.num_inputs())
        throw DimensionError("encode_network: box dimension does not match the network input");
    StandaloneEncoding out;
    std::vector<AffineExpr> inputs;
    for (std::size_t i = 0; i < raw_box.size(); ++i) {
        const int v = out.qp.add_variable("in_" + std::to_string(i), raw_box.lower[i], raw_box.upper[i]);
        out.inputs.push_back(v);
        inputs.push_back(AffineExpr::variable(v));
    }
    out.network = encode_network_into(out.qp, net, inputs, raw_box, options);
    return out;
}

namespace {

/// Feasible interval of `target` on one row given known values of all other variables.
void tighten(const Constraint& row, int target, const std::vector<double>& val, double& lo, double& hi) {
    double a = 0.0, rest = 0.0, mag = std::abs(row.rhs);
    for (const auto& t : row.terms) {
        if (t.var == target) {
            a += t.coef;
            continue;
        }
        if (std::isnan(val[static_cast<std::size_t>(t.var)]))
            throw EncodingError("encoded row '" + row.name + "' references an undetermined variable");
        rest += t.coef * val[static_cast<std::size_t>(t.var)];
        mag += std::abs(t.coef * val[static_cast<std::size_t>(t.var)]);
    }
    const double tol = 1e-9 * (1.0 + mag);
    const double r = row.rhs - rest;
    if (a == 0.0) {
        const bool ok = (row.sense == Sense::LessEqual && 0.0 <= r + tol) ||
                        (row.sense == Sense::GreaterEqual && 0.0 >= r - tol) ||
                        (row.sense == Sense::Equal && std::abs(r) <= tol);
        if (!ok) hi = -std::numeric_limits<double>::infinity();
        return;
    }
    const double bound = r / a;
    const double btol = tol / std::abs(a);
    const bool upper = (row.sense == Sense::LessEqual) == (a > 0.0);
    if (row.sense == Sense::Equal) {
        lo = std::max(lo, bound - btol);
        hi = std::min(hi, bound + btol);
    } else if (upper) {
        hi = std::min(hi, bound + btol);
    } else {
        lo = std::max(lo, bound - btol);
    }
}

double determine(const QuadraticProgram& qp, int z, const std::vector<int>& rows, std::vector<double>& val,
                 const std::string& what) {
    const auto& var = qp.variables()[static_cast<std::size_t>(z)];
    double lo = var.lower - 1e-9 * (1.0 + std::abs(var.lower));
    double hi = var.upper + 1e-9 * (1.0 + std::abs(var.upper));
    for (int r : rows) tighten(qp.constraints()[static_cast<std::size_t>(r)], z, val, lo, hi);
    if (lo > hi) throw EncodingError(what + ": rows are infeasible for the fixed input");
    if (hi - lo > 1e-7) throw EncodingError(what + ": rows do not determine the value");
    return 0.5 * (lo + hi);
}

}  // namespace

double solve_encoded_output(const StandaloneEncoding& enc, std::span<const double> raw_input) {
    const auto& qp = enc.qp;
    if (raw_input.size() != enc.inputs.size()) throw DimensionError("solve_encoded_output: wrong input length");
    std::vector<double> val(qp.num_variables(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t i = 0; i < enc.inputs.size(); ++i) val[static_cast<std::size_t>(enc.inputs[i])] = raw_input[i];

    for (std::size_t l = 0; l < enc.network.layers.size(); ++l) {
        for (std::size_t k = 0; k < enc.network.layers[l].size(); ++k) {
            const auto& n = enc.network.layers[l][k];
            const std::string what = "layer " + std::to_string(l + 1) + " neuron " + std::to_string(k);
            if (n.e < 0) {
                val[static_cast<std::size_t>(n.z)] = determine(qp, n.z, n.rows, val, what);
                continue;
            }
            // Try both activation values; the rows must admit exactly one z.
            double z_value = 0.0;
            int feasible = 0;
            for (double e : {0.0, 1.0}) {
                val[static_cast<std::size_t>(n.e)] = e;
                try {
                    const double z = determine(qp, n.z, n.rows, val, what);
                    if (feasible > 0 && std::abs(z - z_value) > 1e-7)
                        throw EncodingError(what + ": both activation values feasible with different outputs");
                    z_value = z;
                    ++feasible;
                } catch (const EncodingError& err) {
                    if (std::string(err.what()).find("different outputs") != std::string::npos) throw;
                }
            }
            if (feasible == 0) throw EncodingError(what + ": no activation value satisfies the rows");
            val[static_cast<std::size_t>(n.z)] = z_value;
        }
    }
    return determine(qp, enc.network.output, {enc.network.output_row}, val, "output");
}

double verify_encoding(const MLPNetwork& net, const BoxBounds& raw_box, int n_samples, std::uint64_t seed,
                       const VerifyOptions& options) {
    if (n_samples < 1) throw DomainError("verify_encoding: need at least one sample");
    const auto enc = encode_network(net, raw_box, options.encoding);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double worst = 0.0;
    std::vector<double> x(raw_box.size());
    for (int s = 0; s < n_samples; ++s) {
        for (std::size_t i = 0; i < x.size(); ++i)
            x[i] = raw_box.lower[i] + unit(rng) * (raw_box.upper[i] - raw_box.lower[i]);
        const double reference = predict_one_step(net, x);
        worst = std::max(worst, std::abs(solve_encoded_output(enc, x) - reference));
        if (s < options.solver_samples) {
            for (double sign : {1.0, -1.0}) {
                QuadraticProgram qp = enc.qp;
                for (std::size_t i = 0; i < x.size(); ++i) qp.set_bounds(enc.inputs[i], x[i], x[i]);
                qp.add_linear(enc.network.output, sign);
                const auto r = branch_and_bound(qp);
                if (r.status != SolveStatus::Optimal)
                    throw EncodingError("verify_encoding: encoded program infeasible at sample " + std::to_string(s));
                worst = std::max(worst, std::abs(r.x[static_cast<std::size_t>(enc.network.output)] - reference));
            }
        }
    }
    return worst;
}

}  // namespace irrig
