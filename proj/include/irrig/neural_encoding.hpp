/**
 * @file neural_encoding.hpp
 * @brief Exact mixed-integer linear encoding of ReLU networks (big-M) with
 *        interval bound propagation.
 *
 * All bounds here live in the network's scaled input space unless a name
 * says raw. Each unstable hidden neuron z = max(a, 0), a in [lo, hi], lo < 0 < hi,
 * is encoded with a binary e:
 *
 *   z >= a,   z >= 0,   z <= a - lo (1 - e),   z <= hi e.
 */

#pragma once

#include "irrig/miqp.hpp"
#include "irrig/surrogate.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace irrig {

struct BoxBounds {
    std::vector<double> lower;
    std::vector<double> upper;

    std::size_t size() const { return lower.size(); }
    void validate() const;
};

/// Interval image of W x + b over the box.
BoxBounds affine_bounds(const Eigen::MatrixXd& w, const Eigen::VectorXd& b, const BoxBounds& box);

/// Pre-activation bounds of every layer (hidden layers, then the scaled output)
/// for a box of scaled inputs. Post-activation boxes are the pre-activation
/// boxes clipped at zero.
std::vector<BoxBounds> propagate_bounds(const MLPNetwork& net, const BoxBounds& scaled_input_box);

/// Maps a raw input box through the input scaler.
BoxBounds scale_box(const MLPNetwork& net, const BoxBounds& raw_box);

/// Sum of coef * x_var plus a constant.
struct AffineExpr {
    std::vector<LinearTerm> terms;
    double constant = 0.0;

    static AffineExpr constant_value(double v) { return {{}, v}; }
    static AffineExpr variable(int var) { return {{{var, 1.0}}, 0.0}; }
    double evaluate(std::span<const double> x) const;
};

struct EncodingOptions {
    bool eliminate_stable = true;
    double bound_slack = 1e-6;
    /// Multiplies the big-M constants; 1 is exact. Other values exist only
    /// to check that verification catches a broken encoding.
    double big_m_scale = 1.0;
    std::string prefix = "nn";
};

/// Bookkeeping for one hidden neuron.
struct EncodedNeuron {
    int z = -1;       ///< post-activation variable
    int e = -1;       ///< activation binary, -1 for stable neurons
    double lower = 0.0;  ///< pre-activation bounds used (after slack)
    double upper = 0.0;
    std::vector<int> rows;  ///< constraint indices, in emission order
};

struct EncodedNetwork {
    std::vector<std::vector<EncodedNeuron>> layers;  ///< hidden layers
    int output = -1;      ///< raw (unscaled) output variable
    int output_row = -1;  ///< row defining the output
    std::vector<int> binaries;
    std::size_t unstable = 0;
    std::size_t stable_active = 0;
    std::size_t stable_inactive = 0;
    std::vector<BoxBounds> preactivation;  ///< from propagate_bounds, before slack
    double output_lower = 0.0;             ///< raw output bounds
    double output_upper = 0.0;
    std::size_t constraint_count = 0;
};

/// Appends the encoding of one hidden layer. `inputs` are expressions for the
/// layer's input activations. Returns one expression per neuron output.
std::vector<AffineExpr> encode_relu_layer(QuadraticProgram& qp, const Eigen::MatrixXd& w, const Eigen::VectorXd& b,
                                          std::span<const AffineExpr> inputs, const BoxBounds& preact_bounds,
                                          const EncodingOptions& options, std::vector<EncodedNeuron>& neurons,
                                          const std::string& layer_name);

/// Encodes the network into an existing program. `raw_inputs` are affine
/// expressions of raw (unscaled) features and `raw_box` bounds them.
EncodedNetwork encode_network_into(QuadraticProgram& qp, const MLPNetwork& net, std::span<const AffineExpr> raw_inputs,
                                   const BoxBounds& raw_box, const EncodingOptions& options = {});

struct StandaloneEncoding {
    QuadraticProgram qp;
    std::vector<int> inputs;  ///< raw input variables, bounded by the box
    EncodedNetwork network;
};

/// Fresh program with one variable per raw input feature.
StandaloneEncoding encode_network(const MLPNetwork& net, const BoxBounds& raw_box, const EncodingOptions& options = {});

/// Fixes the inputs of a standalone encoding and solves the emitted rows
/// neuron by neuron; returns the unique output value. Throws EncodingError
/// if no activation value satisfies a neuron's rows or if the rows leave
/// the output undetermined.
double solve_encoded_output(const StandaloneEncoding& enc, std::span<const double> raw_input);

struct VerifyOptions {
    EncodingOptions encoding;
    /// Additionally minimise and maximise the output with branch-and-bound
    /// for this many of the samples.
    int solver_samples = 0;
};

/// Largest |encoded output - forward pass| over random inputs in the box.
double verify_encoding(const MLPNetwork& net, const BoxBounds& raw_box, int n_samples, std::uint64_t seed,
                       const VerifyOptions& options = {});

}  // namespace irrig
