#pragma once

#include <vector>

#include "doser/kernels.hpp"
#include "doser/mat.hpp"
#include "doser/rng.hpp"

namespace doser {

/// Fixed-topology dense network. Weights live in one flat array laid out as
/// [W0 | b0 | W1 | b1 | ...] with W row-major (in x out), so optimizer state
/// and checkpoints treat the whole model as a single vector.
struct Mlp {
    std::vector<size_t> dims;         // input, hiddens..., output
    std::vector<Activation> acts;     // one per non-input layer
    double dropout_prob = 0.0;        // inverted dropout on hidden activations
    std::vector<double> weights;

    static Mlp make(std::vector<size_t> layer_dims, Activation hidden, Activation output,
                    double dropout = 0.0);

    size_t layer_count() const { return dims.size() - 1; }
    size_t input_dim() const { return dims.front(); }
    size_t output_dim() const { return dims.back(); }
    size_t weight_count() const;
    size_t weight_offset(size_t layer) const;  // start of W for `layer`
    size_t bias_offset(size_t layer) const;    // start of b for `layer`

    /// Glorot-uniform init: +-sqrt(6 / (fan_in + fan_out)), biases zero.
    void init_glorot(Rng& rng);
};

/// Per-layer scratch reused across forward/backward calls. Holding one of
/// these per training loop keeps the hot path allocation-free.
struct MlpWorkspace {
    std::vector<Mat> pre;    // pre-activation per layer
    std::vector<Mat> post;   // post-activation (and post-dropout) per layer
    std::vector<Mat> mask;   // dropout multipliers, hidden layers only
    std::vector<Mat> delta;  // backprop scratch
    Mat input_grad;
    std::vector<double> grad;  // dL/dweights, congruent to Mlp::weights
};

/// Batched forward pass. With train_mode and dropout_prob > 0, dropout masks
/// are drawn from rng and activations are scaled by 1/(1-p) (inverted
/// dropout), so inference applies no rescaling. Returns the output matrix
/// held inside ws.
const Mat& mlp_forward(const Mlp& m, const Mat& x, bool train_mode, Rng* rng, MlpWorkspace& ws);

/// Reverse pass for the forward that filled ws. Fills ws.grad with dL/dw for
/// L = <upstream, output>; with want_input_grad also fills ws.input_grad.
void mlp_backward(const Mlp& m, const Mat& x, const Mat& upstream, MlpWorkspace& ws,
                  bool want_input_grad = false);

/// One-shot conveniences (no dropout path).
Mat forward(const Mlp& m, const Mat& x);
std::vector<double> backward(const Mlp& m, const Mat& x, const Mat& upstream);

/// Forward for a single input row.
std::vector<double> forward_one(const Mlp& m, std::span<const double> x);

}  // namespace doser
