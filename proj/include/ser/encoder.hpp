#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "ser/ops.hpp"
#include "ser/rng.hpp"
#include "ser/tensor.hpp"

namespace ser {

// One recurrence direction. Gate order in the 4*d_h axis: input, forget,
// cell-candidate, output.
struct LstmDirParams {
    Tensor w_x;   // [d_h × 4*d_h]
    Tensor w_h;   // [d_h × 4*d_h]
    Tensor bias;  // [4*d_h]
};

struct BreLayerParams {
    // Learned input projection, present iff the layer input dim != d_h.
    std::optional<Tensor> proj_w;  // [d_in × d_h]
    std::optional<Tensor> proj_b;  // [d_h]
    LstmDirParams forward_dir;
    LstmDirParams backward_dir;
};

struct BreParams {
    std::size_t d_h = 0;
    std::vector<BreLayerParams> layers;
};

struct EncodedSequence {
    Tensor outputs;          // [T × d_out]; zero rows at masked steps
    std::vector<bool> mask;  // true-prefix validity
    Tensor last_state;       // forward state at the last valid step, backward
                             // state at step 0, prosody appended when present
};

struct EncodeOptions {
    double dropout_rate = 0.0;
    bool training = false;
    Rng rng{0};  // stream for the dropout mask over the output rows
};

// Standard LSTM cell: i,f,o = sigmoid, g = tanh, c = f*c_prev + i*g,
// h = o*tanh(c). Returns (h, c).
std::pair<Tensor, Tensor> lstm_step(const Tensor& x, const Tensor& h_prev,
                                    const Tensor& c_prev, const LstmDirParams& p);

// Bidirectional encoding with per-step residual input connection:
// h_t = lstm(h_prev, x~_t) + x~_t in each direction, o_t = [fwd_t ; bwd_t],
// and [o_t ; prosody] when a prosodic vector is supplied. Both recurrences
// run over unmasked steps only; masked output rows are zero.
EncodedSequence encode(const Tensor& x, const std::vector<bool>& mask, const BreParams& params,
                       const Tensor* prosody = nullptr, const EncodeOptions& opts = {});

// Uniform init in [-k, k], k = 1/sqrt(d_h); forget-gate bias slice set to 1.
BreParams init_bre_params(std::size_t d_in, std::size_t d_h, std::size_t num_layers, Rng rng);

std::vector<std::pair<std::string, Tensor>> named_parameters(const BreParams& params,
                                                             const std::string& prefix);

}  // namespace ser
