#pragma once

#include <cstdint>
#include <vector>

#include "ser/rng.hpp"
#include "ser/tensor.hpp"

namespace ser {

// All ops build reverse-mode graph nodes when any operand requires grad.
// Shapes are validated eagerly; mismatches throw ShapeError naming both sides.

Tensor matmul(const Tensor& a, const Tensor& b);  // [m×k]·[k×n] → [m×n]

Tensor add(const Tensor& a, const Tensor& b);  // elementwise, shape-congruent
Tensor mul(const Tensor& a, const Tensor& b);  // elementwise (Hadamard)
Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);

// Concatenation along the last (only) axis of 1-D tensors.
Tensor concat(const std::vector<Tensor>& parts);
Tensor concat(const Tensor& a, const Tensor& b);

Tensor slice(const Tensor& x, std::size_t offset, std::size_t len);  // 1-D
Tensor row(const Tensor& x, std::size_t r);                          // 2-D → 1-D
Tensor reshape(const Tensor& x, Shape shape);                        // numel preserved

// Rows (1-D, equal length) stacked into [total_rows × d]; missing rows are zero.
Tensor stack_rows(const std::vector<Tensor>& rows, std::size_t total_rows);

// Numerically stabilized softmax over a 1-D tensor. Masked positions are
// exactly 0 in the output; normalization runs over unmasked positions only.
Tensor softmax(const Tensor& x, const std::vector<bool>* mask = nullptr);

Tensor sum(const Tensor& x);             // scalar
Tensor scale(const Tensor& x, double c);

// log(max(x, floor)); the clamped region has zero derivative.
Tensor log_clamped(const Tensor& x, double floor = 1e-12);

// Inverted dropout: in training each element is zeroed with probability
// `rate` and survivors are scaled by 1/(1-rate); in inference it is the
// identity. The mask is a pure function of the rng stream handed in, which
// callers derive from (seed, site label, step).
Tensor dropout(const Tensor& x, double rate, bool training, Rng rng);

// Embedding lookup: table [V × d_e], ids → [T × d_e]. Id 0 is PAD and yields
// a zero row with no gradient flow; other rows are trainable.
Tensor embed(const Tensor& table, const std::vector<int>& ids);

}  // namespace ser
