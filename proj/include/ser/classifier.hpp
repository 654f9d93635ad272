#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ser/rng.hpp"
#include "ser/tensor.hpp"

namespace ser {

inline constexpr std::size_t kNumClasses = 4;

struct ClassifierParams {
    Tensor w;  // [d_H × C]
    Tensor b;  // [C]
};

// W uniform in [-1/sqrt(d_H), 1/sqrt(d_H)], b zero.
ClassifierParams init_classifier(std::size_t d_h, Rng rng, std::size_t num_classes = kNumClasses);

Tensor logits(const Tensor& h, const ClassifierParams& params);

// softmax(H^T W + b); rows sum to 1.
Tensor predict(const Tensor& h, const ClassifierParams& params);

// L = -sum_i sum_c y_ic * log(max(p_ic, 1e-12)), summed over the batch.
// `predicted` rows must be probability distributions, `labels` one-hot rows.
Tensor cross_entropy(const Tensor& predicted, const Tensor& labels);

std::vector<std::pair<std::string, Tensor>> named_parameters(const ClassifierParams& params,
                                                             const std::string& prefix);

}  // namespace ser
