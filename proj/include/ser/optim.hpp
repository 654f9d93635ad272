#pragma once

#include <cstdint>
#include <vector>

#include "ser/tensor.hpp"

namespace ser {

struct ClipConfig {
    double max_norm = 1.0;
};

// Adam with bias correction. Moment arrays are allocated on first apply and
// stay shape-congruent with their parameters; step_count increments by exactly
// one per apply.
struct OptimizerState {
    std::uint64_t step_count = 0;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::vector<std::vector<double>> first_moment;
    std::vector<std::vector<double>> second_moment;
};

// Scales every grad by max_norm/g when the global L2 norm g exceeds max_norm;
// otherwise leaves them unchanged. Returns the pre-clip norm. Idempotent.
double clip_global_norm(const std::vector<Tensor>& params, const ClipConfig& cfg);

void adam_step(const std::vector<Tensor>& params, OptimizerState& state);

}  // namespace ser
