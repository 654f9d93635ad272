#include "ser/optim.hpp"

#include <cmath>
#include <string>

#include "ser/error.hpp"

namespace ser {

double clip_global_norm(const std::vector<Tensor>& params, const ClipConfig& cfg) {
    if (cfg.max_norm <= 0.0)
        throw ConfigError("clip_global_norm: max_norm must be positive, got " +
                          std::to_string(cfg.max_norm));
    double sq = 0.0;
    for (const Tensor& p : params)
        for (double g : p.grad()) sq += g * g;
    const double norm = std::sqrt(sq);
    if (norm > cfg.max_norm) {
        const double s = cfg.max_norm / norm;
        for (const Tensor& p : params)
            for (double& g : p.grad()) g *= s;
    }
    return norm;
}

void adam_step(const std::vector<Tensor>& params, OptimizerState& state) {
    if (state.first_moment.empty()) {
        state.first_moment.resize(params.size());
        state.second_moment.resize(params.size());
        for (std::size_t i = 0; i < params.size(); ++i) {
            state.first_moment[i].assign(params[i].numel(), 0.0);
            state.second_moment[i].assign(params[i].numel(), 0.0);
        }
    }
    if (state.first_moment.size() != params.size())
        throw ShapeError("adam_step: state holds " + std::to_string(state.first_moment.size()) +
                         " moment arrays for " + std::to_string(params.size()) + " parameters");

    state.step_count += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));

    for (std::size_t i = 0; i < params.size(); ++i) {
        const Tensor& p = params[i];
        if (state.first_moment[i].size() != p.numel())
            throw ShapeError("adam_step: moment array " + std::to_string(i) +
                             " is not shape-congruent with its parameter");
        auto& m = state.first_moment[i];
        auto& v = state.second_moment[i];
        const auto& g = p.grad();
        auto& w = p.values();
        for (std::size_t j = 0; j < w.size(); ++j) {
            m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g[j];
            v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g[j] * g[j];
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            w[j] -= state.learning_rate * mhat / (std::sqrt(vhat) + state.epsilon);
        }
    }
}

}  // namespace ser
