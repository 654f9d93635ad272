#include "ser/classifier.hpp"

#include <cmath>

#include "ser/error.hpp"
#include "ser/ops.hpp"

namespace ser {

ClassifierParams init_classifier(std::size_t d_h, Rng rng, std::size_t num_classes) {
    if (d_h == 0) throw ConfigError("init_classifier: d_H must be positive");
    const double k = 1.0 / std::sqrt(static_cast<double>(d_h));
    ClassifierParams p;
    p.w = Tensor::zeros({d_h, num_classes}, true);
    Rng r = rng.derive("classifier.w");
    for (double& v : p.w.values()) v = r.uniform(-k, k);
    p.b = Tensor::zeros({num_classes}, true);
    return p;
}

Tensor logits(const Tensor& h, const ClassifierParams& params) {
    if (h.shape().size() != 1 || h.numel() != params.w.dim(0))
        throw ShapeError("classifier: input " + shape_str(h.shape()) +
                         " does not match weights " + shape_str(params.w.shape()));
    return add(reshape(matmul(reshape(h, {1, h.numel()}), params.w), {params.w.dim(1)}),
               params.b);
}

Tensor predict(const Tensor& h, const ClassifierParams& params) {
    return softmax(logits(h, params));
}

Tensor cross_entropy(const Tensor& predicted, const Tensor& labels) {
    if (predicted.shape().size() != 2 || labels.shape().size() != 2 ||
        predicted.shape() != labels.shape())
        throw ShapeError("cross_entropy: predictions " + shape_str(predicted.shape()) +
                         " vs labels " + shape_str(labels.shape()));
    const std::size_t n = labels.dim(0), c = labels.dim(1);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t ones = 0;
        for (std::size_t j = 0; j < c; ++j) {
            const double y = labels(i, j);
            if (y == 1.0)
                ++ones;
            else if (y != 0.0)
                throw ValidationError("cross_entropy: labels row " + std::to_string(i) +
                                      " is not one-hot");
        }
        if (ones != 1)
            throw ValidationError("cross_entropy: labels row " + std::to_string(i) +
                                  " is not one-hot");
    }
    return scale(sum(mul(labels, log_clamped(predicted, 1e-12))), -1.0);
}

std::vector<std::pair<std::string, Tensor>> named_parameters(const ClassifierParams& params,
                                                             const std::string& prefix) {
    return {{prefix + ".w", params.w}, {prefix + ".b", params.b}};
}

}  // namespace ser
