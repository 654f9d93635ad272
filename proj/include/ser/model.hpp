#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ser/attention.hpp"
#include "ser/classifier.hpp"
#include "ser/config.hpp"
#include "ser/data.hpp"
#include "ser/encoder.hpp"
#include "ser/rng.hpp"

namespace ser {

struct DataDims {
    std::size_t audio_feature_dim = 0;  // width of the audio frames fed in
    std::size_t prosody_dim = 0;
    std::size_t vocab_size = 0;
};

// All learned weights of one model instance: embedding table, the audio and
// text encoders, optional per-hop query projections, and the classifier.
struct ModelParams {
    ModelKind kind = ModelKind::mha2;
    DataDims dims;
    std::optional<Tensor> embedding;  // [V × d_e]
    std::optional<BreParams> audio;
    std::optional<BreParams> text;
    HopProjections hops;
    ClassifierParams classifier;
};

std::size_t fused_dim(ModelKind kind, const RunConfig& config);

ModelParams init_model(const RunConfig& config, const DataDims& dims, Rng rng);

// Stable name -> tensor list; order is deterministic and covers every
// trainable tensor exactly once.
std::vector<std::pair<std::string, Tensor>> named_parameters(const ModelParams& params);
std::vector<Tensor> parameter_list(const ModelParams& params);

// Deep copy (fresh storage, no shared graph state).
ModelParams clone_model(const ModelParams& params);

struct ForwardResult {
    Tensor probabilities;                    // [C]
    Tensor logits;                           // [C]
    std::vector<AttentionResult> hop_trace;  // empty for the single-modality models
};

// One utterance through the configured variant. In training mode dropout is
// applied to encoder output rows and to the fused representation, with masks
// drawn from streams derived off `rng` by site label.
ForwardResult forward_sample(const ModelParams& params, const PaddedSample& sample,
                             double dropout_rate, bool training, const Rng& rng);

}  // namespace ser
