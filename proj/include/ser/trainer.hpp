#pragma once

#include <string>
#include <vector>

#include "ser/config.hpp"
#include "ser/data.hpp"
#include "ser/eval.hpp"
#include "ser/model.hpp"
#include "ser/rng.hpp"

namespace ser {

struct EpochLog {
    std::size_t epoch = 0;
    double train_loss_sum = 0.0;   // batch-summed cross-entropy over the epoch
    double train_loss_mean = 0.0;  // per-sample mean
    double dev_wa = 0.0;
    double dev_ua = 0.0;
};

struct TrainResult {
    ModelParams best_params;  // checkpoint with the best dev WA
    std::size_t best_epoch = 0;
    double best_dev_wa = 0.0;
    double best_dev_ua = 0.0;
    std::vector<EpochLog> log;
};

// Tokenizes with the fold vocabulary, validates prosody width against
// config.d_p, pads/truncates to the configured caps.
std::vector<PaddedSample> prepare_samples(const std::vector<Utterance>& utterances,
                                          const std::vector<std::size_t>& indices,
                                          const Vocabulary& vocab, const RunConfig& config);

// Adam + global-norm clipping on the mean batch loss, dropout in train mode,
// early stopping on dev WA with the configured patience. Deterministic for a
// fixed rng stream. Throws RuntimeFailure when the loss goes non-finite.
TrainResult train_model(const std::vector<PaddedSample>& train,
                        const std::vector<PaddedSample>& dev, const RunConfig& config,
                        const DataDims& dims, Rng rng);

std::vector<std::size_t> predict_batch(const ModelParams& params,
                                       const std::vector<PaddedSample>& samples);

EvalReport evaluate_model(const ModelParams& params, const std::vector<PaddedSample>& samples);

}  // namespace ser
