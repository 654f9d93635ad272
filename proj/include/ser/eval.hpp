#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "ser/config.hpp"
#include "ser/data.hpp"

namespace ser {

struct EvalReport {
    double wa = 0.0;  // overall fraction correct
    double ua = 0.0;  // mean per-class recall over classes with support
    std::array<std::array<std::uint64_t, 4>, 4> confusion{};  // [true][predicted]
    std::array<std::array<double, 4>, 4> confusion_pct{};     // rows sum to 100
    std::array<bool, 4> zero_support{};

    nlohmann::json to_json() const;
    std::string to_text() const;
};

// Labels as class indices 0..3. Throws on empty or mismatched inputs.
EvalReport compute_metrics(const std::vector<std::size_t>& true_labels,
                           const std::vector<std::size_t>& predicted_labels);

struct FoldOutcome {
    int fold_index = 0;
    bool failed = false;
    std::string diagnostics;  // set when failed
    EvalReport report;
    std::size_t test_count = 0;
    std::size_t best_epoch = 0;
    double best_dev_wa = 0.0;
};

struct CrossValidationResult {
    std::vector<FoldOutcome> folds;
    double mean_wa = 0.0;  // arithmetic mean over evaluated folds
    double mean_ua = 0.0;
    std::size_t evaluated_folds = 0;
    std::size_t excluded_folds = 0;
};

// Per fold: train on the train split with best-dev-WA selection, evaluate the
// test split. Diverging folds (non-finite loss) are marked failed and
// excluded from the aggregate. Fold seeds derive from config.seed.
CrossValidationResult cross_validate(const std::vector<Utterance>& utterances,
                                     std::size_t feature_dim, const RunConfig& config);
CrossValidationResult cross_validate(const std::vector<Utterance>& utterances,
                                     std::size_t feature_dim, const RunConfig& config,
                                     const std::vector<FoldSplit>& folds);

}  // namespace ser
