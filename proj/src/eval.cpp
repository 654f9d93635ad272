#include "ser/eval.hpp"

#include <iomanip>
#include <sstream>

#include "ser/error.hpp"
#include "ser/trainer.hpp"

namespace ser {

EvalReport compute_metrics(const std::vector<std::size_t>& true_labels,
                           const std::vector<std::size_t>& predicted_labels) {
    if (true_labels.empty()) throw DataError("compute_metrics: empty label lists");
    if (true_labels.size() != predicted_labels.size())
        throw DataError("compute_metrics: " + std::to_string(true_labels.size()) +
                        " true labels vs " + std::to_string(predicted_labels.size()) +
                        " predictions");

    EvalReport r;
    for (std::size_t i = 0; i < true_labels.size(); ++i) {
        if (true_labels[i] >= 4 || predicted_labels[i] >= 4)
            throw DataError("compute_metrics: label index out of range at position " +
                            std::to_string(i));
        r.confusion[true_labels[i]][predicted_labels[i]] += 1;
    }

    std::uint64_t correct = 0;
    double recall_sum = 0.0;
    std::size_t supported = 0;
    for (std::size_t c = 0; c < 4; ++c) {
        std::uint64_t support = 0;
        for (std::size_t p = 0; p < 4; ++p) support += r.confusion[c][p];
        correct += r.confusion[c][c];
        if (support == 0) {
            r.zero_support[c] = true;
            for (std::size_t p = 0; p < 4; ++p) r.confusion_pct[c][p] = 0.0;
            continue;
        }
        ++supported;
        recall_sum += static_cast<double>(r.confusion[c][c]) / static_cast<double>(support);
        for (std::size_t p = 0; p < 4; ++p)
            r.confusion_pct[c][p] =
                100.0 * static_cast<double>(r.confusion[c][p]) / static_cast<double>(support);
    }
    r.wa = static_cast<double>(correct) / static_cast<double>(true_labels.size());
    r.ua = recall_sum / static_cast<double>(supported);
    return r;
}

nlohmann::json EvalReport::to_json() const {
    nlohmann::json conf = nlohmann::json::array();
    nlohmann::json conf_pct = nlohmann::json::array();
    for (std::size_t c = 0; c < 4; ++c) {
        conf.push_back(confusion[c]);
        conf_pct.push_back(confusion_pct[c]);
    }
    return nlohmann::json{{"wa", wa},
                          {"ua", ua},
                          {"confusion", conf},
                          {"confusion_pct", conf_pct},
                          {"zero_support", zero_support}};
}

std::string EvalReport::to_text() const {
    std::ostringstream os;
    os << std::fixed << std::setprecision(3);
    os << "WA " << wa << " / UA " << ua << "\n";
    os << "confusion (rows true, cols predicted; angry happy sad neutral):\n";
    for (std::size_t c = 0; c < 4; ++c) {
        os << "  " << std::setw(7) << to_string(label_from_index(c)) << " ";
        for (std::size_t p = 0; p < 4; ++p) os << std::setw(6) << confusion[c][p];
        os << "   |";
        for (std::size_t p = 0; p < 4; ++p)
            os << std::setw(7) << std::setprecision(2) << confusion_pct[c][p];
        os << std::setprecision(3) << (zero_support[c] ? "   (no support)" : "") << "\n";
    }
    return os.str();
}

CrossValidationResult cross_validate(const std::vector<Utterance>& utterances,
                                     std::size_t feature_dim, const RunConfig& config) {
    const std::vector<FoldSplit> folds = make_folds(
        utterances, config.n_folds, Rng(config.seed), config.group_by_session);
    return cross_validate(utterances, feature_dim, config, folds);
}

CrossValidationResult cross_validate(const std::vector<Utterance>& utterances,
                                     std::size_t feature_dim, const RunConfig& config,
                                     const std::vector<FoldSplit>& folds) {
    config.validate();
    CrossValidationResult result;
    double wa_sum = 0.0, ua_sum = 0.0;

    for (const FoldSplit& fold : folds) {
        FoldOutcome outcome;
        outcome.fold_index = fold.fold_index;
        try {
            const Vocabulary vocab = build_vocabulary(utterances, fold.train);
            const auto train = prepare_samples(utterances, fold.train, vocab, config);
            const auto dev = prepare_samples(utterances, fold.dev, vocab, config);
            const auto test = prepare_samples(utterances, fold.test, vocab, config);

            DataDims dims;
            dims.audio_feature_dim = feature_dim;
            dims.prosody_dim = config.d_p;
            dims.vocab_size = vocab.size();

            Rng fold_rng = Rng(config.seed).derive("fold", static_cast<std::uint64_t>(
                                                               fold.fold_index));
            TrainResult trained = train_model(train, dev, config, dims, fold_rng);

            outcome.report = evaluate_model(trained.best_params, test);
            outcome.test_count = test.size();
            outcome.best_epoch = trained.best_epoch;
            outcome.best_dev_wa = trained.best_dev_wa;

            wa_sum += outcome.report.wa;
            ua_sum += outcome.report.ua;
            ++result.evaluated_folds;
        } catch (const RuntimeFailure& e) {
            outcome.failed = true;
            outcome.diagnostics = e.what();
            ++result.excluded_folds;
        }
        result.folds.push_back(std::move(outcome));
    }

    if (result.evaluated_folds > 0) {
        result.mean_wa = wa_sum / static_cast<double>(result.evaluated_folds);
        result.mean_ua = ua_sum / static_cast<double>(result.evaluated_folds);
    }
    return result;
}

}  // namespace ser
