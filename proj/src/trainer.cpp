#include "ser/trainer.hpp"

#include <algorithm>
#include <cmath>

#include "ser/error.hpp"
#include "ser/ops.hpp"
#include "ser/optim.hpp"

namespace ser {

std::vector<PaddedSample> prepare_samples(const std::vector<Utterance>& utterances,
                                          const std::vector<std::size_t>& indices,
                                          const Vocabulary& vocab, const RunConfig& config) {
    std::vector<PaddedSample> out;
    out.reserve(indices.size());
    for (std::size_t idx : indices) {
        Utterance u = utterances[idx];
        if (config.d_p > 0) {
            const std::size_t have = u.prosody ? u.prosody->size() : 0;
            if (have != config.d_p)
                throw DataError("prepare_samples: utterance '" + u.id + "' has prosody dim " +
                                std::to_string(have) + ", config d_p is " +
                                std::to_string(config.d_p));
        } else {
            u.prosody = std::make_shared<const std::vector<double>>();
        }
        u.tokens = tokenize(u.transcript, vocab);
        out.push_back(pad_truncate(u, config.max_audio_len, config.max_text_len));
    }
    return out;
}

namespace {

std::size_t argmax4(const Tensor& probs) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < probs.numel(); ++c)
        if (probs(c) > probs(best)) best = c;
    return best;
}

}  // namespace

std::vector<std::size_t> predict_batch(const ModelParams& params,
                                       const std::vector<PaddedSample>& samples) {
    std::vector<std::size_t> out;
    out.reserve(samples.size());
    for (const PaddedSample& s : samples) {
        ForwardResult f = forward_sample(params, s, 0.0, false, Rng(0));
        out.push_back(argmax4(f.probabilities));
    }
    return out;
}

EvalReport evaluate_model(const ModelParams& params, const std::vector<PaddedSample>& samples) {
    std::vector<std::size_t> truth;
    truth.reserve(samples.size());
    for (const PaddedSample& s : samples) truth.push_back(s.label);
    return compute_metrics(truth, predict_batch(params, samples));
}

TrainResult train_model(const std::vector<PaddedSample>& train,
                        const std::vector<PaddedSample>& dev, const RunConfig& config,
                        const DataDims& dims, Rng rng) {
    if (train.empty()) throw DataError("train_model: empty training split");
    if (dev.empty()) throw DataError("train_model: empty dev split");

    ModelParams model = init_model(config, dims, rng.derive("init"));
    std::vector<Tensor> params = parameter_list(model);

    OptimizerState opt;
    opt.learning_rate = config.learning_rate;
    opt.beta1 = config.adam_beta1;
    opt.beta2 = config.adam_beta2;
    opt.epsilon = config.adam_epsilon;
    const ClipConfig clip{config.clip_norm};

    TrainResult result;
    result.best_params = clone_model(model);
    std::size_t epochs_since_best = 0;

    std::vector<std::size_t> order(train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
        Rng shuffle_rng = rng.derive("shuffle", epoch);
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.bounded(i)]);

        double epoch_loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            const std::size_t batch = end - start;

            zero_grads(params);
            std::vector<Tensor> prob_rows;
            prob_rows.reserve(batch);
            Tensor labels = Tensor::zeros({batch, kNumClasses});
            for (std::size_t i = start; i < end; ++i) {
                const PaddedSample& s = train[order[i]];
                ForwardResult f = forward_sample(model, s, config.dropout_rate, true,
                                                 rng.derive("sample", epoch, order[i]));
                prob_rows.push_back(f.probabilities);
                labels.at(i - start, s.label) = 1.0;
            }
            Tensor loss_sum = cross_entropy(stack_rows(prob_rows, batch), labels);
            const double batch_loss = loss_sum(0);
            if (!std::isfinite(batch_loss))
                throw RuntimeFailure("train_model: non-finite loss " +
                                     std::to_string(batch_loss) + " at epoch " +
                                     std::to_string(epoch) + ", batch starting at " +
                                     std::to_string(start));
            epoch_loss_sum += batch_loss;

            Tensor loss_mean = scale(loss_sum, 1.0 / static_cast<double>(batch));
            backward(loss_mean);
            clip_global_norm(params, clip);
            adam_step(params, opt);
        }

        EvalReport dev_report = evaluate_model(model, dev);
        EpochLog log;
        log.epoch = epoch;
        log.train_loss_sum = epoch_loss_sum;
        log.train_loss_mean = epoch_loss_sum / static_cast<double>(train.size());
        log.dev_wa = dev_report.wa;
        log.dev_ua = dev_report.ua;
        result.log.push_back(log);

        if (result.log.size() == 1 || dev_report.wa > result.best_dev_wa) {
            result.best_dev_wa = dev_report.wa;
            result.best_dev_ua = dev_report.ua;
            result.best_epoch = epoch;
            result.best_params = clone_model(model);
            epochs_since_best = 0;
        } else {
            ++epochs_since_best;
            if (config.patience > 0 && epochs_since_best >= config.patience) break;
        }
    }
    return result;
}

}  // namespace ser
