#include "ser/gradcheck.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

#include "ser/classifier.hpp"
#include "ser/model.hpp"
#include "ser/ops.hpp"

namespace ser {

namespace {

RunConfig tiny_config(ModelKind kind) {
    RunConfig cfg;
    cfg.model = kind;
    cfg.d_h_audio = 3;
    cfg.d_p = 2;
    cfg.d_h_text = 4;  // 2*4 == 2*3 + 2, strict constraint
    cfg.d_e = 5;
    cfg.layers = 1;
    cfg.dropout_rate = 0.0;
    cfg.max_audio_len = 5;
    cfg.max_text_len = 4;
    return cfg;
}

std::vector<PaddedSample> tiny_batch(const RunConfig& cfg, std::size_t feature_dim, Rng rng) {
    auto make = [&](std::size_t t_audio, std::vector<int> tokens, std::size_t label,
                    Rng r) {
        PaddedSample s;
        s.audio = Tensor::zeros({cfg.max_audio_len, feature_dim});
        for (std::size_t i = 0; i < t_audio * feature_dim; ++i)
            s.audio.values()[i] = r.uniform(-1.0, 1.0);
        s.audio_mask.assign(cfg.max_audio_len, false);
        for (std::size_t t = 0; t < t_audio; ++t) s.audio_mask[t] = true;

        s.prosody = Tensor::zeros({cfg.d_p});
        for (double& v : s.prosody.values()) v = r.uniform(-1.0, 1.0);

        s.tokens.assign(cfg.max_text_len, 0);
        s.token_mask.assign(cfg.max_text_len, false);
        for (std::size_t t = 0; t < tokens.size(); ++t) {
            s.tokens[t] = tokens[t];
            s.token_mask[t] = true;
        }
        s.label = label;
        return s;
    };
    return {make(4, {2, 3, 4}, 1, rng.derive("s0")),
            make(3, {5, 1}, 2, rng.derive("s1"))};
}

}  // namespace

GradCheckReport gradcheck_model(ModelKind kind, std::uint64_t seed) {
    const RunConfig cfg = tiny_config(kind);
    const std::size_t feature_dim = 6;
    DataDims dims;
    dims.audio_feature_dim = feature_dim;
    dims.prosody_dim = cfg.d_p;
    dims.vocab_size = 7;

    Rng rng = Rng(seed).derive("gradcheck", static_cast<std::uint64_t>(kind));
    ModelParams model = init_model(cfg, dims, rng.derive("init"));
    const std::vector<PaddedSample> batch = tiny_batch(cfg, feature_dim, rng.derive("data"));

    auto loss_value = [&]() {
        std::vector<Tensor> rows;
        Tensor labels = Tensor::zeros({batch.size(), kNumClasses});
        for (std::size_t i = 0; i < batch.size(); ++i) {
            ForwardResult f = forward_sample(model, batch[i], 0.0, false, Rng(0));
            rows.push_back(f.probabilities);
            labels.at(i, batch[i].label) = 1.0;
        }
        return scale(cross_entropy(stack_rows(rows, batch.size()), labels),
                     1.0 / static_cast<double>(batch.size()));
    };

    auto named = named_parameters(model);
    zero_grads(parameter_list(model));
    backward(loss_value());

    std::vector<std::vector<double>> analytic;
    analytic.reserve(named.size());
    for (auto& [name, t] : named) analytic.push_back(t.grad());

    const double h = 1e-5;
    GradCheckReport report;
    report.kind = kind;
    for (std::size_t pi = 0; pi < named.size(); ++pi) {
        auto& [name, t] = named[pi];
        GradCheckEntry entry;
        entry.tensor_name = name;
        for (std::size_t j = 0; j < t.numel(); ++j) {
            const double orig = t.values()[j];
            t.values()[j] = orig + h;
            const double f_plus = loss_value()(0);
            t.values()[j] = orig - h;
            const double f_minus = loss_value()(0);
            t.values()[j] = orig;
            const double fd = (f_plus - f_minus) / (2.0 * h);
            const double a = analytic[pi][j];
            const double rel =
                std::fabs(a - fd) / std::max({std::fabs(a), std::fabs(fd), 1e-6});
            entry.max_rel_error = std::max(entry.max_rel_error, rel);
        }
        report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
        report.entries.push_back(std::move(entry));
    }
    report.pass = report.max_rel_error < report.threshold;
    return report;
}

std::vector<GradCheckReport> gradcheck_all(std::uint64_t seed) {
    std::vector<GradCheckReport> out;
    for (ModelKind kind : {ModelKind::audio_bre, ModelKind::text_bre, ModelKind::mha1,
                           ModelKind::mha2, ModelKind::mha3})
        out.push_back(gradcheck_model(kind, seed));
    return out;
}

std::string GradCheckReport::to_text() const {
    std::ostringstream os;
    os << "gradcheck " << to_string(kind) << ": " << (pass ? "PASS" : "FAIL")
       << " (max rel error " << std::scientific << std::setprecision(3) << max_rel_error
       << ", threshold " << threshold << ")\n";
    for (const GradCheckEntry& e : entries)
        os << "  " << std::left << std::setw(28) << e.tensor_name << " max_rel_err="
           << std::scientific << std::setprecision(3) << e.max_rel_error << "\n";
    return os.str();
}

}  // namespace ser
