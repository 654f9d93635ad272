#include "ser/model.hpp"

#include <cmath>

#include "ser/error.hpp"
#include "ser/ops.hpp"

namespace ser {

std::size_t fused_dim(ModelKind kind, const RunConfig& config) {
    const std::size_t audio_out = 2 * config.d_h_audio + config.d_p;
    const std::size_t text_out = 2 * config.d_h_text;
    switch (kind) {
        case ModelKind::audio_bre: return audio_out;
        case ModelKind::text_bre: return text_out;
        case ModelKind::mha1: return text_out + audio_out;  // [H1 ; audio last]
        case ModelKind::mha2: return text_out + audio_out;  // [H1 ; H2]
        case ModelKind::mha3: return text_out + audio_out;  // [H3 ; H2]
    }
    throw ConfigError("fused_dim: unknown model kind");
}

ModelParams init_model(const RunConfig& config, const DataDims& dims, Rng rng) {
    config.validate();
    ModelParams m;
    m.kind = config.model;
    m.dims = dims;

    if (config.uses_audio()) {
        if (dims.audio_feature_dim == 0)
            throw ConfigError("init_model: audio feature dim is zero");
        m.audio = init_bre_params(dims.audio_feature_dim, config.d_h_audio, config.layers,
                                  rng.derive("audio_bre"));
    }
    if (config.uses_text()) {
        if (dims.vocab_size < 2) throw ConfigError("init_model: vocabulary too small");
        const double k = 1.0 / std::sqrt(static_cast<double>(config.d_e));
        Tensor table = Tensor::zeros({dims.vocab_size, config.d_e}, true);
        Rng er = rng.derive("embedding");
        for (std::size_t i = config.d_e; i < table.numel(); ++i)  // PAD row stays zero
            table.values()[i] = er.uniform(-k, k);
        m.embedding = table;
        m.text = init_bre_params(config.d_e, config.d_h_text, config.layers,
                                 rng.derive("text_bre"));
    }

    const bool multi_hop = config.model == ModelKind::mha1 ||
                           config.model == ModelKind::mha2 ||
                           config.model == ModelKind::mha3;
    if (multi_hop && config.attention_mode == AttentionMode::projected) {
        const std::size_t audio_out = 2 * config.d_h_audio + config.d_p;
        const std::size_t text_out = 2 * config.d_h_text;
        auto proj = [&](std::size_t rows, std::size_t cols, const char* name) {
            Tensor t = Tensor::zeros({rows, cols}, true);
            Rng r = rng.derive(name);
            const double k = 1.0 / std::sqrt(static_cast<double>(rows));
            for (double& v : t.values()) v = r.uniform(-k, k);
            return t;
        };
        m.hops.hop1 = proj(audio_out, text_out, "hop1_proj");
        if (config.model != ModelKind::mha1)
            m.hops.hop2 = proj(text_out, audio_out, "hop2_proj");
        if (config.model == ModelKind::mha3)
            m.hops.hop3 = proj(audio_out, text_out, "hop3_proj");
    }

    m.classifier = init_classifier(fused_dim(config.model, config), rng.derive("classifier"));
    return m;
}

std::vector<std::pair<std::string, Tensor>> named_parameters(const ModelParams& params) {
    std::vector<std::pair<std::string, Tensor>> out;
    if (params.embedding) out.emplace_back("embedding", *params.embedding);
    if (params.audio) {
        auto a = named_parameters(*params.audio, "audio_bre");
        out.insert(out.end(), a.begin(), a.end());
    }
    if (params.text) {
        auto t = named_parameters(*params.text, "text_bre");
        out.insert(out.end(), t.begin(), t.end());
    }
    if (params.hops.hop1) out.emplace_back("attention.hop1_proj", *params.hops.hop1);
    if (params.hops.hop2) out.emplace_back("attention.hop2_proj", *params.hops.hop2);
    if (params.hops.hop3) out.emplace_back("attention.hop3_proj", *params.hops.hop3);
    auto c = named_parameters(params.classifier, "classifier");
    out.insert(out.end(), c.begin(), c.end());
    return out;
}

std::vector<Tensor> parameter_list(const ModelParams& params) {
    std::vector<Tensor> out;
    for (auto& [name, t] : named_parameters(params)) out.push_back(t);
    return out;
}

ModelParams clone_model(const ModelParams& params) {
    ModelParams copy = params;
    auto fresh = [](Tensor& t) { t = t.detached_copy(t.requires_grad()); };
    if (copy.embedding) fresh(*copy.embedding);
    auto fresh_bre = [&](BreParams& bre) {
        for (BreLayerParams& layer : bre.layers) {
            if (layer.proj_w) fresh(*layer.proj_w);
            if (layer.proj_b) fresh(*layer.proj_b);
            for (LstmDirParams* dir : {&layer.forward_dir, &layer.backward_dir}) {
                fresh(dir->w_x);
                fresh(dir->w_h);
                fresh(dir->bias);
            }
        }
    };
    if (copy.audio) fresh_bre(*copy.audio);
    if (copy.text) fresh_bre(*copy.text);
    if (copy.hops.hop1) fresh(*copy.hops.hop1);
    if (copy.hops.hop2) fresh(*copy.hops.hop2);
    if (copy.hops.hop3) fresh(*copy.hops.hop3);
    fresh(copy.classifier.w);
    fresh(copy.classifier.b);
    return copy;
}

ForwardResult forward_sample(const ModelParams& params, const PaddedSample& sample,
                             double dropout_rate, bool training, const Rng& rng) {
    std::optional<EncodedSequence> audio_enc;
    std::optional<EncodedSequence> text_enc;

    if (params.audio) {
        EncodeOptions opts;
        opts.dropout_rate = dropout_rate;
        opts.training = training;
        opts.rng = rng.derive("dropout/audio_outputs");
        const Tensor* prosody = sample.prosody.defined() ? &sample.prosody : nullptr;
        if (params.dims.prosody_dim > 0 &&
            (!prosody || prosody->numel() != params.dims.prosody_dim))
            throw DataError("forward_sample: model expects a prosodic vector of dim " +
                            std::to_string(params.dims.prosody_dim));
        audio_enc = encode(sample.audio, sample.audio_mask, *params.audio,
                           params.dims.prosody_dim > 0 ? prosody : nullptr, opts);
    }
    if (params.text) {
        EncodeOptions opts;
        opts.dropout_rate = dropout_rate;
        opts.training = training;
        opts.rng = rng.derive("dropout/text_outputs");
        Tensor embedded = embed(*params.embedding, sample.tokens);
        text_enc = encode(embedded, sample.token_mask, *params.text, nullptr, opts);
    }

    ForwardResult out;
    Tensor fused;
    switch (params.kind) {
        case ModelKind::audio_bre: fused = audio_enc->last_state; break;
        case ModelKind::text_bre: fused = text_enc->last_state; break;
        case ModelKind::mha1: {
            FusedRepresentation f = mha1(*audio_enc, *text_enc, params.hops);
            fused = f.fused;
            out.hop_trace = std::move(f.hop_trace);
            break;
        }
        case ModelKind::mha2: {
            FusedRepresentation f = mha2(*audio_enc, *text_enc, params.hops);
            fused = f.fused;
            out.hop_trace = std::move(f.hop_trace);
            break;
        }
        case ModelKind::mha3: {
            FusedRepresentation f = mha3(*audio_enc, *text_enc, params.hops);
            fused = f.fused;
            out.hop_trace = std::move(f.hop_trace);
            break;
        }
    }

    fused = dropout(fused, dropout_rate, training, rng.derive("dropout/fused"));
    out.logits = logits(fused, params.classifier);
    out.probabilities = softmax(out.logits);
    return out;
}

}  // namespace ser
