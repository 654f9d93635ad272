#include "ser/config.hpp"

#include <sstream>

#include "ser/error.hpp"

namespace ser {

ModelKind model_kind_from_string(const std::string& s) {
    if (s == "audio-bre") return ModelKind::audio_bre;
    if (s == "text-bre") return ModelKind::text_bre;
    if (s == "mha-1") return ModelKind::mha1;
    if (s == "mha-2") return ModelKind::mha2;
    if (s == "mha-3") return ModelKind::mha3;
    throw ConfigError("unknown model '" + s +
                      "' (expected audio-bre, text-bre, mha-1, mha-2 or mha-3)");
}

std::string to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::audio_bre: return "audio-bre";
        case ModelKind::text_bre: return "text-bre";
        case ModelKind::mha1: return "mha-1";
        case ModelKind::mha2: return "mha-2";
        case ModelKind::mha3: return "mha-3";
    }
    return "?";
}

AttentionMode attention_mode_from_string(const std::string& s) {
    if (s == "strict") return AttentionMode::strict;
    if (s == "projected") return AttentionMode::projected;
    throw ConfigError("unknown attention_mode '" + s + "' (expected strict or projected)");
}

std::string to_string(AttentionMode mode) {
    return mode == AttentionMode::strict ? "strict" : "projected";
}

void RunConfig::validate() const {
    auto positive = [](std::size_t v, const char* name) {
        if (v == 0) throw ConfigError(std::string(name) + " must be positive");
    };
    positive(d_h_audio, "d_h_audio");
    positive(d_h_text, "d_h_text");
    positive(d_e, "d_e");
    positive(layers, "layers");
    positive(batch_size, "batch_size");
    positive(max_epochs, "max_epochs");
    positive(max_audio_len, "max_audio_len");
    positive(max_text_len, "max_text_len");
    if (n_folds < 2) throw ConfigError("n_folds must be at least 2");
    if (dropout_rate < 0.0 || dropout_rate >= 1.0)
        throw ConfigError("dropout_rate must lie in [0, 1)");
    if (learning_rate <= 0.0) throw ConfigError("learning_rate must be positive");
    if (clip_norm <= 0.0) throw ConfigError("clip_norm must be positive");
    if (adam_beta1 < 0.0 || adam_beta1 >= 1.0 || adam_beta2 < 0.0 || adam_beta2 >= 1.0)
        throw ConfigError("adam betas must lie in [0, 1)");
    if (adam_epsilon <= 0.0) throw ConfigError("adam_epsilon must be positive");

    const bool multi_hop = model == ModelKind::mha1 || model == ModelKind::mha2 ||
                           model == ModelKind::mha3;
    if (multi_hop && attention_mode == AttentionMode::strict &&
        2 * d_h_text != 2 * d_h_audio + d_p) {
        throw ConfigError("strict attention_mode requires 2*d_h_text == 2*d_h_audio + d_p; "
                          "got 2*" + std::to_string(d_h_text) + " != 2*" +
                          std::to_string(d_h_audio) + " + " + std::to_string(d_p) +
                          " (use attention_mode=projected to lift the constraint)");
    }
}

nlohmann::json RunConfig::to_json() const {
    return nlohmann::json{{"model", to_string(model)},
                          {"d_h_audio", d_h_audio},
                          {"d_h_text", d_h_text},
                          {"d_e", d_e},
                          {"d_p", d_p},
                          {"layers", layers},
                          {"dropout_rate", dropout_rate},
                          {"learning_rate", learning_rate},
                          {"clip_norm", clip_norm},
                          {"adam_beta1", adam_beta1},
                          {"adam_beta2", adam_beta2},
                          {"adam_epsilon", adam_epsilon},
                          {"batch_size", batch_size},
                          {"max_epochs", max_epochs},
                          {"patience", patience},
                          {"seed", seed},
                          {"max_audio_len", max_audio_len},
                          {"max_text_len", max_text_len},
                          {"n_folds", n_folds},
                          {"group_by_session", group_by_session},
                          {"attention_mode", to_string(attention_mode)},
                          {"mfcc_dim", mfcc_dim}};
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
    RunConfig c;
    c.model = model_kind_from_string(j.value("model", to_string(c.model)));
    c.d_h_audio = j.value("d_h_audio", c.d_h_audio);
    c.d_h_text = j.value("d_h_text", c.d_h_text);
    c.d_e = j.value("d_e", c.d_e);
    c.d_p = j.value("d_p", c.d_p);
    c.layers = j.value("layers", c.layers);
    c.dropout_rate = j.value("dropout_rate", c.dropout_rate);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.clip_norm = j.value("clip_norm", c.clip_norm);
    c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
    c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
    c.adam_epsilon = j.value("adam_epsilon", c.adam_epsilon);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.max_epochs = j.value("max_epochs", c.max_epochs);
    c.patience = j.value("patience", c.patience);
    c.seed = j.value("seed", c.seed);
    c.max_audio_len = j.value("max_audio_len", c.max_audio_len);
    c.max_text_len = j.value("max_text_len", c.max_text_len);
    c.n_folds = j.value("n_folds", c.n_folds);
    c.group_by_session = j.value("group_by_session", c.group_by_session);
    c.attention_mode =
        attention_mode_from_string(j.value("attention_mode", to_string(c.attention_mode)));
    c.mfcc_dim = j.value("mfcc_dim", c.mfcc_dim);
    return c;
}

std::string RunConfig::dump() const {
    std::ostringstream os;
    os << "model=" << to_string(model) << "\n"
       << "d_h_audio=" << d_h_audio << "\n"
       << "d_h_text=" << d_h_text << "\n"
       << "d_e=" << d_e << "\n"
       << "d_p=" << d_p << "\n"
       << "layers=" << layers << "\n"
       << "dropout_rate=" << dropout_rate << "\n"
       << "learning_rate=" << learning_rate << "\n"
       << "clip_norm=" << clip_norm << "\n"
       << "adam_beta1=" << adam_beta1 << "\n"
       << "adam_beta2=" << adam_beta2 << "\n"
       << "adam_epsilon=" << adam_epsilon << "\n"
       << "batch_size=" << batch_size << "\n"
       << "max_epochs=" << max_epochs << "\n"
       << "patience=" << patience << "\n"
       << "seed=" << seed << "\n"
       << "max_audio_len=" << max_audio_len << "\n"
       << "max_text_len=" << max_text_len << "\n"
       << "n_folds=" << n_folds << "\n"
       << "group_by_session=" << (group_by_session ? "true" : "false") << "\n"
       << "attention_mode=" << to_string(attention_mode) << "\n"
       << "mfcc_dim=" << mfcc_dim << "\n";
    return os.str();
}

}  // namespace ser
