#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

namespace ser {

enum class ModelKind { audio_bre, text_bre, mha1, mha2, mha3 };
enum class AttentionMode { strict, projected };

ModelKind model_kind_from_string(const std::string& s);
std::string to_string(ModelKind kind);
AttentionMode attention_mode_from_string(const std::string& s);
std::string to_string(AttentionMode mode);

struct RunConfig {
    ModelKind model = ModelKind::mha2;
    std::size_t d_h_audio = 64;
    std::size_t d_h_text = 64;
    std::size_t d_e = 100;
    std::size_t d_p = 0;
    std::size_t layers = 1;
    double dropout_rate = 0.3;
    double learning_rate = 1e-3;
    double clip_norm = 1.0;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    std::size_t batch_size = 32;
    std::size_t max_epochs = 100;
    std::size_t patience = 10;
    std::uint64_t seed = 42;
    std::size_t max_audio_len = 750;
    std::size_t max_text_len = 128;
    std::size_t n_folds = 10;
    bool group_by_session = false;
    AttentionMode attention_mode = AttentionMode::strict;
    std::size_t mfcc_dim = 0;  // 0 = accept whatever the manifest header declares

    // Throws ConfigError on any violation; in strict mode the multi-hop models
    // require 2*d_h_text == 2*d_h_audio + d_p.
    void validate() const;

    bool uses_audio() const { return model != ModelKind::text_bre; }
    bool uses_text() const { return model != ModelKind::audio_bre; }

    nlohmann::json to_json() const;
    static RunConfig from_json(const nlohmann::json& j);

    // key=value lines, one per field, in declaration order.
    std::string dump() const;
};

}  // namespace ser
