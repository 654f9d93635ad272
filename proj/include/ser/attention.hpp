#pragma once

#include <optional>
#include <vector>

#include "ser/encoder.hpp"
#include "ser/tensor.hpp"

namespace ser {

struct AttentionResult {
    Tensor weights;  // [T], sum to 1, exactly 0 at masked positions
    Tensor context;  // [d] = sum_i weights_i * value_i
};

struct FusedRepresentation {
    Tensor fused;                            // H
    std::vector<AttentionResult> hop_trace;  // one entry per hop taken
};

// Optional learned query->key-space projections, one per hop, used when the
// audio and text output dims are allowed to differ ("projected" mode). Absent
// in strict mode, where 2*d_h_text == 2*d_h_audio + d_p is required.
struct HopProjections {
    std::optional<Tensor> hop1;  // [d_audio_out × d_text_out]
    std::optional<Tensor> hop2;  // [d_text_out × d_audio_out]
    std::optional<Tensor> hop3;  // [d_audio_out × d_text_out]
};

// Plain dot-product attention: logits_i = query . kv_i, masked softmax,
// context = sum_i a_i kv_i. Keys and values are the same vectors; no 1/sqrt(d)
// scaling.
AttentionResult dot_attention(const Tensor& query, const Tensor& keys_values,
                              const std::vector<bool>& mask);

// Hop 1: attend the text sequence with the audio summary; H = [H1 ; audio last state].
FusedRepresentation mha1(const EncodedSequence& audio, const EncodedSequence& text,
                         const HopProjections& proj = {});

// Hop 2: re-attend the audio sequence with H1; H = [H1 ; H2].
FusedRepresentation mha2(const EncodedSequence& audio, const EncodedSequence& text,
                         const HopProjections& proj = {});

// Hop 3: attend the text sequence once more with H2; H = [H3 ; H2].
FusedRepresentation mha3(const EncodedSequence& audio, const EncodedSequence& text,
                         const HopProjections& proj = {});

}  // namespace ser
