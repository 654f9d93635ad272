#include "ser/attention.hpp"

#include <string>

#include "ser/error.hpp"
#include "ser/ops.hpp"

namespace ser {

namespace {

Tensor project_query(const Tensor& query, const std::optional<Tensor>& proj) {
    if (!proj) return query;
    return reshape(matmul(reshape(query, {1, query.numel()}), *proj), {proj->dim(1)});
}

AttentionResult hop(const Tensor& query, const std::optional<Tensor>& proj,
                    const EncodedSequence& seq) {
    return dot_attention(project_query(query, proj), seq.outputs, seq.mask);
}

}  // namespace

AttentionResult dot_attention(const Tensor& query, const Tensor& keys_values,
                              const std::vector<bool>& mask) {
    if (keys_values.shape().size() != 2)
        throw ShapeError("dot_attention: keys/values must be [T x d], got " +
                         shape_str(keys_values.shape()));
    const std::size_t t = keys_values.dim(0), d = keys_values.dim(1);
    if (query.numel() != d)
        throw ConfigError("dot_attention: query dim " + std::to_string(query.numel()) +
                          " != sequence feature dim " + std::to_string(d) +
                          "; strict mode requires 2*d_h_text == 2*d_h_audio + d_p "
                          "(use attention_mode=projected for mismatched dims)");
    if (mask.size() != t)
        throw ShapeError("dot_attention: mask length " + std::to_string(mask.size()) +
                         " != sequence length " + std::to_string(t));

    Tensor logits = reshape(matmul(keys_values, reshape(query, {d, 1})), {t});
    AttentionResult r;
    r.weights = softmax(logits, &mask);
    r.context = reshape(matmul(reshape(r.weights, {1, t}), keys_values), {d});
    return r;
}

FusedRepresentation mha1(const EncodedSequence& audio, const EncodedSequence& text,
                         const HopProjections& proj) {
    FusedRepresentation out;
    out.hop_trace.push_back(hop(audio.last_state, proj.hop1, text));
    out.fused = concat(out.hop_trace[0].context, audio.last_state);
    return out;
}

FusedRepresentation mha2(const EncodedSequence& audio, const EncodedSequence& text,
                         const HopProjections& proj) {
    FusedRepresentation out;
    out.hop_trace.push_back(hop(audio.last_state, proj.hop1, text));
    out.hop_trace.push_back(hop(out.hop_trace[0].context, proj.hop2, audio));
    out.fused = concat(out.hop_trace[0].context, out.hop_trace[1].context);
    return out;
}

FusedRepresentation mha3(const EncodedSequence& audio, const EncodedSequence& text,
                         const HopProjections& proj) {
    FusedRepresentation out;
    out.hop_trace.push_back(hop(audio.last_state, proj.hop1, text));
    out.hop_trace.push_back(hop(out.hop_trace[0].context, proj.hop2, audio));
    out.hop_trace.push_back(hop(out.hop_trace[1].context, proj.hop3, text));
    out.fused = concat(out.hop_trace[2].context, out.hop_trace[1].context);
    return out;
}

}  // namespace ser
