#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "ser/rng.hpp"
#include "ser/tensor.hpp"

namespace ser {

enum class EmotionLabel { angry = 0, happy = 1, sad = 2, neutral = 3 };

std::string to_string(EmotionLabel label);
std::size_t label_index(EmotionLabel label);
EmotionLabel label_from_index(std::size_t idx);

// "excitement" folds into happy; the four canonical names map to themselves;
// anything else is outside the 4-class scheme and raises a DataError.
EmotionLabel merge_excitement(const std::string& raw_label);

// Strict-majority label after merging; nullopt when there is no strict
// majority or the winner falls outside the 4-class scheme.
std::optional<EmotionLabel> majority_label(const std::vector<std::string>& annotations);

struct FeatureMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;  // row-major

    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
};

// [c ; delta ; delta-delta] with the regression formula over window 2 and
// replicated edge frames. Output is 3x the input width.
FeatureMatrix add_deltas(const FeatureMatrix& mfcc);

struct Utterance {
    std::string id;
    std::shared_ptr<const FeatureMatrix> audio;      // [T_a × d]
    std::shared_ptr<const std::vector<double>> prosody;
    std::string transcript;
    std::vector<int> tokens;  // ids; filled once a vocabulary is applied
    EmotionLabel label = EmotionLabel::neutral;
    std::string session;
};

class Vocabulary {
  public:
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;

    Vocabulary();

    int id_of(const std::string& token) const;  // kUnk when absent
    int add(const std::string& token);          // existing id when already present
    std::size_t size() const { return tokens_.size(); }
    const std::string& token(int id) const { return tokens_[static_cast<std::size_t>(id)]; }

    void save(const std::filesystem::path& path) const;
    static Vocabulary load(const std::filesystem::path& path);
    std::uint64_t hash() const;

  private:
    std::unordered_map<std::string, int> ids_;
    std::vector<std::string> tokens_;
};

// Lowercase, whitespace split, leading/trailing punctuation emitted as
// separate single-character tokens.
std::vector<std::string> tokenize_words(const std::string& transcript);

// Word tokens mapped through the vocabulary; OOV -> UNK; empty -> [UNK].
std::vector<int> tokenize(const std::string& transcript, const Vocabulary& vocab);

// Vocabulary built from the transcripts of the given utterances only
// (training fold), tokens in first-appearance order.
Vocabulary build_vocabulary(const std::vector<Utterance>& utterances,
                            const std::vector<std::size_t>& train_indices);

struct ManifestHeader {
    std::size_t mfcc_dim = 0;
    std::size_t prosody_dim = 0;
    bool compute_deltas = false;  // header "deltas": "compute" | "precomputed"
};

struct RejectedUtterance {
    std::string id;
    std::string reason;
};

struct LoadedDataset {
    ManifestHeader header;
    std::size_t feature_dim = 0;  // width after optional delta computation
    std::vector<Utterance> utterances;  // sorted by id
    std::vector<RejectedUtterance> rejected;
};

// Manifest: first line a JSON header {"mfcc_dim": N, "prosody_dim": P,
// "deltas": "precomputed"|"compute"}, then one JSON record per line:
// {"id", "mfcc", "prosody", "transcript", "label" | "annotations", "session"}.
// Feature files are CSV, one frame per row. Errors name the offending
// utterance id. Utterances whose labels resolve outside the 4-class scheme
// (or lack a strict majority) are returned in `rejected`, not an error.
LoadedDataset load_manifest(const std::filesystem::path& path,
                            std::optional<std::size_t> expect_mfcc_dim = {},
                            std::optional<std::size_t> expect_prosody_dim = {});

struct PaddedSample {
    Tensor audio;  // [max_audio_len × d] leaf tensor, zero rows beyond T_a
    std::vector<bool> audio_mask;
    Tensor prosody;  // [d_p] leaf; undefined when the dataset has no prosody
    std::vector<int> tokens;  // length max_text_len, PAD beyond T_t
    std::vector<bool> token_mask;
    std::size_t label = 0;
};

// Truncates to the caps, pads the remainder, true-prefix masks. Requires the
// utterance tokens to be populated.
PaddedSample pad_truncate(const Utterance& u, std::size_t max_audio_len,
                          std::size_t max_text_len);

struct FoldSplit {
    int fold_index = 0;
    std::vector<std::size_t> train;  // indices into the dataset's utterance list
    std::vector<std::size_t> dev;
    std::vector<std::size_t> test;
};

// One seeded shuffle, cut into n_folds blocks; fold k tests on block k, uses
// block k+1 (mod n) as dev, trains on the rest. The test blocks partition the
// dataset. With group_by_session, whole sessions are assigned to blocks
// (greedy balancing), keeping speakers disjoint across splits.
std::vector<FoldSplit> make_folds(std::size_t n_utterances, std::size_t n_folds, Rng rng);
std::vector<FoldSplit> make_folds(const std::vector<Utterance>& utterances, std::size_t n_folds,
                                  Rng rng, bool group_by_session);

}  // namespace ser
