#include "ser/data.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ser/error.hpp"

namespace ser {

namespace {

const std::set<std::string>& out_of_scheme_labels() {
    static const std::set<std::string> s = {"frustration", "fear", "surprise",
                                            "disgust",     "other", "xxx"};
    return s;
}

std::optional<EmotionLabel> canonical(const std::string& raw) {
    if (raw == "angry") return EmotionLabel::angry;
    if (raw == "happy") return EmotionLabel::happy;
    if (raw == "sad") return EmotionLabel::sad;
    if (raw == "neutral") return EmotionLabel::neutral;
    if (raw == "excitement") return EmotionLabel::happy;
    return std::nullopt;
}

}  // namespace

std::string to_string(EmotionLabel label) {
    switch (label) {
        case EmotionLabel::angry: return "angry";
        case EmotionLabel::happy: return "happy";
        case EmotionLabel::sad: return "sad";
        case EmotionLabel::neutral: return "neutral";
    }
    return "?";
}

std::size_t label_index(EmotionLabel label) { return static_cast<std::size_t>(label); }

EmotionLabel label_from_index(std::size_t idx) {
    if (idx >= 4) throw DataError("label_from_index: index " + std::to_string(idx));
    return static_cast<EmotionLabel>(idx);
}

EmotionLabel merge_excitement(const std::string& raw_label) {
    if (auto l = canonical(raw_label)) return *l;
    throw DataError("merge_excitement: label '" + raw_label +
                    "' is outside the 4-class scheme");
}

std::optional<EmotionLabel> majority_label(const std::vector<std::string>& annotations) {
    if (annotations.empty()) throw DataError("majority_label: no annotations");
    std::map<std::string, std::size_t> counts;
    for (const std::string& a : annotations) {
        if (auto l = canonical(a)) {
            counts[to_string(*l)] += 1;
        } else if (out_of_scheme_labels().count(a)) {
            counts[a] += 1;
        } else {
            throw DataError("majority_label: unrecognized label '" + a + "'");
        }
    }
    for (const auto& [name, count] : counts) {
        if (2 * count > annotations.size()) {
            auto l = canonical(name);
            if (!l) return std::nullopt;  // majority label outside the scheme
            return *l;
        }
    }
    return std::nullopt;  // no strict majority
}

FeatureMatrix add_deltas(const FeatureMatrix& mfcc) {
    if (mfcc.rows == 0) throw DataError("add_deltas: empty feature matrix");
    const std::size_t t_len = mfcc.rows, d = mfcc.cols;
    auto clamp_t = [t_len](std::ptrdiff_t t) {
        return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(
            t, 0, static_cast<std::ptrdiff_t>(t_len) - 1));
    };
    auto regression = [&](const FeatureMatrix& src) {
        FeatureMatrix out{t_len, d, std::vector<double>(t_len * d)};
        for (std::size_t t = 0; t < t_len; ++t) {
            const std::ptrdiff_t ti = static_cast<std::ptrdiff_t>(t);
            for (std::size_t c = 0; c < d; ++c) {
                double num = 0.0;
                for (std::ptrdiff_t w = 1; w <= 2; ++w)
                    num += static_cast<double>(w) *
                           (src.at(clamp_t(ti + w), c) - src.at(clamp_t(ti - w), c));
                out.at(t, c) = num / 10.0;  // 2 * (1^2 + 2^2)
            }
        }
        return out;
    };

    FeatureMatrix delta = regression(mfcc);
    FeatureMatrix delta2 = regression(delta);
    FeatureMatrix out{t_len, 3 * d, std::vector<double>(t_len * 3 * d)};
    for (std::size_t t = 0; t < t_len; ++t)
        for (std::size_t c = 0; c < d; ++c) {
            out.at(t, c) = mfcc.at(t, c);
            out.at(t, d + c) = delta.at(t, c);
            out.at(t, 2 * d + c) = delta2.at(t, c);
        }
    return out;
}

Vocabulary::Vocabulary() {
    tokens_ = {"<pad>", "<unk>"};
    ids_ = {{"<pad>", kPad}, {"<unk>", kUnk}};
}

int Vocabulary::id_of(const std::string& token) const {
    auto it = ids_.find(token);
    return it == ids_.end() ? kUnk : it->second;
}

int Vocabulary::add(const std::string& token) {
    auto it = ids_.find(token);
    if (it != ids_.end()) return it->second;
    const int id = static_cast<int>(tokens_.size());
    tokens_.push_back(token);
    ids_.emplace(token, id);
    return id;
}

void Vocabulary::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("Vocabulary::save: cannot write " + path.string());
    for (const std::string& t : tokens_) out << t << "\n";
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("Vocabulary::load: cannot read " + path.string());
    Vocabulary v;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        if (lineno == 0 && line != "<pad>")
            throw DataError("Vocabulary::load: line 0 must be <pad>");
        if (lineno == 1 && line != "<unk>")
            throw DataError("Vocabulary::load: line 1 must be <unk>");
        if (lineno >= 2) v.add(line);
        ++lineno;
    }
    if (lineno < 2) throw DataError("Vocabulary::load: missing reserved entries");
    return v;
}

std::uint64_t Vocabulary::hash() const {
    std::uint64_t h = 1469598103934665603ULL;
    for (const std::string& t : tokens_) {
        for (char c : t) {
            h ^= static_cast<unsigned char>(c);
            h *= 1099511628211ULL;
        }
        h ^= static_cast<unsigned char>('\n');
        h *= 1099511628211ULL;
    }
    return h;
}

std::vector<std::string> tokenize_words(const std::string& transcript) {
    std::vector<std::string> out;
    std::string word;
    std::istringstream ss(transcript);
    while (ss >> word) {
        std::for_each(word.begin(), word.end(), [](char& c) {
            c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        });
        std::size_t begin = 0, end = word.size();
        auto is_punct = [&](std::size_t i) {
            return std::ispunct(static_cast<unsigned char>(word[i])) != 0;
        };
        while (begin < end && is_punct(begin)) ++begin;
        while (end > begin && is_punct(end - 1)) --end;
        for (std::size_t i = 0; i < begin; ++i) out.push_back(word.substr(i, 1));
        if (begin < end) out.push_back(word.substr(begin, end - begin));
        for (std::size_t i = end; i < word.size(); ++i) out.push_back(word.substr(i, 1));
    }
    return out;
}

std::vector<int> tokenize(const std::string& transcript, const Vocabulary& vocab) {
    std::vector<std::string> words = tokenize_words(transcript);
    if (words.empty()) return {Vocabulary::kUnk};
    std::vector<int> ids;
    ids.reserve(words.size());
    for (const std::string& w : words) ids.push_back(vocab.id_of(w));
    return ids;
}

Vocabulary build_vocabulary(const std::vector<Utterance>& utterances,
                            const std::vector<std::size_t>& train_indices) {
    Vocabulary v;
    for (std::size_t idx : train_indices)
        for (const std::string& w : tokenize_words(utterances[idx].transcript)) v.add(w);
    return v;
}

namespace {

FeatureMatrix read_csv_matrix(const std::filesystem::path& path, const std::string& utt_id) {
    std::ifstream in(path);
    if (!in)
        throw DataError("load_manifest: utterance '" + utt_id + "': missing feature file " +
                        path.string());
    FeatureMatrix m;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r,") == std::string::npos) continue;
        std::vector<double> vals;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) {
            try {
                vals.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw DataError("load_manifest: utterance '" + utt_id +
                                "': bad number '" + cell + "' in " + path.string());
            }
        }
        if (m.cols == 0) m.cols = vals.size();
        if (vals.size() != m.cols)
            throw DataError("load_manifest: utterance '" + utt_id + "': ragged rows in " +
                            path.string());
        m.data.insert(m.data.end(), vals.begin(), vals.end());
        ++m.rows;
    }
    if (m.rows == 0)
        throw DataError("load_manifest: utterance '" + utt_id + "': empty feature file " +
                        path.string());
    return m;
}

}  // namespace

LoadedDataset load_manifest(const std::filesystem::path& path,
                            std::optional<std::size_t> expect_mfcc_dim,
                            std::optional<std::size_t> expect_prosody_dim) {
    std::ifstream in(path);
    if (!in) throw DataError("load_manifest: cannot read " + path.string());
    const std::filesystem::path base = path.parent_path();

    LoadedDataset ds;
    std::string line;
    bool have_header = false;
    std::set<std::string> seen_ids;

    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json rec;
        try {
            rec = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw DataError("load_manifest: bad JSON line in " + path.string() + ": " +
                            e.what());
        }

        if (!have_header) {
            if (!rec.contains("mfcc_dim"))
                throw DataError("load_manifest: first record must be a header with mfcc_dim");
            ds.header.mfcc_dim = rec.at("mfcc_dim").get<std::size_t>();
            ds.header.prosody_dim = rec.value("prosody_dim", std::size_t{0});
            const std::string deltas = rec.value("deltas", std::string("precomputed"));
            if (deltas == "compute")
                ds.header.compute_deltas = true;
            else if (deltas != "precomputed")
                throw DataError("load_manifest: header deltas must be 'precomputed' or "
                                "'compute', got '" + deltas + "'");
            if (ds.header.mfcc_dim == 0)
                throw DataError("load_manifest: header mfcc_dim must be positive");
            if (expect_mfcc_dim && *expect_mfcc_dim != ds.header.mfcc_dim)
                throw ConfigError("load_manifest: manifest mfcc_dim " +
                                  std::to_string(ds.header.mfcc_dim) +
                                  " does not match configured " +
                                  std::to_string(*expect_mfcc_dim));
            if (expect_prosody_dim && *expect_prosody_dim != ds.header.prosody_dim)
                throw ConfigError("load_manifest: manifest prosody_dim " +
                                  std::to_string(ds.header.prosody_dim) +
                                  " does not match configured d_p " +
                                  std::to_string(*expect_prosody_dim));
            ds.feature_dim = ds.header.compute_deltas ? 3 * ds.header.mfcc_dim
                                                      : ds.header.mfcc_dim;
            have_header = true;
            continue;
        }

        if (!rec.contains("id")) throw DataError("load_manifest: record without id");
        const std::string id = rec.at("id").get<std::string>();
        if (!seen_ids.insert(id).second)
            throw DataError("load_manifest: duplicate utterance id '" + id + "'");

        // Label resolution first; rejected utterances skip feature loading.
        std::optional<EmotionLabel> label;
        std::string reject_reason;
        if (rec.contains("annotations")) {
            const auto anns = rec.at("annotations").get<std::vector<std::string>>();
            if (anns.empty())
                throw DataError("load_manifest: utterance '" + id + "': empty annotations");
            label = majority_label(anns);
            if (!label) reject_reason = "no strict-majority 4-class label";
        } else if (rec.contains("label")) {
            const std::string raw = rec.at("label").get<std::string>();
            if (auto l = canonical(raw)) {
                label = *l;
            } else if (out_of_scheme_labels().count(raw)) {
                reject_reason = "label '" + raw + "' outside the 4-class scheme";
            } else {
                throw DataError("load_manifest: utterance '" + id + "': unknown label '" +
                                raw + "'");
            }
        } else {
            throw DataError("load_manifest: utterance '" + id +
                            "': needs 'label' or 'annotations'");
        }
        if (!label) {
            ds.rejected.push_back({id, reject_reason});
            continue;
        }

        Utterance u;
        u.id = id;
        u.label = *label;
        u.transcript = rec.value("transcript", std::string());
        u.session = rec.value("session", std::string());

        if (!rec.contains("mfcc"))
            throw DataError("load_manifest: utterance '" + id + "': missing mfcc path");
        FeatureMatrix feats =
            read_csv_matrix(base / rec.at("mfcc").get<std::string>(), id);
        if (feats.cols != ds.header.mfcc_dim)
            throw DataError("load_manifest: utterance '" + id + "': feature width " +
                            std::to_string(feats.cols) + " != manifest mfcc_dim " +
                            std::to_string(ds.header.mfcc_dim));
        if (ds.header.compute_deltas) feats = add_deltas(feats);
        u.audio = std::make_shared<const FeatureMatrix>(std::move(feats));

        std::vector<double> prosody;
        if (ds.header.prosody_dim > 0) {
            if (!rec.contains("prosody"))
                throw DataError("load_manifest: utterance '" + id + "': missing prosody path");
            FeatureMatrix p = read_csv_matrix(base / rec.at("prosody").get<std::string>(), id);
            if (p.rows != 1 || p.cols != ds.header.prosody_dim)
                throw DataError("load_manifest: utterance '" + id + "': prosody shape " +
                                std::to_string(p.rows) + "x" + std::to_string(p.cols) +
                                " != 1x" + std::to_string(ds.header.prosody_dim));
            prosody = std::move(p.data);
        }
        u.prosody = std::make_shared<const std::vector<double>>(std::move(prosody));

        ds.utterances.push_back(std::move(u));
    }

    if (!have_header && (ds.utterances.empty() && ds.rejected.empty())) {
        // Entirely empty manifests are legal and yield an empty dataset.
        ds.header = ManifestHeader{};
    }
    std::sort(ds.utterances.begin(), ds.utterances.end(),
              [](const Utterance& a, const Utterance& b) { return a.id < b.id; });
    return ds;
}

PaddedSample pad_truncate(const Utterance& u, std::size_t max_audio_len,
                          std::size_t max_text_len) {
    if (!u.audio || u.audio->rows == 0)
        throw DataError("pad_truncate: utterance '" + u.id + "' has no audio frames");
    if (u.tokens.empty())
        throw DataError("pad_truncate: utterance '" + u.id + "' has no tokens (vocabulary "
                        "not applied)");
    const std::size_t d = u.audio->cols;
    const std::size_t t_a = std::min(u.audio->rows, max_audio_len);
    const std::size_t t_t = std::min(u.tokens.size(), max_text_len);

    PaddedSample s;
    s.audio = Tensor::zeros({max_audio_len, d});
    std::copy(u.audio->data.begin(), u.audio->data.begin() + t_a * d,
              s.audio.values().begin());
    s.audio_mask.assign(max_audio_len, false);
    for (std::size_t t = 0; t < t_a; ++t) s.audio_mask[t] = true;

    if (u.prosody && !u.prosody->empty())
        s.prosody = Tensor::from({u.prosody->size()}, *u.prosody);

    s.tokens.assign(max_text_len, Vocabulary::kPad);
    std::copy(u.tokens.begin(), u.tokens.begin() + t_t, s.tokens.begin());
    s.token_mask.assign(max_text_len, false);
    for (std::size_t t = 0; t < t_t; ++t) s.token_mask[t] = true;

    s.label = label_index(u.label);
    return s;
}

std::vector<FoldSplit> make_folds(std::size_t n_utterances, std::size_t n_folds, Rng rng) {
    if (n_folds < 2) throw ConfigError("make_folds: need at least 2 folds");
    if (n_utterances < n_folds)
        throw DataError("make_folds: " + std::to_string(n_utterances) +
                        " utterances cannot fill " + std::to_string(n_folds) + " folds");

    std::vector<std::size_t> order(n_utterances);
    for (std::size_t i = 0; i < n_utterances; ++i) order[i] = i;
    Rng shuffle_rng = rng.derive("fold-shuffle");
    for (std::size_t i = n_utterances; i > 1; --i) {
        const std::size_t j = shuffle_rng.bounded(i);
        std::swap(order[i - 1], order[j]);
    }

    auto block_begin = [&](std::size_t k) { return k * n_utterances / n_folds; };

    std::vector<FoldSplit> folds(n_folds);
    for (std::size_t k = 0; k < n_folds; ++k) {
        FoldSplit& f = folds[k];
        f.fold_index = static_cast<int>(k);
        const std::size_t dev_block = (k + 1) % n_folds;
        for (std::size_t b = 0; b < n_folds; ++b) {
            auto* dst = (b == k) ? &f.test : (b == dev_block) ? &f.dev : &f.train;
            for (std::size_t i = block_begin(b); i < block_begin(b + 1); ++i)
                dst->push_back(order[i]);
        }
        std::sort(f.train.begin(), f.train.end());
        std::sort(f.dev.begin(), f.dev.end());
        std::sort(f.test.begin(), f.test.end());
    }
    return folds;
}

std::vector<FoldSplit> make_folds(const std::vector<Utterance>& utterances,
                                  std::size_t n_folds, Rng rng, bool group_by_session) {
    if (!group_by_session) return make_folds(utterances.size(), n_folds, rng);

    if (n_folds < 2) throw ConfigError("make_folds: need at least 2 folds");
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < utterances.size(); ++i)
        groups[utterances[i].session].push_back(i);
    if (groups.size() < n_folds)
        throw DataError("make_folds: " + std::to_string(groups.size()) +
                        " sessions cannot fill " + std::to_string(n_folds) + " folds");

    std::vector<std::string> keys;
    for (const auto& [k, v] : groups) keys.push_back(k);
    Rng shuffle_rng = rng.derive("fold-shuffle-grouped");
    for (std::size_t i = keys.size(); i > 1; --i)
        std::swap(keys[i - 1], keys[shuffle_rng.bounded(i)]);

    // Greedy: each session joins the currently smallest block.
    std::vector<std::vector<std::size_t>> blocks(n_folds);
    for (const std::string& k : keys) {
        std::size_t smallest = 0;
        for (std::size_t b = 1; b < n_folds; ++b)
            if (blocks[b].size() < blocks[smallest].size()) smallest = b;
        const auto& members = groups[k];
        blocks[smallest].insert(blocks[smallest].end(), members.begin(), members.end());
    }

    std::vector<FoldSplit> folds(n_folds);
    for (std::size_t k = 0; k < n_folds; ++k) {
        FoldSplit& f = folds[k];
        f.fold_index = static_cast<int>(k);
        const std::size_t dev_block = (k + 1) % n_folds;
        for (std::size_t b = 0; b < n_folds; ++b) {
            auto* dst = (b == k) ? &f.test : (b == dev_block) ? &f.dev : &f.train;
            dst->insert(dst->end(), blocks[b].begin(), blocks[b].end());
        }
        std::sort(f.train.begin(), f.train.end());
        std::sort(f.dev.begin(), f.dev.end());
        std::sort(f.test.begin(), f.test.end());
    }
    return folds;
}

}  // namespace ser
