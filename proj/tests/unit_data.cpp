#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "ser/data.hpp"
#include "ser/error.hpp"

using namespace ser;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path dir;
    TempDir() {
        dir = fs::temp_directory_path() /
              ("ser_data_test_" + std::to_string(::getpid()) + "_" +
               std::to_string(counter()++));
        fs::create_directories(dir);
    }
    ~TempDir() { fs::remove_all(dir); }
    static int& counter() {
        static int c = 0;
        return c;
    }
};

void write_file(const fs::path& p, const std::string& content) {
    std::ofstream out(p);
    out << content;
}

std::string const_csv(std::size_t rows, std::size_t cols, double v) {
    std::string s;
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) s += (c ? "," : "") + std::to_string(v);
        s += "\n";
    }
    return s;
}

}  // namespace

TEST_CASE("merge_excitement") {
    CHECK(merge_excitement("excitement") == EmotionLabel::happy);
    CHECK(merge_excitement("sad") == EmotionLabel::sad);
    CHECK(merge_excitement("angry") == EmotionLabel::angry);
    CHECK_THROWS_AS(merge_excitement("frustration"), DataError);
    CHECK_THROWS_AS(merge_excitement("joyful"), DataError);
}

TEST_CASE("majority_label") {
    CHECK(majority_label({"happy", "happy", "sad"}) == EmotionLabel::happy);
    CHECK(!majority_label({"happy", "sad", "angry"}).has_value());
    CHECK(majority_label({"excitement", "happy", "sad"}) == EmotionLabel::happy);
    CHECK(!majority_label({"frustration", "frustration", "happy"}).has_value());
    CHECK(majority_label({"neutral"}) == EmotionLabel::neutral);
    CHECK(!majority_label({"happy", "happy", "sad", "sad"}).has_value());
    CHECK_THROWS_AS(majority_label({"banana"}), DataError);
    CHECK_THROWS_AS(majority_label({}), DataError);
}

TEST_CASE("add_deltas: constant input has zero derivatives") {
    FeatureMatrix m{4, 2, {3, -1, 3, -1, 3, -1, 3, -1}};
    FeatureMatrix out = add_deltas(m);
    CHECK(out.cols == 6);
    CHECK(out.rows == 4);
    for (std::size_t t = 0; t < 4; ++t)
        for (std::size_t c = 0; c < 2; ++c) {
            CHECK(out.at(t, c) == m.at(t, c));
            CHECK(out.at(t, 2 + c) == 0.0);
            CHECK(out.at(t, 4 + c) == 0.0);
        }
}

TEST_CASE("add_deltas: linear ramp has unit delta, zero delta-delta inside") {
    const std::size_t t_len = 12;
    FeatureMatrix m{t_len, 1, std::vector<double>(t_len)};
    for (std::size_t t = 0; t < t_len; ++t) m.at(t, 0) = static_cast<double>(t);
    FeatureMatrix out = add_deltas(m);
    for (std::size_t t = 4; t + 4 < t_len; ++t) {
        CHECK(out.at(t, 1) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(out.at(t, 2) == doctest::Approx(0.0).epsilon(1e-12));
    }
}

TEST_CASE("add_deltas: width triples, is linear, commutes with channel permutation") {
    Rng rng(13);
    const std::size_t t_len = 6, d = 3;
    FeatureMatrix a{t_len, d, std::vector<double>(t_len * d)};
    FeatureMatrix b = a;
    for (double& v : a.data) v = rng.uniform(-2, 2);
    for (double& v : b.data) v = rng.uniform(-2, 2);

    CHECK(add_deltas(a).cols == 3 * d);

    FeatureMatrix mix{t_len, d, std::vector<double>(t_len * d)};
    for (std::size_t i = 0; i < mix.data.size(); ++i)
        mix.data[i] = 2.5 * a.data[i] - 0.5 * b.data[i];
    FeatureMatrix da = add_deltas(a), db = add_deltas(b), dmix = add_deltas(mix);
    for (std::size_t i = 0; i < dmix.data.size(); ++i)
        CHECK(dmix.data[i] == doctest::Approx(2.5 * da.data[i] - 0.5 * db.data[i])
                                  .epsilon(1e-12));

    // swap channels 0 and 2, deltas follow
    FeatureMatrix perm = a;
    for (std::size_t t = 0; t < t_len; ++t) std::swap(perm.at(t, 0), perm.at(t, 2));
    FeatureMatrix dperm = add_deltas(perm);
    for (std::size_t t = 0; t < t_len; ++t)
        for (std::size_t block = 0; block < 3; ++block) {
            CHECK(dperm.at(t, block * d + 0) == da.at(t, block * d + 2));
            CHECK(dperm.at(t, block * d + 2) == da.at(t, block * d + 0));
            CHECK(dperm.at(t, block * d + 1) == da.at(t, block * d + 1));
        }
}

TEST_CASE("tokenize_words: case, whitespace, edge punctuation") {
    CHECK(tokenize_words("I'm FINE.") == std::vector<std::string>{"i'm", "fine", "."});
    CHECK(tokenize_words("Hello,  world!!") ==
          std::vector<std::string>{"hello", ",", "world", "!", "!"});
    CHECK(tokenize_words("...") == std::vector<std::string>{".", ".", "."});
    CHECK(tokenize_words("well-known fact") ==
          std::vector<std::string>{"well-known", "fact"});
    CHECK(tokenize_words("\"quoted\"") == std::vector<std::string>{"\"", "quoted", "\""});
    CHECK(tokenize_words("").empty());
    CHECK(tokenize_words("   \t  ").empty());
}

TEST_CASE("tokenize_words is idempotent on its own joined output") {
    Rng rng(29);
    const std::vector<std::string> pieces{"Hey!",  "you,", "I'M",   "(fine)", "...",
                                          "don't", "stop", "a-b-c", "42",     "ok?!"};
    for (int rep = 0; rep < 50; ++rep) {
        Rng r = rng.derive("rep", rep);
        std::string s;
        const std::size_t n = 1 + r.bounded(8);
        for (std::size_t i = 0; i < n; ++i) s += pieces[r.bounded(pieces.size())] + " ";
        const auto once = tokenize_words(s);
        std::string joined;
        for (const auto& w : once) joined += w + " ";
        CHECK(tokenize_words(joined) == once);
    }
}

TEST_CASE("tokenize maps through the vocabulary with UNK fallback") {
    Vocabulary v;
    const int id_im = v.add("i'm");
    const int id_fine = v.add("fine");
    const int id_dot = v.add(".");
    CHECK(tokenize("I'm FINE.", v) == std::vector<int>{id_im, id_fine, id_dot});
    CHECK(tokenize("", v) == std::vector<int>{Vocabulary::kUnk});
    CHECK(tokenize("zzzunknown", v) == std::vector<int>{Vocabulary::kUnk});
}

TEST_CASE("vocabulary: reserved ids, round trip, hash") {
    Vocabulary v;
    CHECK(v.size() == 2);
    CHECK(v.id_of("<pad>") == Vocabulary::kPad);
    CHECK(v.id_of("<unk>") == Vocabulary::kUnk);
    CHECK(v.id_of("nope") == Vocabulary::kUnk);
    const int a = v.add("alpha");
    CHECK(v.add("alpha") == a);

    TempDir tmp;
    v.save(tmp.dir / "vocab.txt");
    Vocabulary loaded = Vocabulary::load(tmp.dir / "vocab.txt");
    CHECK(loaded.size() == v.size());
    CHECK(loaded.id_of("alpha") == a);
    CHECK(loaded.hash() == v.hash());
    loaded.add("beta");
    CHECK(loaded.hash() != v.hash());
}

TEST_CASE("build_vocabulary uses only the training fold") {
    std::vector<Utterance> utts(3);
    utts[0].transcript = "red apple";
    utts[1].transcript = "blue sky";
    utts[2].transcript = "green leaf";
    Vocabulary v = build_vocabulary(utts, {0, 2});
    CHECK(v.id_of("red") != Vocabulary::kUnk);
    CHECK(v.id_of("green") != Vocabulary::kUnk);
    CHECK(v.id_of("blue") == Vocabulary::kUnk);
}

TEST_CASE("pad_truncate: boundary, truncation, masks") {
    Utterance u;
    u.id = "u";
    u.label = EmotionLabel::sad;
    auto audio = std::make_shared<FeatureMatrix>();
    audio->rows = 750;
    audio->cols = 2;
    audio->data.assign(750 * 2, 1.0);
    u.audio = audio;
    u.prosody = std::make_shared<const std::vector<double>>(std::vector<double>{0.5});
    u.tokens = {2, 3, 4, 5, 6};

    PaddedSample s = pad_truncate(u, 750, 128);
    CHECK(s.audio.shape() == Shape{750, 2});
    CHECK(std::count(s.audio_mask.begin(), s.audio_mask.end(), true) == 750);
    CHECK(std::count(s.token_mask.begin(), s.token_mask.end(), true) == 5);
    CHECK(s.token_mask[4]);
    CHECK(!s.token_mask[5]);
    for (std::size_t i = 5; i < 128; ++i) CHECK(s.tokens[i] == Vocabulary::kPad);
    CHECK(s.label == label_index(EmotionLabel::sad));
    CHECK(s.prosody.numel() == 1);

    auto longer = std::make_shared<FeatureMatrix>();
    longer->rows = 751;
    longer->cols = 2;
    longer->data.assign(751 * 2, 0.0);
    longer->at(750, 0) = 99.0;  // truncated away
    longer->at(749, 0) = 7.0;   // kept
    u.audio = longer;
    PaddedSample s2 = pad_truncate(u, 750, 128);
    CHECK(s2.audio(749, 0) == 7.0);
    CHECK(std::count(s2.audio_mask.begin(), s2.audio_mask.end(), true) == 750);
}

TEST_CASE("make_folds: coverage, disjointness, block sizes") {
    for (std::size_t n : {std::size_t{10}, std::size_t{37}, std::size_t{101}}) {
        auto folds = make_folds(n, 10, Rng(1));
        REQUIRE(folds.size() == 10);
        std::set<std::size_t> all_test;
        for (const FoldSplit& f : folds) {
            std::set<std::size_t> train(f.train.begin(), f.train.end());
            std::set<std::size_t> dev(f.dev.begin(), f.dev.end());
            std::set<std::size_t> test(f.test.begin(), f.test.end());
            CHECK(train.size() + dev.size() + test.size() == n);
            for (std::size_t i : dev) CHECK(!train.count(i));
            for (std::size_t i : test) {
                CHECK(!train.count(i));
                CHECK(!dev.count(i));
                all_test.insert(i);
            }
        }
        CHECK(all_test.size() == n);
    }
    auto ten = make_folds(10, 10, Rng(2));
    for (const FoldSplit& f : ten) CHECK(f.test.size() == 1);
}

TEST_CASE("make_folds: block arithmetic at 5531 utterances") {
    auto folds = make_folds(5531, 10, Rng(3));
    std::size_t total_test = 0;
    for (const FoldSplit& f : folds) {
        CHECK((f.test.size() == 553 || f.test.size() == 554));
        CHECK((f.dev.size() == 553 || f.dev.size() == 554));
        CHECK(f.train.size() == 5531 - f.test.size() - f.dev.size());
        total_test += f.test.size();
    }
    CHECK(total_test == 5531);
}

TEST_CASE("make_folds: errors and determinism") {
    CHECK_THROWS_AS(make_folds(9, 10, Rng(1)), DataError);
    auto a = make_folds(64, 10, Rng(9));
    auto b = make_folds(64, 10, Rng(9));
    auto c = make_folds(64, 10, Rng(10));
    CHECK(a[3].test == b[3].test);
    bool differs = false;
    for (std::size_t k = 0; k < 10 && !differs; ++k) differs = a[k].test != c[k].test;
    CHECK(differs);
}

TEST_CASE("make_folds grouped by session keeps sessions whole") {
    std::vector<Utterance> utts(40);
    for (std::size_t i = 0; i < utts.size(); ++i) {
        utts[i].id = "u" + std::to_string(i);
        utts[i].session = "ses" + std::to_string(i % 12);
    }
    auto folds = make_folds(utts, 10, Rng(11), true);
    for (const FoldSplit& f : folds) {
        std::set<std::string> test_sessions, other_sessions;
        for (std::size_t i : f.test) test_sessions.insert(utts[i].session);
        for (std::size_t i : f.train) other_sessions.insert(utts[i].session);
        for (std::size_t i : f.dev) other_sessions.insert(utts[i].session);
        for (const std::string& s : test_sessions) CHECK(!other_sessions.count(s));
    }
}

TEST_CASE("load_manifest: empty manifest yields an empty dataset") {
    TempDir tmp;
    write_file(tmp.dir / "m.jsonl", "");
    LoadedDataset ds = load_manifest(tmp.dir / "m.jsonl");
    CHECK(ds.utterances.empty());
    CHECK(ds.rejected.empty());
}

TEST_CASE("load_manifest: valid rows come back sorted, labels resolved") {
    TempDir tmp;
    write_file(tmp.dir / "b.csv", const_csv(3, 2, 0.5));
    write_file(tmp.dir / "a.csv", const_csv(2, 2, 1.5));
    write_file(tmp.dir / "c.csv", const_csv(4, 2, -0.5));
    write_file(tmp.dir / "p.csv", "0.1,0.2,0.3\n");
    write_file(tmp.dir / "m.jsonl", R"({"mfcc_dim": 2, "prosody_dim": 3}
{"id": "b", "mfcc": "b.csv", "prosody": "p.csv", "transcript": "hey there", "label": "excitement", "session": "s1"}
{"id": "a", "mfcc": "a.csv", "prosody": "p.csv", "transcript": "oh no", "label": "sad", "session": "s1"}
{"id": "c", "mfcc": "c.csv", "prosody": "p.csv", "transcript": "hmm", "annotations": ["angry", "angry", "neutral"], "session": "s2"}
)");
    LoadedDataset ds = load_manifest(tmp.dir / "m.jsonl");
    REQUIRE(ds.utterances.size() == 3);
    CHECK(ds.feature_dim == 2);
    CHECK(ds.utterances[0].id == "a");
    CHECK(ds.utterances[1].id == "b");
    CHECK(ds.utterances[2].id == "c");
    CHECK(ds.utterances[1].label == EmotionLabel::happy);  // excitement merged
    CHECK(ds.utterances[2].label == EmotionLabel::angry);  // 2-of-3 majority
    CHECK(ds.utterances[0].audio->rows == 2);
    CHECK(ds.utterances[0].prosody->size() == 3);
}

TEST_CASE("load_manifest: feature width mismatch names the utterance") {
    TempDir tmp;
    write_file(tmp.dir / "bad.csv", const_csv(3, 3, 0.0));  // 3 cols, header says 4
    write_file(tmp.dir / "m.jsonl",
               R"({"mfcc_dim": 4}
{"id": "bad-utt", "mfcc": "bad.csv", "transcript": "x", "label": "sad"}
)");
    CHECK_THROWS_WITH_AS(load_manifest(tmp.dir / "m.jsonl"), doctest::Contains("bad-utt"),
                         DataError);
}

TEST_CASE("load_manifest: config expectation mismatch is a config error") {
    TempDir tmp;
    write_file(tmp.dir / "m.jsonl", R"({"mfcc_dim": 39}
)");
    CHECK_THROWS_AS(load_manifest(tmp.dir / "m.jsonl", 40), ConfigError);
}

TEST_CASE("load_manifest: missing file and unknown label name the utterance") {
    TempDir tmp;
    write_file(tmp.dir / "m.jsonl", R"({"mfcc_dim": 2}
{"id": "ghost", "mfcc": "nope.csv", "transcript": "x", "label": "sad"}
)");
    CHECK_THROWS_WITH_AS(load_manifest(tmp.dir / "m.jsonl"), doctest::Contains("ghost"),
                         DataError);

    write_file(tmp.dir / "ok.csv", const_csv(2, 2, 1.0));
    write_file(tmp.dir / "m2.jsonl", R"({"mfcc_dim": 2}
{"id": "weird", "mfcc": "ok.csv", "transcript": "x", "label": "ecstatic"}
)");
    CHECK_THROWS_WITH_AS(load_manifest(tmp.dir / "m2.jsonl"), doctest::Contains("weird"),
                         DataError);
}

TEST_CASE("load_manifest: out-of-scheme labels are rejected, not fatal") {
    TempDir tmp;
    write_file(tmp.dir / "ok.csv", const_csv(2, 2, 1.0));
    write_file(tmp.dir / "m.jsonl", R"({"mfcc_dim": 2}
{"id": "f1", "mfcc": "ok.csv", "transcript": "x", "label": "frustration"}
{"id": "f2", "mfcc": "ok.csv", "transcript": "y", "annotations": ["happy", "sad", "angry"]}
{"id": "keep", "mfcc": "ok.csv", "transcript": "z", "label": "happy"}
)");
    LoadedDataset ds = load_manifest(tmp.dir / "m.jsonl");
    REQUIRE(ds.utterances.size() == 1);
    CHECK(ds.utterances[0].id == "keep");
    REQUIRE(ds.rejected.size() == 2);
    CHECK(ds.rejected[0].id == "f1");
    CHECK(ds.rejected[1].id == "f2");
}

TEST_CASE("load_manifest: duplicate ids rejected") {
    TempDir tmp;
    write_file(tmp.dir / "ok.csv", const_csv(2, 2, 1.0));
    write_file(tmp.dir / "m.jsonl", R"({"mfcc_dim": 2}
{"id": "dup", "mfcc": "ok.csv", "transcript": "x", "label": "happy"}
{"id": "dup", "mfcc": "ok.csv", "transcript": "y", "label": "sad"}
)");
    CHECK_THROWS_WITH_AS(load_manifest(tmp.dir / "m.jsonl"), doctest::Contains("dup"),
                         DataError);
}

TEST_CASE("load_manifest: in-tool delta computation triples the width") {
    TempDir tmp;
    write_file(tmp.dir / "ok.csv", const_csv(5, 4, 2.0));
    write_file(tmp.dir / "m.jsonl", R"({"mfcc_dim": 4, "deltas": "compute"}
{"id": "u", "mfcc": "ok.csv", "transcript": "x", "label": "happy"}
)");
    LoadedDataset ds = load_manifest(tmp.dir / "m.jsonl");
    CHECK(ds.feature_dim == 12);
    REQUIRE(ds.utterances.size() == 1);
    CHECK(ds.utterances[0].audio->cols == 12);
}
