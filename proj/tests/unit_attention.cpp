#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "ser/attention.hpp"
#include "ser/error.hpp"
#include "ser/ops.hpp"
#include "testutil.hpp"

using namespace ser;

namespace {

Tensor random_tensor(Shape shape, Rng rng, double lim = 1.0, bool grad = false) {
    Tensor t = Tensor::zeros(std::move(shape), grad);
    for (double& v : t.values()) v = rng.uniform(-lim, lim);
    return t;
}

// Hand-built encoded sequence; masked rows carry the given filler value.
EncodedSequence make_sequence(std::size_t t_valid, std::size_t t_total, std::size_t d,
                              Rng rng, double masked_fill = 0.0, bool grad = false) {
    EncodedSequence s;
    s.outputs = Tensor::zeros({t_total, d}, grad);
    for (std::size_t t = 0; t < t_total; ++t)
        for (std::size_t j = 0; j < d; ++j)
            s.outputs.at(t, j) = t < t_valid ? rng.uniform(-1, 1) : masked_fill;
    s.mask.assign(t_total, false);
    for (std::size_t t = 0; t < t_valid; ++t) s.mask[t] = true;
    s.last_state = random_tensor({d}, rng.derive("last"), 1.0, grad);
    return s;
}

std::vector<std::vector<double>> rows_of(const Tensor& m) {
    std::vector<std::vector<double>> rows(m.dim(0), std::vector<double>(m.dim(1)));
    for (std::size_t r = 0; r < m.dim(0); ++r)
        for (std::size_t c = 0; c < m.dim(1); ++c) rows[r][c] = m(r, c);
    return rows;
}

}  // namespace

TEST_CASE("dot_attention: zero logits give uniform weights and the row mean") {
    Tensor q = Tensor::from({2}, {0, 0});
    Tensor kv = Tensor::from({4, 2}, {1, 2, 3, 4, 5, 6, 7, 8});
    std::vector<bool> mask(4, true);
    AttentionResult r = dot_attention(q, kv, mask);
    for (int i = 0; i < 4; ++i) CHECK(r.weights(i) == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(r.context(0) == doctest::Approx(4.0).epsilon(1e-14));
    CHECK(r.context(1) == doctest::Approx(5.0).epsilon(1e-14));
}

TEST_CASE("dot_attention: two-way hand case") {
    Tensor q = Tensor::from({2}, {1, 0});
    Tensor kv = Tensor::from({2, 2}, {1, 0, 0, 1});
    std::vector<bool> mask{true, true};
    AttentionResult r = dot_attention(q, kv, mask);
    CHECK(r.weights(0) == doctest::Approx(0.7310585786300049).epsilon(1e-12));
    CHECK(r.weights(1) == doctest::Approx(0.2689414213699951).epsilon(1e-12));
    CHECK(r.context(0) == doctest::Approx(0.7310585786300049).epsilon(1e-12));
    CHECK(r.context(1) == doctest::Approx(0.2689414213699951).epsilon(1e-12));
}

TEST_CASE("dot_attention: single position degenerates to that row") {
    Tensor q = Tensor::from({3}, {0.4, -2, 1});
    Tensor kv = Tensor::from({1, 3}, {5, 6, 7});
    AttentionResult r = dot_attention(q, kv, {true});
    CHECK(r.weights(0) == 1.0);
    for (int j = 0; j < 3; ++j) CHECK(r.context(j) == kv(0, j));
}

TEST_CASE("dot_attention: dim mismatch names the constraint, empty mask rejected") {
    Tensor q = Tensor::from({3}, {1, 2, 3});
    Tensor kv = Tensor::zeros({2, 4});
    CHECK_THROWS_WITH_AS(dot_attention(q, kv, {true, true}),
                         doctest::Contains("2*d_h_text == 2*d_h_audio + d_p"), ConfigError);
    Tensor q4 = Tensor::zeros({4});
    CHECK_THROWS_AS(dot_attention(q4, kv, {false, false}), ValidationError);
}

TEST_CASE("dot_attention: equal rows make weights uniform regardless of query") {
    Rng rng(3);
    for (int rep = 0; rep < 10; ++rep) {
        Rng r = rng.derive("rep", rep);
        std::vector<double> one_row{r.uniform(-2, 2), r.uniform(-2, 2), r.uniform(-2, 2)};
        Tensor kv = Tensor::zeros({5, 3});
        for (std::size_t t = 0; t < 5; ++t)
            for (std::size_t j = 0; j < 3; ++j) kv.at(t, j) = one_row[j];
        std::vector<bool> mask{true, true, true, true, false};
        Tensor q = random_tensor({3}, r.derive("q"), 5.0);
        AttentionResult res = dot_attention(q, kv, mask);
        for (int i = 0; i < 4; ++i)
            CHECK(res.weights(i) == doctest::Approx(0.25).epsilon(1e-12));
        CHECK(res.weights(4) == 0.0);
    }
}

TEST_CASE("mha1: single text token collapses to a concatenation") {
    Rng rng(9);
    EncodedSequence audio = make_sequence(2, 2, 4, rng.derive("a"));
    EncodedSequence text = make_sequence(1, 3, 4, rng.derive("t"));
    FusedRepresentation f = mha1(audio, text);
    REQUIRE(f.hop_trace.size() == 1);
    CHECK(f.hop_trace[0].weights(0) == 1.0);
    CHECK(f.fused.numel() == 8);
    for (std::size_t j = 0; j < 4; ++j) {
        CHECK(f.fused(j) == doctest::Approx(text.outputs(0, j)).epsilon(1e-15));
        CHECK(f.fused(4 + j) == doctest::Approx(audio.last_state(j)).epsilon(1e-15));
    }
}

TEST_CASE("mha1/2/3 match the straight-line oracle on random instances") {
    Rng rng(101);
    for (int rep = 0; rep < 25; ++rep) {
        Rng r = rng.derive("rep", rep);
        const std::size_t d = 2 + r.bounded(4);
        const std::size_t ta = 1 + r.bounded(4), tt = 1 + r.bounded(4);
        EncodedSequence audio = make_sequence(ta, ta + r.bounded(3), d, r.derive("a"));
        EncodedSequence text = make_sequence(tt, tt + r.bounded(3), d, r.derive("t"));

        testutil::RefMhaResult ref =
            testutil::ref_mha(rows_of(audio.outputs), audio.mask, audio.last_state.values(),
                              rows_of(text.outputs), text.mask);

        FusedRepresentation f1 = mha1(audio, text);
        FusedRepresentation f2 = mha2(audio, text);
        FusedRepresentation f3 = mha3(audio, text);
        REQUIRE(f1.hop_trace.size() == 1);
        REQUIRE(f2.hop_trace.size() == 2);
        REQUIRE(f3.hop_trace.size() == 3);

        for (std::size_t j = 0; j < 2 * d; ++j) {
            CHECK(f1.fused(j) == doctest::Approx(ref.h_mha1[j]).epsilon(1e-10));
            CHECK(f2.fused(j) == doctest::Approx(ref.h_mha2[j]).epsilon(1e-10));
            CHECK(f3.fused(j) == doctest::Approx(ref.h_mha3[j]).epsilon(1e-10));
        }
        for (std::size_t i = 0; i < text.mask.size(); ++i) {
            CHECK(f2.hop_trace[0].weights(i) ==
                  doctest::Approx(ref.hop1.weights[i]).epsilon(1e-10));
            CHECK(f3.hop_trace[2].weights(i) ==
                  doctest::Approx(ref.hop3.weights[i]).epsilon(1e-10));
        }
        for (std::size_t i = 0; i < audio.mask.size(); ++i)
            CHECK(f3.hop_trace[1].weights(i) ==
                  doctest::Approx(ref.hop2.weights[i]).epsilon(1e-10));
    }
}

TEST_CASE("hop degeneracy: single frame and single token reduce to concatenations") {
    Rng rng(55);
    EncodedSequence audio = make_sequence(1, 1, 3, rng.derive("a"));
    // make last_state equal the single audio row, as a real encoder would
    for (std::size_t j = 0; j < 3; ++j) audio.last_state.at(j) = audio.outputs(0, j);
    EncodedSequence text = make_sequence(1, 1, 3, rng.derive("t"));

    for (auto* fn : {&mha2, &mha3}) {
        FusedRepresentation f = (*fn)(audio, text, {});
        for (std::size_t j = 0; j < 3; ++j) {
            CHECK(f.fused(j) == doctest::Approx(text.outputs(0, j)).epsilon(1e-15));
            CHECK(f.fused(3 + j) == doctest::Approx(audio.outputs(0, j)).epsilon(1e-15));
        }
    }
}

TEST_CASE("attention weight properties over random instances") {
    Rng rng(202);
    for (int rep = 0; rep < 40; ++rep) {
        Rng r = rng.derive("rep", rep);
        const std::size_t d = 2 + r.bounded(3);
        EncodedSequence audio = make_sequence(1 + r.bounded(4), 5, d, r.derive("a"), 3.5);
        EncodedSequence text = make_sequence(1 + r.bounded(4), 5, d, r.derive("t"), -2.5);
        FusedRepresentation f = mha3(audio, text);
        for (const AttentionResult& hop : f.hop_trace) {
            double total = 0.0;
            for (std::size_t i = 0; i < hop.weights.numel(); ++i) {
                CHECK(hop.weights(i) >= 0.0);
                total += hop.weights(i);
            }
            CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
        }
        for (std::size_t i = 0; i < 5; ++i) {
            if (!text.mask[i]) {
                CHECK(f.hop_trace[0].weights(i) == 0.0);
                CHECK(f.hop_trace[2].weights(i) == 0.0);
            }
            if (!audio.mask[i]) CHECK(f.hop_trace[1].weights(i) == 0.0);
        }
    }
}

TEST_CASE("context lies in the per-coordinate hull of unmasked rows") {
    Rng rng(203);
    for (int rep = 0; rep < 30; ++rep) {
        Rng r = rng.derive("rep", rep);
        const std::size_t d = 3, t_valid = 1 + r.bounded(5), t_total = t_valid + r.bounded(3);
        EncodedSequence seq = make_sequence(t_valid, t_total, d, r.derive("s"), 99.0);
        Tensor q = random_tensor({d}, r.derive("q"), 2.0);
        AttentionResult res = dot_attention(q, seq.outputs, seq.mask);
        for (std::size_t j = 0; j < d; ++j) {
            double lo = 1e300, hi = -1e300;
            for (std::size_t t = 0; t < t_valid; ++t) {
                lo = std::min(lo, seq.outputs(t, j));
                hi = std::max(hi, seq.outputs(t, j));
            }
            CHECK(res.context(j) >= lo - 1e-12);
            CHECK(res.context(j) <= hi + 1e-12);
        }
    }
}

TEST_CASE("garbage in masked rows never reaches the fused output") {
    Rng rng(204);
    EncodedSequence audio = make_sequence(2, 4, 3, rng.derive("a"), 0.0);
    EncodedSequence text = make_sequence(2, 4, 3, rng.derive("t"), 0.0);
    FusedRepresentation base = mha3(audio, text);

    Rng junk = rng.derive("junk");
    for (std::size_t t = 2; t < 4; ++t)
        for (std::size_t j = 0; j < 3; ++j) {
            audio.outputs.at(t, j) = junk.uniform(-50, 50);
            text.outputs.at(t, j) = junk.uniform(-50, 50);
        }
    FusedRepresentation poked = mha3(audio, text);
    for (std::size_t j = 0; j < base.fused.numel(); ++j)
        CHECK(poked.fused(j) == base.fused(j));
}

TEST_CASE("gradients flow through all hops (finite differences)") {
    Rng rng(205);
    EncodedSequence audio = make_sequence(3, 4, 3, rng.derive("a"), 0.0, true);
    EncodedSequence text = make_sequence(2, 4, 3, rng.derive("t"), 0.0, true);
    auto loss = [&]() { return sum(tanh(mha3(audio, text).fused)); };
    CHECK(testutil::fd_max_rel_error({audio.outputs, text.outputs, audio.last_state}, loss) <
          1e-4);
}

TEST_CASE("projected mode: per-hop query projections reconcile mismatched dims") {
    Rng rng(206);
    const std::size_t d_a = 5, d_t = 3;
    EncodedSequence audio = make_sequence(3, 4, d_a, rng.derive("a"), 0.0, true);
    EncodedSequence text = make_sequence(2, 3, d_t, rng.derive("t"), 0.0, true);

    CHECK_THROWS_AS(mha1(audio, text), ConfigError);

    HopProjections proj;
    proj.hop1 = random_tensor({d_a, d_t}, rng.derive("p1"), 0.7, true);
    proj.hop2 = random_tensor({d_t, d_a}, rng.derive("p2"), 0.7, true);
    proj.hop3 = random_tensor({d_a, d_t}, rng.derive("p3"), 0.7, true);

    FusedRepresentation f = mha3(audio, text, proj);
    CHECK(f.fused.numel() == d_t + d_a);
    REQUIRE(f.hop_trace.size() == 3);

    auto loss = [&]() { return sum(tanh(mha3(audio, text, proj).fused)); };
    CHECK(testutil::fd_max_rel_error({*proj.hop1, *proj.hop2, *proj.hop3, audio.outputs}, loss) <
          1e-4);
}
