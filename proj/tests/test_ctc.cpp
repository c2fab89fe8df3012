// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "longalign/ctc.hpp"
#include "longalign/errors.hpp"
#include "longalign/ngram_lm.hpp"
#include "longalign/unicode.hpp"
#include "oracles.hpp"

using namespace longalign;
using ctc::LogitMatrix;

namespace {

const std::vector<std::string> kVocab{"<pad>", "|", "a", "b"};

ctc::BeamOptions plain_beam(std::size_t width) {
    ctc::BeamOptions o;
    o.alpha = 0.0;
    o.beta = 0.0;
    o.beam_width = width;
    return o;
}

ctc::BeamOptions exhaustive_beam() {
    auto o = plain_beam(100000);
    o.token_min_logp = -1e9;
    o.prune_margin = 1e9;
    return o;
}

// Best acoustic label sequence by enumeration, collapsed to text.
std::string exhaustive_best_text(const LogitMatrix& m) {
    const std::size_t frames = m.num_frames(), v = m.vocab_size();
    std::vector<std::size_t> digits(frames, 0), best;
    double best_score = -1e300;
    while (true) {
        double s = 0;
        for (std::size_t t = 0; t < frames; ++t) s += m.row(t)[digits[t]];
        if (s > best_score) {
            best_score = s;
            best = digits;
        }
        std::size_t t = 0;
        while (t < frames && ++digits[t] == v) digits[t++] = 0;
        if (t == frames) break;
    }
    std::string text, word;
    for (std::size_t t = 0; t < frames; ++t) {
        const auto l = best[t];
        if (l == m.blank_id || (t > 0 && best[t - 1] == l)) continue;
        if (l == m.word_delim_id) {
            if (!word.empty()) text += (text.empty() ? "" : " ") + word;
            word.clear();
        } else {
            word += m.vocab[l];
        }
    }
    if (!word.empty()) text += (text.empty() ? "" : " ") + word;
    return text;
}

std::vector<std::uint32_t> targets_for(const LogitMatrix& m, const std::u32string& ref, bool edges) {
    std::vector<std::uint32_t> out;
    if (edges) out.push_back(m.word_delim_id);
    for (char32_t c : ref) {
        if (c == U' ') {
            out.push_back(m.word_delim_id);
            continue;
        }
        for (std::uint32_t v = 0; v < m.vocab_size(); ++v) {
            if (m.vocab[v] == unicode::encode(c)) out.push_back(v);
        }
    }
    if (edges) out.push_back(m.word_delim_id);
    return out;
}

std::u32string random_ref(oracle::Rng& rng, const LogitMatrix& m, std::size_t max_len, bool spaces) {
    const std::size_t letters = m.vocab_size() - 2;
    std::u32string ref;
    const std::size_t n = oracle::uniform(rng, 1, max_len);
    for (std::size_t i = 0; i < n; ++i) {
        const bool space = spaces && i > 0 && i + 1 < n && ref.back() != U' ' && oracle::uniform(rng, 0, 3) == 0;
        ref.push_back(space ? U' ' : static_cast<char32_t>(U'a' + oracle::uniform(rng, 0, letters - 1)));
    }
    return ref;
}

void check_against_oracle(const LogitMatrix& m, const std::u32string& ref, bool edges) {
    const auto targets = targets_for(m, ref, edges);
    const auto brute = oracle::brute_force_align(m, targets, edges);
    ctc::AlignOptions opts;
    opts.optional_edge_delimiters = edges;
    if (!brute) {
        CHECK_THROWS_AS(ctc::force_align(m, ref, opts), TooShortAudio);
        return;
    }
    const auto path = ctc::force_align(m, ref, opts);
    CHECK(path.score == doctest::Approx(brute->score).epsilon(1e-9));
    CHECK(std::abs(path.score - brute->score) <= 1e-6);
    const auto spans = oracle::target_spans(*brute, targets.size());
    const std::size_t offset = edges ? 1 : 0;
    REQUIRE(path.chars.size() == ref.size());
    for (std::size_t k = 0; k < ref.size(); ++k) {
        CHECK(path.chars[k].start_frame == spans[k + offset].first);
        CHECK(path.chars[k].end_frame == spans[k + offset].second);
    }
}

}  // namespace

TEST_CASE("greedy decoding collapses repeats and blanks") {
    LogitMatrix empty;
    empty.vocab = kVocab;
    const auto none = ctc::greedy_decode(empty);
    CHECK(none.text.empty());
    CHECK(none.words.empty());

    const auto m = oracle::peaked_logits(kVocab, {0, 2, 2, 0, 3});
    const auto hyp = ctc::greedy_decode(m);
    CHECK(hyp.text == "ab");
    REQUIRE(hyp.words.size() == 1);
    CHECK(hyp.words[0].start_ms == 20.0);
    CHECK(hyp.words[0].end_ms == 100.0);

    const auto aa = oracle::peaked_logits(kVocab, {2, 0, 2});
    CHECK(ctc::greedy_decode(aa).text == "aa");
}

TEST_CASE("greedy word times follow the delimiter") {
    const auto m = oracle::peaked_logits(kVocab, {2, 1, 3});
    const auto hyp = ctc::greedy_decode(m);
    CHECK(hyp.text == "a b");
    REQUIRE(hyp.words.size() == 2);
    CHECK(hyp.words[0].word == "a");
    CHECK(hyp.words[0].start_ms == 0.0);
    CHECK(hyp.words[0].end_ms == 20.0);
    CHECK(hyp.words[1].word == "b");
    CHECK(hyp.words[1].start_ms == 40.0);
    CHECK(hyp.words[1].end_ms == 60.0);
}

TEST_CASE("beam of width one reduces to greedy") {
    oracle::Rng rng(31);
    for (int iter = 0; iter < 1000; ++iter) {
        const auto m = oracle::random_logits(rng, oracle::uniform(rng, 0, 50), oracle::uniform(rng, 3, 8));
        CHECK(ctc::beam_decode(m, nullptr, plain_beam(1)).text == ctc::greedy_decode(m).text);
    }
}

TEST_CASE("peaked logits decode to their spelling under a weak language model") {
    const std::vector<std::string> corpus{"ab ba", "a b", "bb a"};
    const auto model = lm::train(corpus);
    oracle::Rng rng(32);
    for (int iter = 0; iter < 60; ++iter) {
        const std::size_t frames = oracle::uniform(rng, 1, 6);
        std::vector<std::uint32_t> labels(frames);
        for (auto& l : labels) l = static_cast<std::uint32_t>(oracle::uniform(rng, 0, kVocab.size() - 1));
        const auto m = oracle::peaked_logits(kVocab, labels, 0.97);
        auto opts = plain_beam(16);
        opts.alpha = 0.05;
        opts.beta = 0.1;
        CHECK(ctc::beam_decode(m, &model, opts).text == exhaustive_best_text(m));
    }
}

TEST_CASE("a strong language model flips an ambiguous frame") {
    const std::vector<std::string> corpus{"b", "b", "b", "b", "a"};
    const auto model = lm::train(corpus);
    LogitMatrix m;
    m.vocab = kVocab;
    const std::vector<double> f0{0.05, 0.05, 0.5, 0.4};
    const std::vector<double> f1{0.97, 0.01, 0.01, 0.01};
    for (double x : f0) m.data.push_back(static_cast<float>(std::log(x)));
    for (double x : f1) m.data.push_back(static_cast<float>(std::log(x)));

    // Best single path for either word is the letter then a blank.
    const auto score = [&](const std::string& w, double alpha) {
        const std::uint32_t l = w == "a" ? 2 : 3;
        const std::vector<std::string> bos{"<s>"}, ctx{"<s>", w};
        const double lm_part = lm::logprob(model, bos, w) + lm::logprob(model, ctx, "</s>");
        return static_cast<double>(m.row(0)[l]) + m.row(1)[0] + alpha * std::log(10.0) * lm_part;
    };
    for (double alpha : {0.0, 0.2, 3.0}) {
        auto opts = plain_beam(8);
        opts.alpha = alpha;
        const auto hyp = ctc::beam_decode(m, &model, opts);
        CHECK(hyp.text == (score("b", alpha) > score("a", alpha) ? "b" : "a"));
    }
    auto opts = plain_beam(8);
    CHECK(ctc::beam_decode(m, &model, opts).text == "a");
    opts.alpha = 3.0;
    CHECK(ctc::beam_decode(m, &model, opts).text == "b");
}

TEST_CASE("frames outside speech segments are silent") {
    const auto m = oracle::peaked_logits(kVocab, {2, 2, 1, 3, 3});
    CHECK(ctc::beam_decode(m, nullptr, plain_beam(4)).text == "a b");
    const std::vector<SpeechSegment> first{{0.0, 40.0}};
    const auto hyp = ctc::beam_decode(m, nullptr, plain_beam(4), first);
    CHECK(hyp.text == "a");
    const std::vector<SpeechSegment> late{{60.0, 100.0}};
    CHECK(ctc::beam_decode(m, nullptr, plain_beam(4), late).text == "b");
    const std::vector<SpeechSegment> outside{{0.0, 140.0}};
    CHECK_THROWS_AS(ctc::beam_decode(m, nullptr, plain_beam(4), outside), InvalidSegment);
}

TEST_CASE("decoded word times lie on the frame grid") {
    oracle::Rng rng(33);
    for (int iter = 0; iter < 100; ++iter) {
        auto m = oracle::random_logits(rng, oracle::uniform(rng, 1, 40), oracle::uniform(rng, 3, 6), 6.0);
        m.start_offset_ms = 1000.0;
        const auto hyp = ctc::beam_decode(m, nullptr, plain_beam(8));
        std::string joined;
        double prev_end = m.start_offset_ms;
        for (const auto& w : hyp.words) {
            if (!joined.empty()) joined += ' ';
            joined += w.word;
            CHECK(w.start_ms >= prev_end);
            CHECK(w.end_ms > w.start_ms);
            CHECK(w.end_ms <= m.end_ms());
            const double steps = (w.start_ms - m.start_offset_ms) / m.frame_duration_ms;
            CHECK(steps == std::round(steps));
            prev_end = w.end_ms;
        }
        CHECK(joined == hyp.text);
    }
}

TEST_CASE("a forced path never beats the free best path") {
    oracle::Rng rng(34);
    for (int iter = 0; iter < 60; ++iter) {
        const auto m = oracle::random_logits(rng, oracle::uniform(rng, 1, 6), oracle::uniform(rng, 3, 4));
        const auto hyp = ctc::beam_decode(m, nullptr, exhaustive_beam());
        if (hyp.text.empty()) continue;
        ctc::AlignOptions opts;
        opts.optional_edge_delimiters = true;
        const auto path = ctc::force_align(m, unicode::decode(hyp.text), opts);
        CHECK(path.score <= hyp.score + 1e-9);
    }
}

TEST_CASE("forced alignment of an exact spelling") {
    const auto m = oracle::peaked_logits(kVocab, {2, 2, 0, 1, 3});
    const auto path = ctc::force_align(m, U"a b");
    REQUIRE(path.chars.size() == 3);
    CHECK(path.chars[0].start_frame == 0);
    CHECK(path.chars[0].end_frame == 1);
    CHECK(path.chars[1].start_frame == 3);
    CHECK(path.chars[2].start_frame == 4);
    CHECK(path.chars[2].end_frame == 4);
}

TEST_CASE("forced alignment errors") {
    const auto m = oracle::peaked_logits(kVocab, {2, 2});
    CHECK_THROWS_AS(ctc::force_align(m, U"aa"), TooShortAudio);
    CHECK_THROWS_AS(ctc::force_align(m, U"z"), UnknownSymbol);
    CHECK_NOTHROW(ctc::force_align(oracle::peaked_logits(kVocab, {2, 0, 2}), U"aa"));
}

TEST_CASE("forced alignment matches exhaustive enumeration") {
    oracle::Rng rng(35);
    for (int iter = 0; iter < 200; ++iter) {
        const auto m = oracle::random_logits(rng, oracle::uniform(rng, 1, 8), oracle::uniform(rng, 3, 5));
        check_against_oracle(m, random_ref(rng, m, 3, true), false);
    }
}

TEST_CASE("optional edge delimiters match exhaustive enumeration") {
    oracle::Rng rng(36);
    for (int iter = 0; iter < 100; ++iter) {
        const auto m = oracle::random_logits(rng, oracle::uniform(rng, 1, 7), oracle::uniform(rng, 3, 4));
        check_against_oracle(m, random_ref(rng, m, 2, false), true);
    }
}

TEST_CASE("ties resolve to the latest advance") {
    // Uniform rows make every valid path score the same.
    LogitMatrix m;
    m.vocab = kVocab;
    for (int t = 0; t < 4; ++t) {
        for (int v = 0; v < 4; ++v) m.data.push_back(static_cast<float>(std::log(0.25)));
    }
    check_against_oracle(m, U"ab", false);
    check_against_oracle(m, U"a", true);
    const auto path = ctc::force_align(m, U"a");
    CHECK(path.chars[0].start_frame == 3);
}

TEST_CASE("word offsets from an alignment path") {
    const auto m = oracle::peaked_logits(kVocab, {2, 1, 3});
    const auto words = ctc::word_offsets(ctc::force_align(m, U"a b"), m);
    REQUIRE(words.size() == 2);
    CHECK(words[0].word == "a");
    CHECK(words[0].start_ms == 0.0);
    CHECK(words[0].end_ms == 20.0);
    CHECK(words[1].word == "b");
    CHECK(words[1].start_ms == 40.0);
    CHECK(words[1].end_ms == 60.0);

    const auto single = ctc::word_offsets(ctc::force_align(oracle::peaked_logits(kVocab, {0, 2, 3, 0}), U"ab"), m);
    REQUIRE(single.size() == 1);
    CHECK(single[0].start_ms == 20.0);
    CHECK(single[0].end_ms == 60.0);

    CHECK(ctc::word_offsets(ctc::AlignmentPath{}, m).empty());
}
