// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <string>
#include <vector>

#include "longalign/filters.hpp"
#include "longalign/unicode.hpp"
#include "oracles.hpp"

using namespace longalign;
using filters::SentenceRecord;
using postproc::WordAlignment;
using textnorm::CharRange;

namespace {

// Words of equal length laid out back to back.
SentenceRecord sentence(const std::string& id, std::size_t words, double word_ms, double cer = 0.0) {
    SentenceRecord s;
    s.id = id;
    s.speech_id = id;
    s.audio = "a.flac";
    for (std::size_t k = 0; k < words; ++k) {
        const std::size_t cs = unicode::length(s.text);
        if (k) s.text += ' ';
        s.text += "riječ";
        s.words.push_back({"riječ", cs + (k ? 1 : 0), unicode::length(s.text), k * word_ms, (k + 1) * word_ms});
    }
    s.duration_ms = static_cast<double>(words) * word_ms;
    s.cer = cer;
    return s;
}

SentenceRecord with_length(double duration_ms, std::size_t chars) {
    SentenceRecord s;
    s.id = "x";
    s.text = std::string(chars, 'a');
    s.words.push_back({s.text, 0, chars, 0.0, duration_ms});
    s.duration_ms = duration_ms;
    return s;
}

postproc::AlignedSpeech aligned(const std::string& id, double cer) {
    postproc::AlignedSpeech a;
    a.speech_id = id;
    a.text = "Dobar dan. Hvala.";
    a.cer = cer;
    a.words = {{"Dobar", 0, 5, 0, 400}, {"dan.", 6, 10, 400, 800}, {"Hvala.", 11, 17, 1000, 1500}};
    a.sentences = {{{0, 10}, "dobar dan", 2, 0.0, true}, {{11, 17}, "hvala", 1, 0.05, true}};
    a.asr_tokens = 3;
    return a;
}

std::vector<std::string> ids(const std::vector<SentenceRecord>& v) {
    std::vector<std::string> out;
    for (const auto& s : v) out.push_back(s.id);
    return out;
}

}  // namespace

TEST_CASE("speech filter drops at or above the limit") {
    postproc::FileRecord r;
    r.audio_id = "f";
    r.entries.emplace_back(aligned("keep", 0.59));
    r.entries.emplace_back(aligned("drop", 0.60));
    r.entries.emplace_back(postproc::UnalignedSpeech{"none", "Tekst."});
    r.entries.emplace_back(postproc::UnmatchedAsr{"buka", 0, 10, 0, 1});
    const std::vector<postproc::FileRecord> records{r};
    const auto kept = filters::filter_speeches(records);
    REQUIRE(kept.size() == 1);
    CHECK(kept[0].speech.speech_id == "keep");
    CHECK(kept[0].audio_id == "f");
    CHECK(filters::keep_speech(0.59, 0.60));
    CHECK_FALSE(filters::keep_speech(0.60, 0.60));
}

TEST_CASE("sentence filter keeps the limit itself") {
    std::vector<SentenceRecord> v{sentence("a", 3, 300, 0.10), sentence("b", 3, 300, 0.101), sentence("c", 3, 300, 0.0)};
    CHECK(ids(filters::filter_sentence_cer(v)) == std::vector<std::string>{"a", "c"});
}

TEST_CASE("length ratio filter in seconds per character") {
    std::vector<SentenceRecord> v{with_length(2000, 50), with_length(15000, 20), with_length(10000, 50),
                                  with_length(10500, 50), with_length(100, 0)};
    v[0].id = "fast";
    v[1].id = "slow";
    v[2].id = "edge";
    v[3].id = "over";
    v[4].id = "empty";
    CHECK(ids(filters::filter_sentence_ratio(v)) == std::vector<std::string>{"fast", "edge"});
}

TEST_CASE("fallback sentence splitting") {
    const std::vector<CharRange> given{{0, 3}, {4, 9}};
    CHECK(filters::split_sentences("abc defgh", given) == given);
    CHECK(filters::split_sentences("Prvo. Drugo!") == std::vector<CharRange>{{0, 5}, {6, 12}});
    CHECK(filters::split_sentences("dr. Novak govori.") == std::vector<CharRange>{{0, 17}});
    CHECK(filters::split_sentences("Govori Dr. Novak. Zatim ja.") == std::vector<CharRange>{{0, 17}, {18, 27}});
    CHECK(filters::split_sentences("Je li? da. Možda") == std::vector<CharRange>{{0, 10}, {11, 16}});
    CHECK(filters::split_sentences("Čekaj...  Šuti!") == std::vector<CharRange>{{0, 8}, {10, 15}});
    CHECK(filters::split_sentences("").empty());
}

TEST_CASE("sentences carry offsets relative to their text") {
    const filters::RetainedSpeech rs{"file", aligned("sp", 0.1)};
    const auto built = filters::build_sentences(rs);
    REQUIRE(built.size() == 2);
    CHECK(built[0].id == "sp.s0");
    CHECK(built[0].audio == "file.flac");
    CHECK(built[0].text == "Dobar dan.");
    CHECK(built[0].duration_ms == 800.0);
    CHECK(built[0].asr_tokens == 2);
    CHECK(built[1].text == "Hvala.");
    REQUIRE(built[1].words.size() == 1);
    CHECK(built[1].words[0].char_start == 0);
    CHECK(built[1].words[0].char_end == 6);
    CHECK(built[1].cer == 0.05);

    const auto j = filters::to_json(built[1]);
    CHECK(j.at("words").at(0).at("w") == "Hvala.");
    const auto back = filters::sentence_from_json(j);
    CHECK(filters::to_json(back) == j);
    CHECK(back.duration_ms == 500.0);
}

TEST_CASE("sentences without aligned words are skipped") {
    auto a = aligned("sp", 0.1);
    a.words.pop_back();
    const auto built = filters::build_sentences({"f", a});
    REQUIRE(built.size() == 1);
    CHECK(built[0].id == "sp.s0");
}

TEST_CASE("sentence filters commute and are idempotent") {
    oracle::Rng rng(81);
    for (int iter = 0; iter < 50; ++iter) {
        std::vector<SentenceRecord> v;
        for (int k = 0; k < 20; ++k) {
            auto s = sentence("s" + std::to_string(k), oracle::uniform(rng, 1, 6), oracle::uniform_real(rng, 100, 2500),
                              oracle::uniform_real(rng, 0.0, 0.2));
            v.push_back(s);
        }
        const auto a = filters::filter_sentence_ratio(filters::filter_sentence_cer(v));
        const auto b = filters::filter_sentence_cer(filters::filter_sentence_ratio(v));
        CHECK(ids(a) == ids(b));
        CHECK(ids(filters::filter_sentence_cer(a)) == ids(a));
        CHECK(ids(filters::filter_sentence_ratio(a)) == ids(a));
        for (const auto& s : a) {
            CHECK(s.cer <= 0.10);
            CHECK(s.duration_ms / 1000.0 / unicode::length(s.text) <= 0.2);
        }
    }
}

TEST_CASE("the full chain re-validates") {
    postproc::FileRecord r;
    r.audio_id = "f";
    r.asr_tokens = 12;
    r.entries.emplace_back(aligned("ok", 0.2));
    auto noisy = aligned("noisy", 0.2);
    noisy.sentences[1].cer = 0.5;
    r.entries.emplace_back(noisy);
    r.entries.emplace_back(aligned("bad", 0.7));
    const std::vector<postproc::FileRecord> records{r};
    const auto kept = filters::run_filters(records, {});
    CHECK(ids(kept) == std::vector<std::string>{"ok.s0", "ok.s1", "noisy.s0"});
    CHECK(filters::yield_rate(records, kept) == doctest::Approx(5.0 / 12.0));
}

TEST_CASE("resegmenting into playback chunks") {
    const auto four = sentence("four", 4, 1000);
    auto chunks = filters::resegment(four);
    REQUIRE(chunks.size() == 1);
    CHECK(chunks[0].word_end == 4);

    const auto ten = sentence("ten", 10, 1000);
    chunks = filters::resegment(ten);
    REQUIRE(chunks.size() == 2);
    CHECK(chunks[0].duration_s() == 5.0);
    CHECK(chunks[1].duration_s() == 5.0);
    CHECK(chunks[1].sentence_id == "ten");
    CHECK(chunks[1].index == 1);

    chunks = filters::resegment(sentence("two", 2, 1000));
    REQUIRE(chunks.size() == 1);
    CHECK(chunks[0].duration_s() == 2.0);

    chunks = filters::resegment(sentence("long", 1, 9000));
    REQUIRE(chunks.size() == 1);
    CHECK(chunks[0].oversize);
    CHECK(filters::to_json(chunks[0]).at("oversize") == true);
}

TEST_CASE("chunks partition the words and respect the maximum") {
    oracle::Rng rng(82);
    for (int iter = 0; iter < 200; ++iter) {
        SentenceRecord s;
        s.id = "r";
        double t = 0;
        for (std::size_t k = 0; k < oracle::uniform(rng, 1, 40); ++k) {
            t += oracle::uniform_real(rng, 0, 300);
            const double d = oracle::uniform(rng, 0, 20) == 0 ? oracle::uniform_real(rng, 6000, 8000)
                                                                : oracle::uniform_real(rng, 100, 1500);
            s.words.push_back({"w", 0, 1, t, t + d});
            t += d;
        }
        const auto chunks = filters::resegment(s);
        REQUIRE_FALSE(chunks.empty());
        CHECK(chunks.front().word_begin == 0);
        CHECK(chunks.back().word_end == s.words.size());
        for (std::size_t k = 0; k < chunks.size(); ++k) {
            if (k) CHECK(chunks[k].word_begin == chunks[k - 1].word_end);
            CHECK(chunks[k].word_end > chunks[k].word_begin);
            if (chunks[k].word_end - chunks[k].word_begin > 1) CHECK(chunks[k].duration_s() <= 6.0);
            CHECK(chunks[k].oversize == (chunks[k].duration_s() > 6.0));
        }
    }
}

TEST_CASE("dataset statistics") {
    const auto empty = filters::dataset_stats({});
    CHECK(empty.sentences == 0);
    CHECK(empty.size_bytes == 0);
    CHECK(empty.median_sentence_s == 0.0);

    const std::vector<SentenceRecord> three{sentence("a", 2, 1000), sentence("b", 9, 1000), sentence("c", 10, 1000)};
    const auto st = filters::dataset_stats(three);
    CHECK(st.median_sentence_s == 9.0);
    CHECK(st.sentences == 3);
    CHECK(st.words == 21);
    CHECK(st.characters == 21 * 5 + 18);
    CHECK(st.duration_h == doctest::Approx(21.0 / 3600.0));
    CHECK(st.size_bytes == filters::to_jsonl(three).size());
}

TEST_CASE("statistics match the bookkeeping of a generated corpus") {
    oracle::Rng rng(83);
    std::vector<SentenceRecord> corpus;
    std::size_t words = 0, chars = 0;
    double total_ms = 0;
    for (int k = 0; k < 100; ++k) {
        const std::size_t n = oracle::uniform(rng, 1, 15);
        const double ms = static_cast<double>(oracle::uniform(rng, 200, 700));
        corpus.push_back(sentence("s" + std::to_string(k), n, ms));
        words += n;
        chars += 6 * n - 1;
        total_ms += static_cast<double>(n) * ms;
    }
    const auto st = filters::dataset_stats(corpus);
    CHECK(st.sentences == 100);
    CHECK(st.words == words);
    CHECK(st.characters == chars);
    CHECK(st.duration_h == doctest::Approx(total_ms / 3.6e6));
}

TEST_CASE("yield over ASR tokens") {
    postproc::FileRecord r;
    r.asr_tokens = 10;
    std::vector<postproc::FileRecord> records{r};
    std::vector<SentenceRecord> all{sentence("a", 1, 1)};
    all[0].asr_tokens = 10;
    CHECK(filters::yield_rate(records, all) == 1.0);
    CHECK(filters::yield_rate(records, {}) == 0.0);
    CHECK(filters::yield_rate({}, {}) == 0.0);
}
