// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "longalign/errors.hpp"
#include "longalign/segment.hpp"
#include "longalign/vad.hpp"
#include "longalign/wav.hpp"
#include "oracles.hpp"

using namespace longalign;

namespace {

constexpr unsigned kRate = 16000;

// One second of silence, one of full-scale sine, one at the threshold amplitude.
audio::PcmAudio gate_fixture() {
    audio::PcmAudio a;
    a.sample_rate = kRate;
    a.samples.assign(kRate, 0.0f);
    const auto loud = oracle::sine(1.0, 1000.0, kRate, kRate);
    const auto edge = oracle::sine(std::sqrt(2.0) * std::pow(10.0, -45.0 / 20.0), 1000.0, kRate, kRate);
    a.samples.insert(a.samples.end(), loud.begin(), loud.end());
    a.samples.insert(a.samples.end(), edge.begin(), edge.end());
    return a;
}

}  // namespace

TEST_CASE("RMS of analytic signals") {
    const std::vector<float> square{1.0f, -1.0f, 1.0f, -1.0f};
    CHECK(vad::rms_dbfs(std::span<const float>(square)) == doctest::Approx(0.0));
    const auto s = oracle::sine(1.0, 1000.0, kRate, kRate);
    CHECK(vad::rms_dbfs(std::span<const float>(s)) == doctest::Approx(-3.0103).epsilon(1e-5));
    const std::vector<float> zeros(100, 0.0f);
    CHECK(vad::rms_dbfs(std::span<const float>(zeros)) == -std::numeric_limits<double>::infinity());
    CHECK_THROWS_AS(vad::rms_dbfs(std::span<const float>()), EmptyWindow);
}

TEST_CASE("energy gate keeps loud and boundary segments") {
    const auto audio = gate_fixture();
    const std::vector<SpeechSegment> segs{{0, 1000}, {1000, 2000}, {2000, 3000}};
    const auto kept = vad::filter_segments(segs, audio);
    REQUIRE(kept.size() == 2);
    CHECK(kept[0] == segs[1]);
    CHECK(kept[1] == segs[2]);

    const auto edge = std::vector<float>(audio.samples.begin() + 2 * kRate, audio.samples.end());
    CHECK(oracle::rms_db(edge) == doctest::Approx(-45.0).epsilon(1e-6));

    const std::vector<SpeechSegment> past{{2500, 3500}};
    CHECK_THROWS_AS(vad::filter_segments(past, audio), SegmentOutOfRange);
}

TEST_CASE("just below the threshold is removed") {
    audio::PcmAudio a;
    a.sample_rate = kRate;
    a.samples = oracle::sine(std::sqrt(2.0) * std::pow(10.0, -45.001 / 20.0), 1000.0, kRate, kRate);
    const std::vector<SpeechSegment> segs{{0, 1000}};
    CHECK(vad::filter_segments(segs, a).empty());
}

TEST_CASE("gate output is an idempotent subsequence") {
    oracle::Rng rng(41);
    for (int iter = 0; iter < 50; ++iter) {
        audio::PcmAudio a;
        a.sample_rate = 8000;
        std::vector<SpeechSegment> segs;
        double t = 0;
        for (int k = 0; k < 8; ++k) {
            const double amp = std::pow(10.0, oracle::uniform_real(rng, -4.0, 0.0));
            const auto part = oracle::sine(amp, 500.0, a.sample_rate, 800);
            a.samples.insert(a.samples.end(), part.begin(), part.end());
            segs.push_back({t, t + 100.0});
            t += 100.0;
        }
        const auto once = vad::filter_segments(segs, a);
        CHECK(vad::filter_segments(once, a) == once);
        std::size_t j = 0;
        for (const auto& s : once) {
            while (j < segs.size() && !(segs[j] == s)) ++j;
            CHECK(j < segs.size());
        }
    }
}

TEST_CASE("gain shifts the level by its decibels") {
    oracle::Rng rng(42);
    for (int iter = 0; iter < 50; ++iter) {
        std::vector<double> x(oracle::uniform(rng, 1, 200));
        for (auto& v : x) v = oracle::uniform_real(rng, -0.5, 0.5);
        const double g = oracle::uniform_real(rng, 0.01, 1.9);
        std::vector<double> y(x);
        for (auto& v : y) v *= g;
        const double shift = vad::rms_dbfs(std::span<const double>(y)) - vad::rms_dbfs(std::span<const double>(x));
        CHECK(std::abs(shift - 20.0 * std::log10(g)) <= 1e-9);
    }
}

TEST_CASE("WAV round trip") {
    audio::PcmAudio a;
    a.sample_rate = 8000;
    a.samples = {0.0f, 0.5f, -0.5f, 1.0f, -1.0f};
    const auto f = audio::decode_wav(audio::encode_wav(a, audio::SampleFormat::Float32));
    CHECK(f.sample_rate == 8000);
    CHECK(f.samples == a.samples);
    const auto i = audio::decode_wav(audio::encode_wav(a, audio::SampleFormat::Int16));
    REQUIRE(i.samples.size() == a.samples.size());
    for (std::size_t k = 0; k < a.samples.size(); ++k) CHECK(i.samples[k] == doctest::Approx(a.samples[k]).epsilon(1e-4));
    CHECK_THROWS_AS(audio::decode_wav("RIFF"), FormatError);
}

TEST_CASE("segment lists") {
    const auto segs = parse_segments(R"([{"start_ms": 0, "end_ms": 1500.5}, {"start_ms": 2000, "end_ms": 2100}])");
    REQUIRE(segs.size() == 2);
    CHECK(segs[0].end_ms == 1500.5);
    CHECK(parse_segments(segments_to_json(segs)) == segs);
    CHECK_THROWS_AS(parse_segments(R"([{"start_ms": 5, "end_ms": 5}])"), InvalidSegment);
    CHECK_THROWS_AS(parse_segments("[{"), FormatError);
}
