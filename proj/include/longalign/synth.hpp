// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace longalign::synth {

// Parameters of the synthetic parliament: speeches are spoken into a few long
// recordings, the reference corpus lists them in shuffled blocks and misses a
// share of them.
struct SynthOptions {
    std::uint64_t seed = 2024;
    std::size_t speeches = 200;
    std::size_t files = 4;
    std::size_t min_sentences = 2;
    std::size_t max_sentences = 4;
    std::size_t min_words = 6;
    std::size_t max_words = 14;
    std::size_t lexicon_size = 1500;
    double noise_rate = 0.05;       // characters whose argmax is a wrong letter
    double delete_fraction = 0.25;  // share of spoken words missing from the reference
    std::size_t block_size = 5;     // speeches per shuffled block
    float frame_ms = 20.0f;
    unsigned sample_rate = 4000;
    bool write_audio = true;
};

struct TruthWord {
    std::size_t char_start = 0;  // in the speech text
    std::size_t char_end = 0;
    double start_ms = 0.0;
};

struct TruthSpeech {
    std::string speech_id;
    std::string audio_id;
    bool in_reference = true;
    std::vector<std::pair<std::size_t, std::size_t>> sentences;  // code point ranges
    std::vector<TruthWord> words;
};

struct GroundTruth {
    std::vector<TruthSpeech> speeches;
    std::size_t spoken_words = 0;
    std::size_t deleted_words = 0;

    double expected_yield() const {
        return spoken_words == 0 ? 0.0 : 1.0 - static_cast<double>(deleted_words) / static_cast<double>(spoken_words);
    }
    nlohmann::json to_json() const;
    static GroundTruth from_json(const nlohmann::json& j);
};

// Writes logits/, segments/, audio/ (optional), corpus.jsonl, truth.json and a
// pipeline config.json into dir.
GroundTruth generate(const SynthOptions& options, const std::filesystem::path& dir);

}  // namespace longalign::synth
