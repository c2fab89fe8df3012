// SPDX-License-Identifier: Apache-2.0
#include "longalign/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <set>

#include "longalign/cache.hpp"
#include "longalign/corpus.hpp"
#include "longalign/filters.hpp"
#include "longalign/logits.hpp"
#include "longalign/segment.hpp"
#include "longalign/unicode.hpp"
#include "longalign/wav.hpp"

namespace fs = std::filesystem;

namespace longalign::synth {

namespace {

const std::u32string kLetters = U"abcdefghijklmnopqrstuvwxyzčćđšž";
const std::u32string kOnsets = U"bcdfghjklmnprstvz";
const std::u32string kInner = U"bcdfghjklmnprstvzčćđšž";
const std::u32string kVowels = U"aeiou";

constexpr double kTargetProb = 0.9;
constexpr double kNoiseWrongProb = 0.5;
constexpr double kNoiseTrueProb = 0.4;
constexpr std::size_t kLeadFrames = 75;       // 1.5 s of silence before the first speech
constexpr std::size_t kGarbageBegin = 15;     // quiet non-speech region the energy gate must drop
constexpr std::size_t kGarbageEnd = 60;
constexpr double kSegmentPadMs = 100.0;

using Rng = std::mt19937_64;

std::size_t uniform(Rng& rng, std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

bool chance(Rng& rng, double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p; }

template <typename T>
T pick(Rng& rng, const std::basic_string<T>& s) {
    return s[uniform(rng, 0, s.size() - 1)];
}

std::vector<std::u32string> make_lexicon(Rng& rng, std::size_t size) {
    std::set<std::u32string> seen;
    std::vector<std::u32string> out;
    while (out.size() < size) {
        std::u32string w;
        w.push_back(pick(rng, kOnsets));
        w.push_back(pick(rng, kVowels));
        const std::size_t syllables = uniform(rng, 0, 2);
        for (std::size_t s = 0; s < syllables; ++s) {
            w.push_back(chance(rng, 0.15) ? pick(rng, kInner) : pick(rng, kOnsets));
            w.push_back(pick(rng, kVowels));
        }
        if (chance(rng, 0.4)) w.push_back(pick(rng, kOnsets));
        if (w.size() < 3 || filters::default_abbreviations().count(w)) continue;
        if (seen.insert(w).second) out.push_back(w);
    }
    return out;
}

struct SpokenWord {
    std::u32string text;
    std::size_t char_start = 0;
};

struct SpeechPlan {
    std::string speech_id;
    std::size_t file = 0;
    std::u32string text;
    std::vector<std::pair<std::size_t, std::size_t>> sentences;
    std::vector<std::vector<SpokenWord>> sentence_words;
    std::size_t word_count = 0;
    bool deleted = false;
};

SpeechPlan make_speech(Rng& rng, const SynthOptions& o, const std::vector<std::u32string>& lexicon,
                       std::discrete_distribution<std::size_t>& zipf) {
    SpeechPlan sp;
    const std::size_t n_sent = uniform(rng, o.min_sentences, o.max_sentences);
    for (std::size_t s = 0; s < n_sent; ++s) {
        if (s) sp.text.push_back(U' ');
        const std::size_t begin = sp.text.size();
        const std::size_t n_words = uniform(rng, o.min_words, o.max_words);
        std::vector<SpokenWord> words;
        for (std::size_t k = 0; k < n_words; ++k) {
            if (k) sp.text.push_back(U' ');
            const auto& w = lexicon[zipf(rng)];
            words.push_back({w, sp.text.size()});
            std::u32string written = w;
            if (k == 0) written[0] = written[0] - U'a' + U'A';
            sp.text += written;
            if (k + 1 < n_words && chance(rng, 0.08)) sp.text.push_back(U',');
        }
        const double r = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        sp.text.push_back(r < 0.85 ? U'.' : (r < 0.93 ? U'?' : U'!'));
        sp.sentences.emplace_back(begin, sp.text.size());
        sp.word_count += words.size();
        sp.sentence_words.push_back(std::move(words));
    }
    return sp;
}

// Frame-level emission plan of one recording.
class FrameWriter {
public:
    explicit FrameWriter(std::size_t vocab) : vocab_(vocab) {}

    void emit(std::uint32_t label, std::size_t frames) {
        for (std::size_t f = 0; f < frames; ++f) rows_.push_back({label, label, false});
    }
    void emit_noisy(std::uint32_t label, std::uint32_t wrong, std::size_t frames) {
        for (std::size_t f = 0; f < frames; ++f) rows_.push_back({label, wrong, true});
    }
    std::size_t size() const { return rows_.size(); }
    void overwrite(std::size_t frame, std::uint32_t label) { rows_[frame] = {label, label, false}; }

    std::vector<float> matrix() const {
        std::vector<float> data(rows_.size() * vocab_);
        const float rest = static_cast<float>(std::log((1.0 - kTargetProb) / static_cast<double>(vocab_ - 1)));
        const float top = static_cast<float>(std::log(kTargetProb));
        const float noise_rest = static_cast<float>(
            std::log((1.0 - kNoiseWrongProb - kNoiseTrueProb) / static_cast<double>(vocab_ - 2)));
        for (std::size_t t = 0; t < rows_.size(); ++t) {
            float* row = data.data() + t * vocab_;
            const auto& r = rows_[t];
            if (!r.noisy) {
                std::fill(row, row + vocab_, rest);
                row[r.label] = top;
            } else {
                std::fill(row, row + vocab_, noise_rest);
                row[r.label] = static_cast<float>(std::log(kNoiseTrueProb));
                row[r.wrong] = static_cast<float>(std::log(kNoiseWrongProb));
            }
        }
        return data;
    }

private:
    struct Row {
        std::uint32_t label;
        std::uint32_t wrong;
        bool noisy;
    };
    std::size_t vocab_;
    std::vector<Row> rows_;
};

}  // namespace

nlohmann::json GroundTruth::to_json() const {
    auto arr = nlohmann::json::array();
    for (const auto& s : speeches) {
        auto words = nlohmann::json::array();
        for (const auto& w : s.words) words.push_back({w.char_start, w.char_end, w.start_ms});
        arr.push_back({{"speech_id", s.speech_id},
                       {"audio_id", s.audio_id},
                       {"in_reference", s.in_reference},
                       {"sentences", s.sentences},
                       {"words", words}});
    }
    return {{"spoken_words", spoken_words}, {"deleted_words", deleted_words}, {"speeches", arr}};
}

GroundTruth GroundTruth::from_json(const nlohmann::json& j) {
    GroundTruth g;
    g.spoken_words = j.at("spoken_words");
    g.deleted_words = j.at("deleted_words");
    for (const auto& s : j.at("speeches")) {
        TruthSpeech t;
        t.speech_id = s.at("speech_id");
        t.audio_id = s.at("audio_id");
        t.in_reference = s.at("in_reference");
        t.sentences = s.at("sentences").get<std::vector<std::pair<std::size_t, std::size_t>>>();
        for (const auto& w : s.at("words")) t.words.push_back({w[0], w[1], w[2]});
        g.speeches.push_back(std::move(t));
    }
    return g;
}

GroundTruth generate(const SynthOptions& o, const fs::path& dir) {
    Rng rng(o.seed);
    const auto lexicon = make_lexicon(rng, o.lexicon_size);
    std::vector<double> weights(lexicon.size());
    for (std::size_t r = 0; r < weights.size(); ++r) weights[r] = 1.0 / static_cast<double>(r + 1);
    std::discrete_distribution<std::size_t> zipf(weights.begin(), weights.end());

    std::vector<SpeechPlan> plans;
    GroundTruth truth;
    for (std::size_t s = 0; s < o.speeches; ++s) {
        auto sp = make_speech(rng, o, lexicon, zipf);
        char id[32];
        std::snprintf(id, sizeof id, "sp%04zu", s + 1);
        sp.speech_id = id;
        sp.file = s * o.files / o.speeches;
        truth.spoken_words += sp.word_count;
        plans.push_back(std::move(sp));
    }

    // Drop whole speeches from the reference until the target share of words is gone.
    const auto target = static_cast<std::size_t>(std::llround(o.delete_fraction * static_cast<double>(truth.spoken_words)));
    std::vector<std::size_t> order(plans.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i : order) {
        if (truth.deleted_words + plans[i].word_count > target) continue;
        plans[i].deleted = true;
        truth.deleted_words += plans[i].word_count;
    }

    std::vector<std::string> audio_ids, section_ids;
    std::vector<std::size_t> section_of(o.files);
    for (std::size_t f = 0; f < o.files; ++f) {
        char id[32];
        std::snprintf(id, sizeof id, "session_%02zu", f + 1);
        audio_ids.push_back(id);
        section_of[f] = f;
    }
    std::shuffle(section_of.begin(), section_of.end(), rng);
    for (std::size_t f = 0; f < o.files; ++f) {
        char id[32];
        std::snprintf(id, sizeof id, "plenary-%c", static_cast<char>('a' + section_of[f]));
        section_ids.push_back(id);
    }

    fs::create_directories(dir / "logits");
    fs::create_directories(dir / "segments");
    if (o.write_audio) fs::create_directories(dir / "audio");

    std::vector<std::string> vocab{"<pad>", "|"};
    for (char32_t c : kLetters) vocab.push_back(unicode::encode(c));
    auto label_of = [&](char32_t c) { return static_cast<std::uint32_t>(2 + kLetters.find(c)); };
    const std::size_t V = vocab.size();

    for (std::size_t f = 0; f < o.files; ++f) {
        FrameWriter fw(V);
        std::vector<SpeechSegment> segments;
        std::vector<std::pair<std::size_t, std::size_t>> speech_frames;
        fw.emit(0, kLeadFrames);
        for (std::size_t t = kGarbageBegin; t < kGarbageEnd; ++t) fw.overwrite(t, static_cast<std::uint32_t>(uniform(rng, 2, V - 1)));
        segments.push_back({kGarbageBegin * o.frame_ms, kGarbageEnd * o.frame_ms});

        for (auto& sp : plans) {
            if (sp.file != f) continue;
            TruthSpeech ts;
            ts.speech_id = sp.speech_id;
            ts.audio_id = audio_ids[f];
            ts.in_reference = !sp.deleted;
            ts.sentences = sp.sentences;
            const std::size_t first = fw.size();
            for (const auto& words : sp.sentence_words) {
                for (const auto& w : words) {
                    ts.words.push_back({w.char_start, w.char_start + w.text.size(),
                                        static_cast<double>(fw.size()) * o.frame_ms});
                    for (std::size_t c = 0; c < w.text.size(); ++c) {
                        const auto label = label_of(w.text[c]);
                        const std::size_t frames = uniform(rng, 1, 3);
                        if (chance(rng, o.noise_rate)) {
                            std::uint32_t wrong = label;
                            while (wrong == label) wrong = static_cast<std::uint32_t>(uniform(rng, 2, V - 1));
                            fw.emit_noisy(label, wrong, frames);
                        } else {
                            fw.emit(label, frames);
                        }
                        const bool repeat = c + 1 < w.text.size() && w.text[c + 1] == w.text[c];
                        if (repeat || chance(rng, 0.3)) fw.emit(0, 1);
                    }
                    fw.emit(1, uniform(rng, 1, 2));
                }
                fw.emit(0, uniform(rng, 5, 15));
            }
            speech_frames.emplace_back(first, fw.size());
            segments.push_back({std::max(0.0, static_cast<double>(first) * o.frame_ms - kSegmentPadMs),
                                static_cast<double>(fw.size()) * o.frame_ms + kSegmentPadMs});
            fw.emit(0, uniform(rng, 25, 100));
            truth.speeches.push_back(std::move(ts));
        }
        fw.emit(0, 25);

        ctc::LogitMatrix m;
        m.vocab = vocab;
        m.data = fw.matrix();
        m.blank_id = 0;
        m.word_delim_id = 1;
        m.frame_duration_ms = o.frame_ms;
        ctc::write_lgts((dir / "logits" / (audio_ids[f] + ".lgts")).string(), m);
        cache::write_atomic(dir / "segments" / (audio_ids[f] + ".json"), segments_to_json(segments));

        if (o.write_audio) {
            audio::PcmAudio pcm;
            pcm.sample_rate = o.sample_rate;
            const double samples_per_frame = o.sample_rate * o.frame_ms / 1000.0;
            pcm.samples.assign(static_cast<std::size_t>(std::llround(samples_per_frame * static_cast<double>(fw.size()))), 0.0f);
            auto tone = [&](std::size_t f0, std::size_t f1, double amplitude) {
                const auto s0 = static_cast<std::size_t>(std::llround(samples_per_frame * static_cast<double>(f0)));
                const auto s1 = std::min(pcm.samples.size(),
                                         static_cast<std::size_t>(std::llround(samples_per_frame * static_cast<double>(f1))));
                for (std::size_t i = s0; i < s1; ++i) {
                    pcm.samples[i] = static_cast<float>(
                        amplitude * std::sin(2.0 * std::numbers::pi * 220.0 * static_cast<double>(i) / o.sample_rate));
                }
            };
            tone(kGarbageBegin, kGarbageEnd, 0.001);
            for (const auto& [a, b] : speech_frames) tone(a, b, 0.3);
            audio::write_wav((dir / "audio" / (audio_ids[f] + ".wav")).string(), pcm, audio::SampleFormat::Int16);
        }
    }

    // Reference corpus: per section, the remaining speeches in shuffled blocks.
    std::vector<corpus::Speech> out;
    std::vector<std::size_t> file_order(o.files);
    for (std::size_t f = 0; f < o.files; ++f) file_order[f] = f;
    std::sort(file_order.begin(), file_order.end(), [&](std::size_t a, std::size_t b) { return section_ids[a] < section_ids[b]; });
    for (std::size_t f : file_order) {
        std::vector<std::vector<std::size_t>> blocks;
        for (std::size_t i = 0; i < plans.size(); ++i) {
            if (plans[i].file != f || plans[i].deleted) continue;
            if (blocks.empty() || blocks.back().size() >= std::max<std::size_t>(o.block_size, 1)) blocks.emplace_back();
            blocks.back().push_back(i);
        }
        std::shuffle(blocks.begin(), blocks.end(), rng);
        for (const auto& block : blocks) {
            for (std::size_t i : block) {
                const auto& sp = plans[i];
                corpus::Speech s;
                s.speech_id = sp.speech_id;
                s.section_id = section_ids[f];
                s.date = "2021-03-" + std::to_string(10 + f);
                s.text = unicode::encode(sp.text);
                if (i % 2 == 0) {
                    for (const auto& [b, e] : sp.sentences) s.sentences.push_back({b, e});
                }
                s.speaker = {{"name", "Speaker " + std::to_string(i % 37)},
                             {"role", i % 5 == 0 ? "chair" : "regular"},
                             {"party", "P" + std::to_string(i % 6)},
                             {"gender", i % 2 ? "F" : "M"},
                             {"birth_year", 1950 + static_cast<int>(i % 40)}};
                out.push_back(std::move(s));
            }
        }
    }
    cache::write_atomic(dir / "corpus.jsonl", corpus::to_jsonl(out));
    cache::write_atomic(dir / "truth.json", truth.to_json().dump());

    nlohmann::json config{{"logits_dir", "logits"}, {"segments_dir", "segments"}, {"corpus", "corpus.jsonl"},
                          {"output_dir", "out"}};
    if (o.write_audio) config["audio_dir"] = "audio";
    cache::write_atomic(dir / "config.json", config.dump(2) + "\n");
    return truth;
}

}  // namespace longalign::synth
