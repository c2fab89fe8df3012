// SPDX-License-Identifier: Apache-2.0
#include "longalign/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <thread>

#include "longalign/cache.hpp"
#include "longalign/corpus.hpp"
#include "longalign/errors.hpp"
#include "longalign/logits.hpp"
#include "longalign/ngram_lm.hpp"
#include "longalign/postproc.hpp"
#include "longalign/segment.hpp"
#include "longalign/textnorm.hpp"
#include "longalign/unicode.hpp"
#include "longalign/vad.hpp"
#include "longalign/wav.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace longalign::pipeline {

namespace {

constexpr const char* kCacheEnv = "LONGALIGN_CACHE_DIR";

fs::path resolve(const json& j, const char* name, const fs::path& base) {
    if (!j.contains(name) || j.at(name).is_null()) return {};
    fs::path p = j.at(name).get<std::string>();
    if (p.empty() || p.is_absolute() || base.empty()) return p;
    return base / p;
}

template <typename T>
void read_opt(const json& j, const char* name, T& out) {
    if (auto it = j.find(name); it != j.end()) out = it->get<T>();
}

json words_to_json(const std::vector<ctc::TimedWord>& words) {
    auto arr = json::array();
    for (const auto& w : words) arr.push_back({w.word, w.start_ms, w.end_ms, w.start_frame, w.end_frame});
    return arr;
}

std::vector<ctc::TimedWord> words_from_json(const json& arr) {
    std::vector<ctc::TimedWord> out;
    for (const auto& w : arr) out.push_back({w[0], w[1], w[2], w[3], w[4]});
    return out;
}

json spans_to_json(const std::vector<match::MatchSpan>& spans) {
    auto arr = json::array();
    for (const auto& s : spans) {
        arr.push_back({{"asr", {s.asr.begin, s.asr.end}},
                       {"ref", {s.ref.begin, s.ref.end}},
                       {"edit_distance", s.edit_distance},
                       {"phase", match::to_string(s.phase)},
                       {"script", match::to_string(s.script)}});
    }
    return arr;
}

std::vector<match::MatchSpan> spans_from_json(const json& arr) {
    std::vector<match::MatchSpan> out;
    for (const auto& j : arr) {
        match::MatchSpan s;
        s.asr = {j.at("asr")[0], j.at("asr")[1]};
        s.ref = {j.at("ref")[0], j.at("ref")[1]};
        s.edit_distance = j.at("edit_distance");
        s.phase = match::phase_from_string(j.at("phase").get<std::string>());
        s.script = match::ops_from_string(j.at("script").get<std::string>());
        out.push_back(std::move(s));
    }
    return out;
}

json coverage_to_json(const match::CoverageStats& c) {
    auto phases = json::array();
    for (const auto& p : c.phases) {
        phases.push_back({{"phase", match::to_string(p.phase)},
                          {"asr_matched", p.asr_matched},
                          {"ref_matched", p.ref_matched},
                          {"asr_fraction", p.asr_fraction},
                          {"ref_fraction", p.ref_fraction}});
    }
    return {{"asr_total", c.asr_total}, {"ref_total", c.ref_total}, {"phases", phases}};
}

}  // namespace

PipelineConfig PipelineConfig::from_json(const json& j, const fs::path& base_dir) {
    PipelineConfig c;
    try {
        c.logits_dir = resolve(j, "logits_dir", base_dir);
        c.segments_dir = resolve(j, "segments_dir", base_dir);
        c.audio_dir = resolve(j, "audio_dir", base_dir);
        c.corpus = resolve(j, "corpus", base_dir);
        c.norm_config = resolve(j, "norm_config", base_dir);
        c.output_dir = resolve(j, "output_dir", base_dir);
        c.cache_dir = resolve(j, "cache_dir", base_dir);
        read_opt(j, "workers", c.workers);
        if (auto it = j.find("lm"); it != j.end()) read_opt(*it, "order", c.lm_order);
        if (auto it = j.find("decoder"); it != j.end()) {
            read_opt(*it, "alpha", c.beam.alpha);
            read_opt(*it, "beta", c.beam.beta);
            read_opt(*it, "beam", c.beam.beam_width);
            read_opt(*it, "token_min_logp", c.beam.token_min_logp);
            read_opt(*it, "prune_margin", c.beam.prune_margin);
        }
        if (auto it = j.find("vad"); it != j.end()) read_opt(*it, "threshold_db", c.vad_threshold_db);
        if (auto it = j.find("pairing"); it != j.end()) {
            read_opt(*it, "n", c.pair_n);
            read_opt(*it, "floor", c.pair_floor);
        }
        if (auto it = j.find("matcher"); it != j.end()) {
            read_opt(*it, "window", c.match.window);
            read_opt(*it, "stride", c.match.stride);
            read_opt(*it, "min_overlap", c.match.min_overlap);
            read_opt(*it, "accept_threshold", c.match.accept_threshold);
            read_opt(*it, "gap_threshold", c.match.gap_threshold);
            read_opt(*it, "max_depth", c.match.max_depth);
            read_opt(*it, "max_candidates", c.match.max_candidates);
            read_opt(*it, "max_gap_tokens", c.match.max_gap_tokens);
        }
        if (auto it = j.find("align"); it != j.end()) {
            read_opt(*it, "piece_tokens", c.align.piece_tokens);
            read_opt(*it, "edge_pad_frames", c.align.edge_pad_frames);
        }
        if (auto it = j.find("filters"); it != j.end()) {
            read_opt(*it, "speech_cer", c.thresholds.speech_cer);
            read_opt(*it, "sentence_cer", c.thresholds.sentence_cer);
            read_opt(*it, "ratio", c.thresholds.ratio);
        }
        if (auto it = j.find("resegment"); it != j.end()) {
            read_opt(*it, "min_s", c.chunk_min_s);
            read_opt(*it, "max_s", c.chunk_max_s);
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad pipeline config: ") + e.what());
    }
    return c;
}

PipelineConfig PipelineConfig::load(const fs::path& path) {
    if (!fs::is_regular_file(path)) throw ConfigError("cannot open config " + path.string());
    json j;
    try {
        j = json::parse(cache::read_file(path));
    } catch (const json::exception& e) {
        throw ConfigError("cannot parse " + path.string() + ": " + e.what());
    }
    return from_json(j, path.parent_path());
}

json PipelineConfig::to_json() const {
    return {{"logits_dir", logits_dir.string()},
            {"segments_dir", segments_dir.string()},
            {"audio_dir", audio_dir.string()},
            {"corpus", corpus.string()},
            {"norm_config", norm_config.string()},
            {"output_dir", output_dir.string()},
            {"cache_dir", cache_dir.string()},
            {"workers", workers},
            {"lm", {{"order", lm_order}}},
            {"decoder",
             {{"alpha", beam.alpha},
              {"beta", beam.beta},
              {"beam", beam.beam_width},
              {"token_min_logp", beam.token_min_logp},
              {"prune_margin", beam.prune_margin}}},
            {"vad", {{"threshold_db", vad_threshold_db}}},
            {"pairing", {{"n", pair_n}, {"floor", pair_floor}}},
            {"matcher",
             {{"window", match.window},
              {"stride", match.stride},
              {"min_overlap", match.min_overlap},
              {"accept_threshold", match.accept_threshold},
              {"gap_threshold", match.gap_threshold},
              {"max_depth", match.max_depth},
              {"max_candidates", match.max_candidates},
              {"max_gap_tokens", match.max_gap_tokens}}},
            {"align", {{"piece_tokens", align.piece_tokens}, {"edge_pad_frames", align.edge_pad_frames}}},
            {"filters",
             {{"speech_cer", thresholds.speech_cer},
              {"sentence_cer", thresholds.sentence_cer},
              {"ratio", thresholds.ratio}}},
            {"resegment", {{"min_s", chunk_min_s}, {"max_s", chunk_max_s}}}};
}

void PipelineConfig::validate() const {
    auto need_dir = [](const fs::path& p, const char* what) {
        if (p.empty() || !fs::is_directory(p)) throw ConfigError(std::string(what) + " directory not found: " + p.string());
    };
    need_dir(logits_dir, "logits");
    if (!segments_dir.empty()) need_dir(segments_dir, "segments");
    if (!audio_dir.empty()) need_dir(audio_dir, "audio");
    if (corpus.empty() || !fs::is_regular_file(corpus)) throw ConfigError("corpus file not found: " + corpus.string());
    if (!norm_config.empty() && !fs::is_regular_file(norm_config)) {
        throw ConfigError("normalization config not found: " + norm_config.string());
    }
    if (output_dir.empty()) throw ConfigError("output_dir is required");
    if (workers < 1) throw ConfigError("workers must be at least 1");
    if (lm_order < 1 || lm_order > lm::kMaxOrder) throw ConfigError("lm order out of range");
    if (pair_n < 1) throw ConfigError("pairing n must be positive");
    if (match.window < 1 || match.stride < 1) throw ConfigError("window and stride must be at least 1");
    if (beam.beam_width < 1) throw ConfigError("beam width must be at least 1");
    if (!(chunk_min_s > 0) || chunk_max_s < chunk_min_s) throw ConfigError("bad resegment bounds");
}

std::string_view to_string(Stage s) {
    switch (s) {
        case Stage::Decode: return "decode";
        case Stage::Pair: return "pair";
        case Stage::Match: return "match";
        case Stage::Align: return "align";
        case Stage::Assemble: return "assemble";
        case Stage::Filter: return "filter";
        case Stage::Stats: return "stats";
    }
    return "decode";
}

Stage stage_from_string(std::string_view s) {
    for (Stage st : all_stages()) {
        if (to_string(st) == s) return st;
    }
    throw ConfigError("unknown stage '" + std::string(s) + "'");
}

const std::vector<Stage>& all_stages() {
    static const std::vector<Stage> stages{Stage::Decode, Stage::Pair,   Stage::Match, Stage::Align,
                                           Stage::Assemble, Stage::Filter, Stage::Stats};
    return stages;
}

void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t threads = std::min(std::max<std::size_t>(workers, 1), std::max<std::size_t>(n, 1));
    if (threads <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

struct Pipeline::State {
    struct Input {
        std::string id;
        fs::path lgts, segments, wav;
        std::string lgts_hash, segments_hash, wav_hash;
    };

    PipelineConfig cfg;
    std::unique_ptr<cache::Store> store;
    std::vector<Input> files;
    std::vector<corpus::Speech> speeches;
    std::vector<textnorm::NormalizedText> normalized;
    std::vector<std::vector<std::string>> speech_words;

    std::string lm_key, pair_key, filter_key, stats_key;
    std::vector<std::string> decode_keys, match_keys, align_keys, assemble_keys;

    std::optional<json> pairs, filtered;
    std::vector<std::optional<json>> decoded, matched, aligned, assembled;

    std::once_flag lm_once;
    std::unique_ptr<lm::ArpaModel> lm;

    std::map<Stage, StageReport> reports;
    std::optional<Stage> target;  // empty: full pipeline

    bool computes(Stage s) const { return !target || *target == s; }
    bool forced(Stage s) const { return cfg.force && computes(s); }

    StageReport& report(Stage s) {
        auto& r = reports[s];
        r.stage = s;
        return r;
    }

    json obtain(Stage s, const std::string& name, const std::string& key, const std::function<json()>& compute,
                std::atomic<std::size_t>& computed, std::atomic<std::size_t>& reused) {
        json payload;
        if (!forced(s)) {
            const auto r = store->load(name, key, payload);
            if (r == cache::Lookup::Hit) {
                ++reused;
                return payload;
            }
            if (!computes(s)) {
                if (r == cache::Lookup::Corrupt) throw CorruptCache("cached " + name + " is damaged; rerun " + std::string(to_string(s)));
                throw MissingUpstream(std::string(to_string(s)) + " output " + name +
                                      (r == cache::Lookup::Miss ? " is missing" : " is out of date") + "; run " +
                                      std::string(to_string(s)) + " first");
            }
        }
        payload = compute();
        store->save(name, key, payload);
        ++computed;
        return payload;
    }

    // Runs obtain for every file and keeps the payloads.
    void per_file(Stage s, const char* dir, const std::vector<std::string>& keys, std::vector<std::optional<json>>& slot,
                  const std::function<json(std::size_t)>& compute) {
        if (std::all_of(slot.begin(), slot.end(), [](const auto& p) { return p.has_value(); })) return;
        std::atomic<std::size_t> computed{0}, reused{0};
        parallel_for(files.size(), cfg.workers, [&](std::size_t i) {
            slot[i] = obtain(s, std::string(dir) + "/" + files[i].id + ".json", keys[i], [&] { return compute(i); },
                             computed, reused);
        });
        auto& r = report(s);
        r.computed += computed;
        r.reused += reused;
    }

    void single(Stage s, const std::string& name, const std::string& key, std::optional<json>& slot,
                const std::function<json()>& compute) {
        if (slot) return;
        std::atomic<std::size_t> computed{0}, reused{0};
        slot = obtain(s, name, key, compute, computed, reused);
        auto& r = report(s);
        r.computed += computed;
        r.reused += reused;
    }

    void load_inputs();
    void derive_keys();
    const lm::ArpaModel& language_model();

    std::vector<std::size_t> paired_speeches(std::size_t file);
    postproc::ReferenceText reference(const std::vector<std::size_t>& speech_ids) const;

    void decode();
    void pair();
    void match();
    void align();
    void assemble();
    void filter();
    void stats();
    void write_records();
};

void Pipeline::State::load_inputs() {
    std::vector<fs::path> lgts;
    for (const auto& e : fs::directory_iterator(cfg.logits_dir)) {
        if (e.is_regular_file() && e.path().extension() == ".lgts") lgts.push_back(e.path());
    }
    std::sort(lgts.begin(), lgts.end());
    for (const auto& p : lgts) {
        Input in;
        in.id = p.stem().string();
        in.lgts = p;
        if (!cfg.segments_dir.empty() && fs::exists(cfg.segments_dir / (in.id + ".json"))) {
            in.segments = cfg.segments_dir / (in.id + ".json");
        }
        if (!cfg.audio_dir.empty() && fs::exists(cfg.audio_dir / (in.id + ".wav"))) {
            in.wav = cfg.audio_dir / (in.id + ".wav");
        }
        files.push_back(std::move(in));
    }
    parallel_for(files.size(), cfg.workers, [&](std::size_t i) {
        auto& in = files[i];
        in.lgts_hash = cache::sha256_hex(cache::read_file(in.lgts));
        if (!in.segments.empty()) in.segments_hash = cache::sha256_hex(cache::read_file(in.segments));
        if (!in.wav.empty()) in.wav_hash = cache::sha256_hex(cache::read_file(in.wav));
    });

    speeches = corpus::read_jsonl(cfg.corpus.string());
    const auto norm = cfg.norm_config.empty() ? textnorm::NormConfig::default_config()
                                              : textnorm::NormConfig::load(cfg.norm_config.string());
    normalized.resize(speeches.size());
    speech_words.resize(speeches.size());
    parallel_for(speeches.size(), cfg.workers, [&](std::size_t i) {
        try {
            normalized[i] = textnorm::normalize(speeches[i].text, norm);
        } catch (const UnmappableCharacter& e) {
            throw UnmappableCharacter("speech " + speeches[i].speech_id + ": " + e.what());
        }
        for (const auto& [w, range] : normalized[i].words()) speech_words[i].push_back(unicode::encode(w));
    });

    cache::KeyBuilder k;
    k.add("corpus").add(cache::read_file(cfg.corpus)).add(norm.to_json());
    const auto corpus_key = k.hex();
    lm_key = k.add("lm").add(corpus_key).add(std::to_string(cfg.lm_order)).hex();
}

void Pipeline::State::derive_keys() {
    const auto n = files.size();
    decode_keys.resize(n);
    match_keys.resize(n);
    align_keys.resize(n);
    assemble_keys.resize(n);
    const auto all = cfg.to_json();
    cache::KeyBuilder k;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& f = files[i];
        decode_keys[i] = k.add("decode").add(f.lgts_hash).add(f.segments_hash).add(f.wav_hash).add(lm_key)
                             .add_json(all.at("decoder")).add_json(all.at("vad")).hex();
    }
    k.add("pair").add(lm_key).add_json(all.at("pairing"));
    for (const auto& d : decode_keys) k.add(d);
    pair_key = k.hex();
    for (std::size_t i = 0; i < n; ++i) {
        match_keys[i] = k.add("match").add(decode_keys[i]).add(pair_key).add_json(all.at("matcher")).hex();
        align_keys[i] = k.add("align").add(match_keys[i]).add(files[i].lgts_hash).add_json(all.at("align")).hex();
        assemble_keys[i] = k.add("assemble").add(align_keys[i]).hex();
    }
    k.add("filter").add_json(all.at("filters")).add_json(all.at("resegment"));
    for (const auto& a : assemble_keys) k.add(a);
    filter_key = k.hex();
    k.add("stats").add(filter_key);
    for (const auto& m : match_keys) k.add(m);
    stats_key = k.hex();

    decoded.assign(n, std::nullopt);
    matched.assign(n, std::nullopt);
    aligned.assign(n, std::nullopt);
    assembled.assign(n, std::nullopt);
}

const lm::ArpaModel& Pipeline::State::language_model() {
    std::call_once(lm_once, [&] {
        std::atomic<std::size_t> computed{0}, reused{0};
        const auto payload = obtain(
            Stage::Decode, "lm.json", lm_key,
            [&] {
                std::vector<std::string> sentences;
                for (const auto& nt : normalized) {
                    if (!nt.norm.empty()) sentences.push_back(nt.utf8());
                }
                lm::TrainOptions opts;
                opts.order = cfg.lm_order;
                return json{{"arpa", lm::write_arpa(lm::train(sentences, opts))}};
            },
            computed, reused);
        lm = std::make_unique<lm::ArpaModel>(lm::read_arpa(payload.at("arpa").get<std::string>()));
    });
    return *lm;
}

void Pipeline::State::decode() {
    per_file(Stage::Decode, "decode", decode_keys, decoded, [&](std::size_t i) {
        const auto& f = files[i];
        const auto logits = ctc::read_lgts(f.lgts.string());
        logits.validate();
        std::vector<SpeechSegment> segments;
        bool gated = false;
        if (!f.segments.empty()) {
            segments = parse_segments(cache::read_file(f.segments));
            gated = true;
            if (!f.wav.empty()) {
                segments = vad::filter_segments(segments, audio::read_wav(f.wav.string()), cfg.vad_threshold_db);
            }
        }
        ctc::DecodedHypothesis hyp;
        if (!gated || !segments.empty()) hyp = ctc::beam_decode(logits, &language_model(), cfg.beam, segments);
        return json{{"frames", logits.num_frames()},
                    {"end_ms", logits.end_ms()},
                    {"segments", json::parse(segments_to_json(segments))},
                    {"words", words_to_json(hyp.words)}};
    });
}

void Pipeline::State::pair() {
    decode();
    single(Stage::Pair, "pair.json", pair_key, pairs, [&] {
        std::map<std::string, std::vector<std::string>> asr, sections;
        for (std::size_t i = 0; i < files.size(); ++i) {
            auto& tokens = asr[files[i].id];
            for (const auto& w : decoded[i]->at("words")) tokens.push_back(w[0].get<std::string>());
        }
        for (std::size_t s = 0; s < speeches.size(); ++s) {
            auto& tokens = sections[speeches[s].section_id];
            tokens.insert(tokens.end(), speech_words[s].begin(), speech_words[s].end());
        }
        auto out = json::array();
        for (const auto& p : match::pair_recordings(asr, sections, cfg.pair_n, cfg.pair_floor)) {
            out.push_back({{"file", p.file}, {"section", p.section}, {"score", p.score}});
        }
        return out;
    });
}

std::vector<std::size_t> Pipeline::State::paired_speeches(std::size_t file) {
    std::set<std::string> sections;
    for (const auto& p : *pairs) {
        if (p.at("file").get<std::string>() == files[file].id) sections.insert(p.at("section").get<std::string>());
    }
    std::vector<std::size_t> out;
    for (std::size_t s = 0; s < speeches.size(); ++s) {
        if (sections.count(speeches[s].section_id)) out.push_back(s);
    }
    return out;
}

postproc::ReferenceText Pipeline::State::reference(const std::vector<std::size_t>& speech_ids) const {
    std::vector<textnorm::NormalizedText> nts;
    for (std::size_t s : speech_ids) nts.push_back(normalized[s]);
    return postproc::ReferenceText::build(nts);
}

void Pipeline::State::match() {
    decode();
    pair();
    per_file(Stage::Match, "match", match_keys, matched, [&](std::size_t i) {
        const auto ids = paired_speeches(i);
        const auto ref = reference(ids);
        match::Vocabulary vocab;
        std::vector<match::Token> asr_tokens;
        for (const auto& w : decoded[i]->at("words")) asr_tokens.push_back(vocab.intern(w[0].get<std::string>()));
        const auto ref_tokens = vocab.intern_all(ref.tokens);
        const auto result = match::match_sequences(asr_tokens, ref_tokens, cfg.match, &vocab);
        auto speech_ids = json::array();
        for (std::size_t s : ids) speech_ids.push_back(speeches[s].speech_id);
        return json{{"speech_ids", speech_ids},
                    {"spans", spans_to_json(result.spans)},
                    {"coverage", coverage_to_json(result.coverage)}};
    });
}

namespace {

std::vector<std::size_t> speech_indices(const json& match_payload, const std::map<std::string, std::size_t>& index) {
    std::vector<std::size_t> out;
    for (const auto& id : match_payload.at("speech_ids")) {
        auto it = index.find(id.get<std::string>());
        if (it == index.end()) throw InconsistentInputs("match refers to unknown speech " + id.get<std::string>());
        out.push_back(it->second);
    }
    return out;
}

}  // namespace

void Pipeline::State::align() {
    decode();
    match();
    std::map<std::string, std::size_t> index;
    for (std::size_t s = 0; s < speeches.size(); ++s) index[speeches[s].speech_id] = s;
    per_file(Stage::Align, "align", align_keys, aligned, [&](std::size_t i) {
        const auto ref = reference(speech_indices(*matched[i], index));
        const auto logits = ctc::read_lgts(files[i].lgts.string());
        const auto words = words_from_json(decoded[i]->at("words"));
        const auto spans = spans_from_json(matched[i]->at("spans"));
        auto arr = json::array();
        for (const auto& t : align::align_spans(logits, words, ref.tokens, spans, cfg.align)) {
            arr.push_back({t.ref_token, t.start_ms, t.end_ms});
        }
        return arr;
    });
}

void Pipeline::State::assemble() {
    decode();
    match();
    align();
    std::map<std::string, std::size_t> index;
    for (std::size_t s = 0; s < speeches.size(); ++s) index[speeches[s].speech_id] = s;
    per_file(Stage::Assemble, "assemble", assemble_keys, assembled, [&](std::size_t i) {
        const auto ids = speech_indices(*matched[i], index);
        std::vector<corpus::Speech> sp;
        std::vector<textnorm::NormalizedText> nts;
        for (std::size_t s : ids) {
            sp.push_back(speeches[s]);
            nts.push_back(normalized[s]);
        }
        const auto words = words_from_json(decoded[i]->at("words"));
        const auto spans = spans_from_json(matched[i]->at("spans"));
        std::vector<align::TokenTiming> timings;
        for (const auto& t : *aligned[i]) timings.push_back({t[0], t[1], t[2]});
        postproc::AssembleInput in;
        in.audio_id = files[i].id;
        in.asr_words = words;
        in.audio_end_ms = decoded[i]->at("end_ms");
        in.speeches = sp;
        in.normalized = nts;
        in.spans = spans;
        in.timings = timings;
        return postproc::to_json(postproc::assemble(in));
    });
}

void Pipeline::State::write_records() {
    std::vector<postproc::FileRecord> records;
    for (const auto& a : assembled) records.push_back(postproc::file_record_from_json(*a));
    postproc::dedupe_unaligned(records);
    for (const auto& r : records) {
        cache::write_atomic(cfg.output_dir / "records" / (r.audio_id + ".json"), postproc::to_json(r).dump(2) + "\n");
    }
}

void Pipeline::State::filter() {
    assemble();
    single(Stage::Filter, "filter.json", filter_key, filtered, [&] {
        std::vector<postproc::FileRecord> records;
        for (const auto& a : assembled) records.push_back(postproc::file_record_from_json(*a));
        postproc::dedupe_unaligned(records);
        const auto kept = filters::run_filters(records, cfg.thresholds);
        std::string chunks;
        for (const auto& s : kept) {
            for (const auto& c : filters::resegment(s, cfg.chunk_min_s, cfg.chunk_max_s)) {
                chunks += filters::to_json(c).dump();
                chunks.push_back('\n');
            }
        }
        return json{{"dataset", filters::to_jsonl(kept)},
                    {"chunks", chunks},
                    {"stats", filters::to_json(filters::dataset_stats(kept))},
                    {"yield_rate", filters::yield_rate(records, kept)}};
    });
    cache::write_atomic(cfg.output_dir / "dataset.jsonl", filtered->at("dataset").get<std::string>());
    cache::write_atomic(cfg.output_dir / "chunks.jsonl", filtered->at("chunks").get<std::string>());
}

void Pipeline::State::stats() {
    filter();
    match();
    std::optional<json> out;
    single(Stage::Stats, "stats.json", stats_key, out, [&] {
        std::map<std::string, json> phases;
        std::vector<std::string> order;
        std::size_t asr_total = 0, ref_total = 0;
        for (const auto& m : matched) {
            const auto& c = m->at("coverage");
            asr_total += c.at("asr_total").get<std::size_t>();
            ref_total += c.at("ref_total").get<std::size_t>();
            for (const auto& p : c.at("phases")) {
                const auto name = p.at("phase").get<std::string>();
                if (!phases.count(name)) {
                    order.push_back(name);
                    phases[name] = {{"asr_matched", 0}, {"ref_matched", 0}};
                }
                phases[name]["asr_matched"] = phases[name]["asr_matched"].get<std::size_t>() + p.at("asr_matched").get<std::size_t>();
                phases[name]["ref_matched"] = phases[name]["ref_matched"].get<std::size_t>() + p.at("ref_matched").get<std::size_t>();
            }
        }
        auto coverage = json::array();
        for (const auto& name : order) {
            const auto a = phases[name]["asr_matched"].get<std::size_t>();
            const auto r = phases[name]["ref_matched"].get<std::size_t>();
            coverage.push_back({{"phase", name},
                                {"asr_matched", a},
                                {"ref_matched", r},
                                {"asr_fraction", asr_total ? static_cast<double>(a) / static_cast<double>(asr_total) : 0.0},
                                {"ref_fraction", ref_total ? static_cast<double>(r) / static_cast<double>(ref_total) : 0.0}});
        }
        return json{{"files", files.size()},
                    {"dataset", filtered->at("stats")},
                    {"yield_rate", filtered->at("yield_rate")},
                    {"coverage", {{"asr_total", asr_total}, {"ref_total", ref_total}, {"phases", coverage}}}};
    });
    cache::write_atomic(cfg.output_dir / "stats.json", out->dump(2) + "\n");
}

Pipeline::Pipeline(PipelineConfig config) : state_(std::make_unique<State>()) {
    auto& st = *state_;
    if (const char* env = std::getenv(kCacheEnv); env && *env) config.cache_dir = env;
    if (config.cache_dir.empty()) config.cache_dir = config.output_dir / "cache";
    config.validate();
    st.cfg = std::move(config);
    fs::create_directories(st.cfg.output_dir);
    st.store = std::make_unique<cache::Store>(st.cfg.cache_dir);
    st.load_inputs();
    st.derive_keys();
}

Pipeline::~Pipeline() = default;

const PipelineConfig& Pipeline::config() const { return state_->cfg; }

StageReport Pipeline::run(Stage stage) {
    auto& st = *state_;
    st.target = stage;
    st.reports.clear();
    switch (stage) {
        case Stage::Decode: st.decode(); break;
        case Stage::Pair: st.pair(); break;
        case Stage::Match: st.match(); break;
        case Stage::Align: st.align(); break;
        case Stage::Assemble:
            st.assemble();
            st.write_records();
            break;
        case Stage::Filter: st.filter(); break;
        case Stage::Stats: st.stats(); break;
    }
    return st.report(stage);
}

std::vector<StageReport> Pipeline::run_all() {
    auto& st = *state_;
    st.target.reset();
    st.reports.clear();
    st.decode();
    st.pair();
    st.match();
    st.align();
    st.assemble();
    st.write_records();
    st.filter();
    st.stats();
    std::vector<StageReport> out;
    for (Stage s : all_stages()) out.push_back(st.report(s));
    return out;
}

}  // namespace longalign::pipeline
