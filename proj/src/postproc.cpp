// SPDX-License-Identifier: Apache-2.0
#include "longalign/postproc.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <set>

#include "longalign/edit_distance.hpp"
#include "longalign/errors.hpp"
#include "longalign/filters.hpp"
#include "longalign/unicode.hpp"

namespace longalign::postproc {

namespace {

double rate(std::size_t distance, std::size_t ref_len, std::size_t hyp_len) {
    if (ref_len == 0) return static_cast<double>(hyp_len);
    return static_cast<double>(distance) / static_cast<double>(ref_len);
}

std::string join(const std::vector<std::string>& words) {
    std::string out;
    for (const auto& w : words) {
        if (!out.empty()) out.push_back(' ');
        out += w;
    }
    return out;
}

// Reference token behind every ASR word, following the match scripts. ASR words
// deleted inside a span go with the preceding reference word.
std::vector<std::optional<std::size_t>> attribute_asr(std::span<const match::MatchSpan> spans, std::size_t n_asr,
                                                      std::size_t n_ref) {
    using match::EditOp;
    std::vector<std::optional<std::size_t>> out(n_asr);
    for (const auto& s : spans) {
        std::size_t asr_len = 0, ref_len = 0;
        for (EditOp op : s.script) {
            if (op != EditOp::Insert) ++asr_len;
            if (op != EditOp::Delete) ++ref_len;
        }
        if (s.asr.empty() || s.ref.empty() || s.asr.end > n_asr || s.ref.end > n_ref || asr_len != s.asr.size() ||
            ref_len != s.ref.size()) {
            throw InconsistentInputs("match span does not fit the ASR and reference sequences");
        }
        std::size_t i = s.asr.begin, j = s.ref.begin;
        std::vector<std::size_t> pending;
        for (EditOp op : s.script) {
            switch (op) {
                case EditOp::Match:
                case EditOp::Substitute:
                    for (std::size_t p : pending) out[p] = j;
                    pending.clear();
                    if (out[i]) throw InconsistentInputs("ASR word claimed by two match spans");
                    out[i++] = j++;
                    break;
                case EditOp::Delete:
                    if (out[i]) throw InconsistentInputs("ASR word claimed by two match spans");
                    if (j > s.ref.begin) out[i] = j - 1;
                    else pending.push_back(i);
                    ++i;
                    break;
                case EditOp::Insert:
                    ++j;
                    break;
            }
        }
        for (std::size_t p : pending) out[p] = s.ref.end - 1;
    }
    return out;
}

// Speech holding every matched ASR word, with the ranges of different speeches
// made disjoint in audio. A speech keeps its longest stretch of words not
// interrupted by words matched to another speech; its words outside that
// stretch stop supporting their reference words. Speeches are settled largest
// first, so a stretch never reaches into one settled before it. Unmatched words
// inside a stretch stay unmatched.
std::vector<std::optional<std::size_t>> settle_speeches(std::vector<std::optional<std::size_t>>& owner,
                                                        const ReferenceText& ref, std::size_t n_speeches) {
    const std::size_t n = owner.size();
    auto speech_of = [&](std::size_t i) -> std::optional<std::size_t> {
        if (!owner[i]) return std::nullopt;
        return ref.origin[*owner[i]].speech;
    };
    std::vector<std::vector<std::size_t>> words(n_speeches);
    for (std::size_t i = 0; i < n; ++i) {
        if (const auto s = speech_of(i)) words[*s].push_back(i);
    }
    std::vector<std::size_t> order;
    for (std::size_t s = 0; s < n_speeches; ++s) {
        if (!words[s].empty()) order.push_back(s);
    }
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return words[a].size() > words[b].size(); });

    std::vector<std::optional<std::size_t>> holder(n);
    for (std::size_t s : order) {
        std::pair<std::size_t, std::size_t> best{0, 0}, run{0, 0};  // indices into words[s]
        for (std::size_t k = 0; k < words[s].size(); ++k) {
            bool extends = k > 0;
            for (std::size_t q = k > 0 ? words[s][k - 1] + 1 : 0; extends && q < words[s][k]; ++q) {
                const auto other = speech_of(q);
                extends = !holder[q] && !(other && *other != s);
            }
            if (!extends) run = {k, k};
            ++run.second;
            if (run.second - run.first > best.second - best.first) best = run;
        }
        for (std::size_t k = 0; k < words[s].size(); ++k) {
            if (k < best.first || k >= best.second) owner[words[s][k]].reset();
            else holder[words[s][k]] = s;
        }
    }
    return holder;
}

}  // namespace

double cer(std::string_view ref, std::string_view hyp) {
    const auto r = unicode::decode(ref);
    const auto h = unicode::decode(hyp);
    return rate(match::levenshtein_distance<char32_t>(r, h), r.size(), h.size());
}

double wer(std::span<const std::string> ref, std::span<const std::string> hyp) {
    return rate(match::levenshtein_distance<std::string>(ref, hyp), ref.size(), hyp.size());
}

ReferenceText ReferenceText::build(std::span<const textnorm::NormalizedText> normalized) {
    ReferenceText out;
    for (std::size_t s = 0; s < normalized.size(); ++s) {
        out.speech_begin.push_back(out.tokens.size());
        const auto words = normalized[s].words();
        for (std::size_t k = 0; k < words.size(); ++k) {
            out.tokens.push_back(unicode::encode(words[k].first));
            out.origin.push_back({s, k});
        }
    }
    return out;
}

FileRecord assemble(const AssembleInput& in) {
    if (in.speeches.size() != in.normalized.size()) {
        throw InconsistentInputs("speeches and normalized texts differ in number");
    }
    const auto ref = ReferenceText::build(in.normalized);
    const std::size_t n_asr = in.asr_words.size();
    auto owner = attribute_asr(in.spans, n_asr, ref.tokens.size());
    const auto supported = owner;
    const auto holder = settle_speeches(owner, ref, in.speeches.size());

    std::vector<std::optional<align::TokenTiming>> timing(ref.tokens.size());
    for (const auto& t : in.timings) {
        if (t.ref_token >= ref.tokens.size()) throw InconsistentInputs("word timing for a missing reference word");
        if (!(t.end_ms > t.start_ms) || t.start_ms < 0 || t.end_ms > in.audio_end_ms + 1e-6) {
            throw InconsistentInputs("word timing outside the decoded audio");
        }
        if (!timing[t.ref_token]) timing[t.ref_token] = t;
    }
    // Reference words that lost their ASR support in settling lose their timing too.
    for (std::size_t i = 0; i < n_asr; ++i) {
        if (supported[i] && !owner[i]) timing[*supported[i]].reset();
    }

    FileRecord rec;
    rec.audio_id = in.audio_id;
    rec.asr_tokens = n_asr;

    // ASR words per speech, in audio order.
    std::vector<std::vector<std::size_t>> speech_asr(in.speeches.size());
    for (std::size_t i = 0; i < n_asr; ++i) {
        if (holder[i]) speech_asr[*holder[i]].push_back(i);
    }

    struct Placed {
        std::size_t key;  // first ASR word
        Entry entry;
    };
    std::vector<Placed> placed;
    std::vector<std::optional<std::size_t>> aligned_key(in.speeches.size());

    for (std::size_t s = 0; s < in.speeches.size(); ++s) {
        if (speech_asr[s].empty()) continue;
        const auto& speech = in.speeches[s];
        const auto& nt = in.normalized[s];
        const auto original = unicode::decode(speech.text);
        const auto norm_words = nt.words();
        const std::size_t base = ref.speech_begin[s];

        AlignedSpeech a;
        a.speech_id = speech.speech_id;
        a.text = speech.text;
        a.speaker = speech.speaker;
        std::vector<std::string> asr_tokens;
        for (std::size_t i : speech_asr[s]) asr_tokens.push_back(in.asr_words[i].word);
        a.asr_text = join(asr_tokens);
        a.asr_tokens = asr_tokens.size();
        std::vector<std::string> ref_tokens(ref.tokens.begin() + static_cast<std::ptrdiff_t>(base),
                                            ref.tokens.begin() + static_cast<std::ptrdiff_t>(base + norm_words.size()));
        a.cer = cer(nt.utf8(), a.asr_text);
        a.wer = wer(ref_tokens, asr_tokens);

        // Normalized words sharing one original range (numeral expansions) become one word.
        std::vector<textnorm::CharRange> orig_range(norm_words.size());
        for (std::size_t k = 0; k < norm_words.size(); ++k) {
            orig_range[k] = textnorm::project_span(nt, norm_words[k].second.begin, norm_words[k].second.end);
        }
        for (std::size_t k = 0; k < norm_words.size();) {
            std::size_t e = k + 1;
            while (e < norm_words.size() && orig_range[e] == orig_range[k]) ++e;
            std::optional<WordAlignment> w;
            for (std::size_t q = k; q < e; ++q) {
                const auto& t = timing[base + q];
                if (!t) continue;
                if (!w) {
                    w = WordAlignment{unicode::encode(std::u32string_view(original).substr(
                                          orig_range[k].begin, orig_range[k].end - orig_range[k].begin)),
                                      orig_range[k].begin, orig_range[k].end, t->start_ms, t->end_ms};
                } else {
                    w->start_ms = std::min(w->start_ms, t->start_ms);
                    w->end_ms = std::max(w->end_ms, t->end_ms);
                }
            }
            if (w && (a.words.empty() || (w->char_start >= a.words.back().char_end &&
                                          w->start_ms >= a.words.back().end_ms))) {
                a.words.push_back(std::move(*w));
            }
            k = e;
        }

        for (const auto& range : filters::split_sentences(speech.text, speech.sentences)) {
            SentenceAlignment sa;
            sa.range = range;
            std::vector<std::string> norm_sentence;
            std::set<std::size_t> tokens;
            bool all_timed = true;
            for (std::size_t k = 0; k < norm_words.size(); ++k) {
                if (orig_range[k].begin < range.begin || orig_range[k].begin >= range.end) continue;
                norm_sentence.push_back(ref.tokens[base + k]);
                tokens.insert(base + k);
                all_timed = all_timed && timing[base + k].has_value();
            }
            std::vector<std::string> slice;
            for (std::size_t i : speech_asr[s]) {
                if (owner[i] && tokens.count(*owner[i])) slice.push_back(in.asr_words[i].word);
            }
            sa.asr = join(slice);
            sa.asr_tokens = slice.size();
            sa.cer = cer(join(norm_sentence), sa.asr);
            sa.covered = !norm_sentence.empty() && all_timed;
            a.sentences.push_back(std::move(sa));
        }
        aligned_key[s] = speech_asr[s].front();
        placed.push_back({speech_asr[s].front(), std::move(a)});
    }

    for (std::size_t i = 0; i < n_asr;) {
        if (holder[i]) {
            ++i;
            continue;
        }
        UnmatchedAsr u;
        u.asr_begin = i;
        std::vector<std::string> words;
        while (i < n_asr && !holder[i]) words.push_back(in.asr_words[i++].word);
        u.asr_end = i;
        u.text = join(words);
        u.start_ms = in.asr_words[u.asr_begin].start_ms;
        u.end_ms = in.asr_words[u.asr_end - 1].end_ms;
        placed.push_back({u.asr_begin, std::move(u)});
    }
    std::stable_sort(placed.begin(), placed.end(), [](const Placed& a, const Placed& b) { return a.key < b.key; });

    // Unaligned speeches follow the closest aligned speech before them in the corpus.
    std::map<std::size_t, std::vector<std::size_t>> after;  // aligned speech index -> unaligned
    std::vector<std::size_t> leading;
    std::optional<std::size_t> last_aligned;
    for (std::size_t s = 0; s < in.speeches.size(); ++s) {
        if (aligned_key[s]) {
            last_aligned = s;
        } else if (last_aligned) {
            after[*last_aligned].push_back(s);
        } else {
            leading.push_back(s);
        }
    }
    auto unaligned = [&](std::size_t s) {
        return UnalignedSpeech{in.speeches[s].speech_id, in.speeches[s].text};
    };
    for (std::size_t s : leading) rec.entries.emplace_back(unaligned(s));
    std::map<std::string, std::size_t> index_of;
    for (std::size_t s = 0; s < in.speeches.size(); ++s) index_of[in.speeches[s].speech_id] = s;
    for (auto& p : placed) {
        std::optional<std::size_t> s;
        if (const auto* a = std::get_if<AlignedSpeech>(&p.entry)) s = index_of.at(a->speech_id);
        rec.entries.push_back(std::move(p.entry));
        if (s) {
            if (auto it = after.find(*s); it != after.end()) {
                for (std::size_t u : it->second) rec.entries.emplace_back(unaligned(u));
            }
        }
    }
    return rec;
}

void dedupe_unaligned(std::vector<FileRecord>& records) {
    std::set<std::string> seen;
    for (const auto& r : records) {
        for (const auto& e : r.entries) {
            if (const auto* a = std::get_if<AlignedSpeech>(&e)) seen.insert(a->speech_id);
        }
    }
    for (auto& r : records) {
        std::erase_if(r.entries, [&](const Entry& e) {
            const auto* u = std::get_if<UnalignedSpeech>(&e);
            return u && !seen.insert(u->speech_id).second;
        });
    }
}

nlohmann::json to_json(const FileRecord& record) {
    auto entries = nlohmann::json::array();
    for (const auto& e : record.entries) {
        if (const auto* u = std::get_if<UnmatchedAsr>(&e)) {
            entries.push_back({{"type", "unmatched_asr"},
                               {"text", u->text},
                               {"start_ms", u->start_ms},
                               {"end_ms", u->end_ms},
                               {"asr_begin", u->asr_begin},
                               {"asr_end", u->asr_end}});
        } else if (const auto* n = std::get_if<UnalignedSpeech>(&e)) {
            entries.push_back({{"type", "unaligned_speech"}, {"speech_id", n->speech_id}, {"text", n->text}});
        } else {
            const auto& a = std::get<AlignedSpeech>(e);
            auto words = nlohmann::json::array();
            for (const auto& w : a.words) {
                words.push_back({{"w", w.word}, {"cs", w.char_start}, {"ce", w.char_end}, {"ms_s", w.start_ms},
                                 {"ms_e", w.end_ms}});
            }
            auto sentences = nlohmann::json::array();
            for (const auto& s : a.sentences) {
                sentences.push_back({{"cs", s.range.begin}, {"ce", s.range.end}, {"asr", s.asr},
                                     {"asr_tokens", s.asr_tokens}, {"cer", s.cer}, {"covered", s.covered}});
            }
            entries.push_back({{"type", "aligned_speech"},
                               {"speech_id", a.speech_id},
                               {"text", a.text},
                               {"asr_text", a.asr_text},
                               {"asr_tokens", a.asr_tokens},
                               {"cer", a.cer},
                               {"wer", a.wer},
                               {"speaker", a.speaker},
                               {"words", words},
                               {"sentences", sentences}});
        }
    }
    return {{"audio_id", record.audio_id}, {"asr_tokens", record.asr_tokens}, {"entries", entries}};
}

FileRecord file_record_from_json(const nlohmann::json& j) {
    FileRecord r;
    try {
        r.audio_id = j.at("audio_id").get<std::string>();
        r.asr_tokens = j.at("asr_tokens").get<std::size_t>();
        for (const auto& e : j.at("entries")) {
            const auto type = e.at("type").get<std::string>();
            if (type == "unmatched_asr") {
                r.entries.emplace_back(UnmatchedAsr{e.at("text"), e.at("start_ms"), e.at("end_ms"), e.at("asr_begin"),
                                                    e.at("asr_end")});
            } else if (type == "unaligned_speech") {
                r.entries.emplace_back(UnalignedSpeech{e.at("speech_id"), e.at("text")});
            } else if (type == "aligned_speech") {
                AlignedSpeech a;
                a.speech_id = e.at("speech_id");
                a.text = e.at("text");
                a.asr_text = e.at("asr_text");
                a.asr_tokens = e.at("asr_tokens");
                a.cer = e.at("cer");
                a.wer = e.at("wer");
                a.speaker = e.at("speaker");
                for (const auto& w : e.at("words")) {
                    a.words.push_back({w.at("w"), w.at("cs"), w.at("ce"), w.at("ms_s"), w.at("ms_e")});
                }
                for (const auto& s : e.at("sentences")) {
                    a.sentences.push_back({{s.at("cs"), s.at("ce")}, s.at("asr"), s.at("asr_tokens"), s.at("cer"),
                                           s.at("covered")});
                }
                r.entries.emplace_back(std::move(a));
            } else {
                throw FormatError("unknown entry type '" + type + "'");
            }
        }
    } catch (const nlohmann::json::exception& ex) {
        throw FormatError(std::string("bad file record: ") + ex.what());
    }
    return r;
}

}  // namespace longalign::postproc
