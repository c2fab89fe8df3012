// SPDX-License-Identifier: Apache-2.0
#include "longalign/ctc.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <unordered_map>

#include "longalign/errors.hpp"
#include "longalign/unicode.hpp"

namespace longalign::ctc {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kLn10 = 2.302585092994046;

struct Emission {
    std::uint32_t label;
    std::size_t start;
    std::size_t end;
};

// Labels with a one-code-point symbol spell text; longer symbols (<unk>, <s>)
// are silent.
std::vector<bool> spelling_labels(const LogitMatrix& m) {
    std::vector<bool> out(m.vocab_size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = unicode::length(m.vocab[i]) == 1;
    return out;
}

TimedWord make_word(std::string text, std::size_t start_frame, std::size_t end_frame, const LogitMatrix& m) {
    return {std::move(text), m.frame_start_ms(start_frame), m.frame_start_ms(end_frame + 1), start_frame, end_frame};
}

DecodedHypothesis build_hypothesis(const std::vector<Emission>& chars, const LogitMatrix& m, double score) {
    const auto spells = spelling_labels(m);
    DecodedHypothesis hyp;
    hyp.score = score;
    std::string current;
    std::size_t first = 0, last = 0;
    auto flush = [&] {
        if (current.empty()) return;
        hyp.words.push_back(make_word(std::move(current), first, last, m));
        current.clear();
    };
    for (const auto& e : chars) {
        if (e.label == m.word_delim_id) {
            flush();
            continue;
        }
        if (!spells[e.label]) continue;
        if (current.empty()) first = e.start;
        current += m.vocab[e.label];
        last = e.end;
    }
    flush();
    for (std::size_t i = 0; i < hyp.words.size(); ++i) {
        if (i) hyp.text += ' ';
        hyp.text += hyp.words[i].word;
    }
    return hyp;
}

std::vector<char> speech_mask(const LogitMatrix& m, std::span<const SpeechSegment> segments) {
    const std::size_t frames = m.num_frames();
    if (segments.empty()) return std::vector<char>(frames, 1);
    std::vector<char> mask(frames, 0);
    const double lo = m.start_offset_ms;
    const double hi = m.end_ms();
    constexpr double eps = 1e-6;
    for (const auto& seg : segments) {
        if (!(seg.end_ms > seg.start_ms) || seg.start_ms < lo - eps || seg.end_ms > hi + eps) {
            throw InvalidSegment("segment [" + std::to_string(seg.start_ms) + ", " + std::to_string(seg.end_ms) +
                                 ") ms lies outside logits range [" + std::to_string(lo) + ", " + std::to_string(hi) +
                                 ")");
        }
        for (std::size_t t = 0; t < frames; ++t) {
            const double center = m.frame_start_ms(t) + 0.5 * m.frame_duration_ms;
            if (center >= seg.start_ms && center < seg.end_ms) mask[t] = 1;
        }
    }
    return mask;
}

// ---- prefix beam search -------------------------------------------------------

struct PathNode {
    std::uint32_t label;
    std::uint32_t start;
    std::uint32_t prev_end;  // end frame of the preceding character
    std::uint32_t depth;
    std::shared_ptr<const PathNode> parent;
};
using PathPtr = std::shared_ptr<const PathNode>;

struct Timed {
    double score = kNegInf;
    PathPtr path;
    std::uint32_t last_end = 0;  // only meaningful for blank-ending paths
};

struct LmState {
    std::array<lm::WordId, lm::kMaxOrder> ctx{};
    std::uint8_t ctx_len = 0;
    int trie = 0;  // node in the vocabulary trie, -1 once the partial word is out of vocabulary
    bool partial = false;
    double score = 0.0;
};

struct Beam {
    std::uint64_t hash = 0x51ed2701f3a5c9b1ULL;
    int last = -1;
    Timed blank;
    Timed nonblank;
    LmState lm;

    double acoustic() const { return std::max(blank.score, nonblank.score); }
    double total() const { return acoustic() + lm.score; }
    const PathPtr& labels() const { return nonblank.score > kNegInf ? nonblank.path : blank.path; }
};

std::uint64_t extend_hash(std::uint64_t h, std::uint32_t label) {
    std::uint64_t z = h ^ ((static_cast<std::uint64_t>(label) + 1) * 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Lexicographic order of two label sequences stored as parent-linked chains.
int compare_labels(const PathNode* a, const PathNode* b) {
    const std::uint32_t da = a ? a->depth : 0;
    const std::uint32_t db = b ? b->depth : 0;
    int cmp = da == db ? 0 : (da < db ? -1 : 1);
    while (a && a->depth > db) a = a->parent.get();
    while (b && b->depth > da) b = b->parent.get();
    while (a != b) {
        if (a->label != b->label) cmp = a->label < b->label ? -1 : 1;
        a = a->parent.get();
        b = b->parent.get();
    }
    return cmp;
}

bool better(const Beam& x, double sx, const Beam& y, double sy) {
    if (sx != sy) return sx > sy;
    return compare_labels(x.labels().get(), y.labels().get()) < 0;
}

class WordTrie {
public:
    WordTrie(const LogitMatrix& m, const lm::ArpaModel& model) {
        std::unordered_map<std::string, std::uint32_t> label_of;
        for (std::uint32_t i = 0; i < m.vocab_size(); ++i) {
            if (i != m.blank_id && i != m.word_delim_id) label_of.emplace(m.vocab[i], i);
        }
        word_.push_back(-1);
        for (lm::WordId id = 0; id < model.vocab().size(); ++id) {
            if (id == model.sentence_begin() || id == model.sentence_end() || id == model.unknown()) continue;
            const auto cps = unicode::decode(model.vocab()[id]);
            int node = 0;
            for (char32_t c : cps) {
                auto it = label_of.find(unicode::encode(c));
                if (it == label_of.end()) {
                    node = -1;
                    break;
                }
                node = child_or_create(node, it->second);
            }
            if (node > 0) word_[static_cast<std::size_t>(node)] = static_cast<int>(id);
        }
    }

    int child(int node, std::uint32_t label) const {
        if (node < 0) return -1;
        auto it = children_.find(key(node, label));
        return it == children_.end() ? -1 : it->second;
    }
    int word(int node) const { return node < 0 ? -1 : word_[static_cast<std::size_t>(node)]; }

private:
    static std::uint64_t key(int node, std::uint32_t label) {
        return (static_cast<std::uint64_t>(node) << 32) | label;
    }
    int child_or_create(int node, std::uint32_t label) {
        auto [it, inserted] = children_.try_emplace(key(node, label), static_cast<int>(word_.size()));
        if (inserted) word_.push_back(-1);
        return it->second;
    }

    std::unordered_map<std::uint64_t, int> children_;
    std::vector<int> word_;
};

class LmScorer {
public:
    LmScorer(const LogitMatrix& m, const lm::ArpaModel* model, const BeamOptions& opt)
        : model_(model), opt_(opt), weight_(opt.alpha * kLn10) {
        if (model_) trie_.emplace(m, *model_);
    }

    LmState initial() const {
        LmState s;
        if (model_) {
            s.ctx[0] = model_->sentence_begin();
            s.ctx_len = 1;
        }
        return s;
    }

    LmState advance(const LmState& s, std::uint32_t label, std::uint32_t delim, bool spells) const {
        LmState out = s;
        if (label == delim) {
            if (s.partial) close_word(out);
            return out;
        }
        if (!spells) return out;
        out.partial = true;
        out.trie = trie_ ? trie_->child(s.trie, label) : -1;
        return out;
    }

    double finish(const LmState& s) const {
        LmState out = s;
        if (s.partial) close_word(out);
        if (model_ && opt_.alpha != 0.0) out.score += weight_ * model_->log10_prob(context(out), model_->sentence_end());
        return out.score;
    }

private:
    std::span<const lm::WordId> context(const LmState& s) const { return {s.ctx.data(), s.ctx_len}; }

    void close_word(LmState& s) const {
        s.score += opt_.beta;
        if (model_) {
            const int w = trie_->word(s.trie);
            const lm::WordId id = w < 0 ? model_->unknown() : static_cast<lm::WordId>(w);
            if (opt_.alpha != 0.0) s.score += weight_ * model_->log10_prob(context(s), id);
            const std::size_t keep = static_cast<std::size_t>(std::max(model_->order() - 1, 1));
            if (s.ctx_len < keep) {
                s.ctx[s.ctx_len++] = id;
            } else {
                std::rotate(s.ctx.begin(), s.ctx.begin() + 1, s.ctx.begin() + s.ctx_len);
                s.ctx[s.ctx_len - 1] = id;
            }
        }
        s.trie = 0;
        s.partial = false;
    }

    const lm::ArpaModel* model_;
    BeamOptions opt_;
    double weight_;
    std::optional<WordTrie> trie_;
};

std::vector<Emission> unwind(const PathPtr& head, std::uint32_t head_end) {
    std::vector<Emission> out;
    std::uint32_t end = head_end;
    for (const PathNode* n = head.get(); n; n = n->parent.get()) {
        out.push_back({n->label, n->start, end});
        end = n->prev_end;
    }
    std::reverse(out.begin(), out.end());
    return out;
}

}  // namespace

DecodedHypothesis greedy_decode(const LogitMatrix& m) {
    std::vector<Emission> chars;
    double score = 0.0;
    std::int64_t prev = -1;
    for (std::size_t t = 0; t < m.num_frames(); ++t) {
        const auto r = m.row(t);
        const auto best = static_cast<std::uint32_t>(std::max_element(r.begin(), r.end()) - r.begin());
        score += r[best];
        if (best == m.blank_id) {
            prev = -1;
            continue;
        }
        if (static_cast<std::int64_t>(best) == prev) {
            chars.back().end = t;
            continue;
        }
        chars.push_back({best, t, t});
        prev = best;
    }
    return build_hypothesis(chars, m, score);
}

DecodedHypothesis beam_decode(const LogitMatrix& m, const lm::ArpaModel* model, const BeamOptions& opt,
                              std::span<const SpeechSegment> segments) {
    if (opt.beam_width < 1) throw ConfigError("beam width must be at least 1");
    const std::size_t frames = m.num_frames();
    const std::size_t vsize = m.vocab_size();
    const auto mask = speech_mask(m, segments);
    const auto spells = spelling_labels(m);
    const LmScorer scorer(m, model, opt);

    std::vector<Beam> beams(1);
    beams[0].blank.score = 0.0;
    beams[0].lm = scorer.initial();

    std::vector<Beam> next;
    std::unordered_map<std::uint64_t, std::size_t> slot;
    std::vector<std::uint32_t> expand;

    for (std::size_t t = 0; t < frames; ++t) {
        const auto tt = static_cast<std::uint32_t>(t);
        if (!mask[t]) {
            // Hard blank: every beam collapses onto its blank-ending path.
            for (auto& b : beams) {
                if (b.nonblank.score > b.blank.score) {
                    b.blank = {b.nonblank.score, b.nonblank.path, tt == 0 ? 0 : tt - 1};
                }
                b.nonblank = Timed{};
            }
            continue;
        }
        const auto r = m.row(t);
        const auto argmax = static_cast<std::uint32_t>(std::max_element(r.begin(), r.end()) - r.begin());
        expand.clear();
        for (std::uint32_t c = 0; c < vsize; ++c) {
            if (c != m.blank_id && (r[c] >= opt.token_min_logp || c == argmax)) expand.push_back(c);
        }

        next.clear();
        slot.clear();
        auto merge = [&](std::uint64_t hash, int last, const LmState& lm_state) -> Beam& {
            auto [it, inserted] = slot.try_emplace(hash, next.size());
            if (inserted) {
                Beam nb;
                nb.hash = hash;
                nb.last = last;
                nb.lm = lm_state;
                next.push_back(std::move(nb));
            }
            return next[it->second];
        };
        auto offer = [](Timed& dst, double score, const PathPtr& path, std::uint32_t last_end) {
            if (score > dst.score) dst = {score, path, last_end};
        };

        for (const auto& b : beams) {
            const bool blank_best = b.blank.score >= b.nonblank.score;
            const double best = b.acoustic();
            const PathPtr& best_path = blank_best ? b.blank.path : b.nonblank.path;
            const std::uint32_t best_end = blank_best ? b.blank.last_end : (tt == 0 ? 0 : tt - 1);

            {
                Beam& same = merge(b.hash, b.last, b.lm);
                offer(same.blank, best + r[m.blank_id], best_path, best_end);
                if (b.last >= 0 && b.nonblank.score > kNegInf) {
                    offer(same.nonblank, b.nonblank.score + r[static_cast<std::size_t>(b.last)], b.nonblank.path, 0);
                }
            }
            for (std::uint32_t c : expand) {
                const bool repeat = static_cast<int>(c) == b.last;
                const double src = repeat ? b.blank.score : best;
                if (src == kNegInf) continue;
                const PathPtr& parent = repeat ? b.blank.path : best_path;
                const std::uint32_t prev_end = repeat ? b.blank.last_end : best_end;
                const std::uint64_t h = extend_hash(b.hash, c);
                const double score = src + r[c];
                auto it = slot.find(h);
                if (it != slot.end() && next[it->second].nonblank.score >= score) continue;
                Beam& ext = merge(h, static_cast<int>(c), scorer.advance(b.lm, c, m.word_delim_id, spells[c]));
                auto node = std::make_shared<const PathNode>(
                    PathNode{c, tt, prev_end, (parent ? parent->depth : 0) + 1, parent});
                offer(ext.nonblank, score, node, 0);
            }
        }

        // Rank by total score, ties by lexicographic label prefix.
        std::vector<std::size_t> order(next.size());
        std::vector<double> totals(next.size());
        for (std::size_t i = 0; i < next.size(); ++i) {
            order[i] = i;
            totals[i] = next[i].total();
        }
        const std::size_t keep = std::min(opt.beam_width, next.size());
        auto cmp = [&](std::size_t a, std::size_t b) { return better(next[a], totals[a], next[b], totals[b]); };
        std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(), cmp);
        const double floor = totals[order[0]] - opt.prune_margin;
        beams.clear();
        for (std::size_t i = 0; i < keep; ++i) {
            if (i > 0 && totals[order[i]] < floor) break;
            beams.push_back(std::move(next[order[i]]));
        }
    }

    const Beam* winner = nullptr;
    double winner_score = kNegInf;
    for (const auto& b : beams) {
        const double s = b.acoustic() + scorer.finish(b.lm);
        if (!winner || better(b, s, *winner, winner_score)) {
            winner = &b;
            winner_score = s;
        }
    }
    const bool blank_best = winner->blank.score >= winner->nonblank.score;
    const auto chars = blank_best ? unwind(winner->blank.path, winner->blank.last_end)
                                  : unwind(winner->nonblank.path, static_cast<std::uint32_t>(frames - 1));
    return build_hypothesis(chars, m, winner_score);
}

AlignmentPath force_align(const LogitMatrix& m, std::u32string_view ref, const AlignOptions& options) {
    if (ref.empty()) throw ConfigError("reference for forced alignment is empty");
    std::unordered_map<char32_t, std::uint32_t> label_of;
    for (std::uint32_t i = 0; i < m.vocab_size(); ++i) {
        if (i == m.blank_id || i == m.word_delim_id) continue;
        const auto cps = unicode::decode(m.vocab[i]);
        if (cps.size() == 1) label_of.emplace(cps[0], i);
    }
    std::vector<std::uint32_t> targets;
    const bool edges = options.optional_edge_delimiters;
    if (edges) targets.push_back(m.word_delim_id);
    std::size_t required = 0;
    for (std::size_t i = 0; i < ref.size(); ++i) {
        std::uint32_t label = m.word_delim_id;
        if (ref[i] != U' ') {
            auto it = label_of.find(ref[i]);
            if (it == label_of.end()) throw UnknownSymbol("character '" + unicode::encode(ref[i]) + "' is not in the logit vocabulary");
            label = it->second;
        }
        required += 1 + ((i > 0 && targets.back() == label) ? 1 : 0);
        targets.push_back(label);
    }
    if (edges) targets.push_back(m.word_delim_id);

    const std::size_t frames = m.num_frames();
    if (frames < required) {
        throw TooShortAudio("reference needs at least " + std::to_string(required) + " frames, logits have " +
                            std::to_string(frames));
    }

    const std::size_t states = 2 * targets.size() + 1;
    auto label_at = [&](std::size_t s) { return s % 2 == 0 ? m.blank_id : targets[s / 2]; };
    const std::size_t first_states = edges ? 4 : 2;
    const std::size_t last_states = edges ? 4 : 2;

    std::vector<double> prev(states, kNegInf), cur(states, kNegInf);
    std::vector<std::int8_t> back(frames * states, -1);
    {
        const auto r = m.row(0);
        for (std::size_t s = 0; s < std::min(first_states, states); ++s) prev[s] = r[label_at(s)];
    }
    for (std::size_t t = 1; t < frames; ++t) {
        const auto r = m.row(t);
        for (std::size_t s = 0; s < states; ++s) {
            double best = kNegInf;
            std::int8_t step = -1;
            if (s % 2 == 1 && s >= 2 && targets[s / 2] != targets[s / 2 - 1] && prev[s - 2] > best) {
                best = prev[s - 2];
                step = 2;
            }
            if (s >= 1 && prev[s - 1] > best) {
                best = prev[s - 1];
                step = 1;
            }
            if (prev[s] > best) {
                best = prev[s];
                step = 0;
            }
            cur[s] = best == kNegInf ? kNegInf : best + r[label_at(s)];
            back[t * states + s] = step;
        }
        std::swap(prev, cur);
    }

    std::size_t end_state = states;
    double score = kNegInf;
    for (std::size_t s = states - std::min(last_states, states); s < states; ++s) {
        if (prev[s] > score) {
            score = prev[s];
            end_state = s;
        }
    }
    if (end_state == states) throw TooShortAudio("no complete alignment path fits the logits");

    std::vector<std::size_t> path(frames);
    std::size_t s = end_state;
    for (std::size_t t = frames; t-- > 0;) {
        path[t] = s;
        if (t > 0) s -= static_cast<std::size_t>(back[t * states + s]);
    }

    AlignmentPath out;
    out.score = score;
    const std::size_t offset = edges ? 1 : 0;
    out.chars.resize(ref.size());
    std::vector<bool> seen(ref.size(), false);
    for (std::size_t t = 0; t < frames; ++t) {
        if (path[t] % 2 == 0) continue;
        const std::size_t k = path[t] / 2;
        if (k < offset || k - offset >= ref.size()) continue;
        auto& span = out.chars[k - offset];
        if (!seen[k - offset]) {
            span = {ref[k - offset], t, t};
            seen[k - offset] = true;
        } else {
            span.end_frame = t;
        }
    }
    return out;
}

std::vector<TimedWord> word_offsets(const AlignmentPath& path, const LogitMatrix& m) {
    std::vector<TimedWord> out;
    std::u32string current;
    std::size_t first = 0, last = 0;
    auto flush = [&] {
        if (current.empty()) return;
        out.push_back(make_word(unicode::encode(current), first, last, m));
        current.clear();
    };
    for (const auto& c : path.chars) {
        if (c.ch == U' ') {
            flush();
            continue;
        }
        if (current.empty()) first = c.start_frame;
        current.push_back(c.ch);
        last = c.end_frame;
    }
    flush();
    return out;
}

}  // namespace longalign::ctc
