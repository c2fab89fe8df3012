// SPDX-License-Identifier: Apache-2.0
#include "longalign/matcher.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "longalign/errors.hpp"
#include "longalign/unicode.hpp"

namespace longalign::match {

Token Vocabulary::intern(std::string_view word) {
    auto [it, inserted] = index_.try_emplace(std::string(word), static_cast<Token>(words_.size()));
    if (inserted) words_.emplace_back(word);
    return it->second;
}

std::vector<Token> Vocabulary::intern_all(std::span<const std::string> words) {
    std::vector<Token> out;
    out.reserve(words.size());
    for (const auto& w : words) out.push_back(intern(w));
    return out;
}

std::string_view to_string(Phase p) {
    switch (p) {
        case Phase::Histogram: return "histogram";
        case Phase::GapFill: return "gap_fill";
        case Phase::Recursive: return "recursive";
    }
    return "histogram";
}

Phase phase_from_string(std::string_view s) {
    if (s == "histogram") return Phase::Histogram;
    if (s == "gap_fill") return Phase::GapFill;
    if (s == "recursive") return Phase::Recursive;
    throw FormatError("unknown match phase '" + std::string(s) + "'");
}

namespace {

std::u32string joined_text(std::span<const Token> tokens, const Vocabulary& vocab) {
    std::u32string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) out.push_back(U' ');
        out += unicode::decode(vocab.text(tokens[i]));
    }
    return out;
}

double core_distance(std::span<const Token> a, std::span<const Token> b, std::size_t token_distance,
                     const Vocabulary* vocab, std::size_t short_span_tokens) {
    const std::size_t longest = std::max(a.size(), b.size());
    if (longest == 0) return 0.0;
    if (vocab && longest < short_span_tokens) {
        const auto ca = joined_text(a, *vocab);
        const auto cb = joined_text(b, *vocab);
        const std::size_t chars = std::max(ca.size(), cb.size());
        if (chars == 0) return 0.0;
        return static_cast<double>(levenshtein_distance<char32_t>(ca, cb)) / static_cast<double>(chars);
    }
    return static_cast<double>(token_distance) / static_cast<double>(longest);
}

// Edges that gain a match only by paying for edits are mostly chance hits on
// frequent words, so an edit costs two matches.
constexpr int kEditPenalty = 2;

// Drops leading and trailing insertions/deletions. Returns false when nothing
// aligned remains. Offsets advance past the dropped edge.
bool trim_edges(std::vector<EditOp>& ops, std::size_t& asr_begin, std::size_t& ref_begin) {
    auto aligned = [](EditOp op) { return op == EditOp::Match || op == EditOp::Substitute; };
    const auto first = std::find_if(ops.begin(), ops.end(), aligned);
    if (first == ops.end()) return false;
    const auto last = std::find_if(ops.rbegin(), ops.rend(), aligned).base();
    for (auto it = ops.begin(); it != first; ++it) {
        if (*it == EditOp::Delete) ++asr_begin;
        else ++ref_begin;
    }
    ops = std::vector<EditOp>(first, last);
    return true;
}

// Keeps the stretch of the script with the highest score under the local
// alignment weights, the shortest one on ties.
// Returns false when the script holds no match.
bool trim_to_core(std::vector<EditOp>& ops, std::size_t& asr_begin, std::size_t& ref_begin) {
    long best = 0, run = 0;
    std::size_t best_b = 0, best_e = 0, run_b = 0;
    for (std::size_t k = 0; k < ops.size(); ++k) {
        if (run <= 0) {
            run = 0;
            run_b = k;
        }
        run += ops[k] == EditOp::Match ? 1 : -kEditPenalty;
        if (run > best || (run == best && best > 0 && k + 1 - run_b < best_e - best_b)) {
            best = run;
            best_b = run_b;
            best_e = k + 1;
        }
    }
    if (best <= 0) return false;
    for (std::size_t k = 0; k < best_b; ++k) {
        if (ops[k] != EditOp::Insert) ++asr_begin;
        if (ops[k] != EditOp::Delete) ++ref_begin;
    }
    ops = std::vector<EditOp>(ops.begin() + static_cast<std::ptrdiff_t>(best_b),
                              ops.begin() + static_cast<std::ptrdiff_t>(best_e));
    return true;
}

// Local alignment scoring +1 per match and -kEditPenalty per substitution,
// insertion or deletion. Returns the best-scoring pair of subranges (the
// shortest on ties), or nothing when the windows share no token.
std::optional<std::pair<TokenRange, TokenRange>> local_core(std::span<const Token> a, std::span<const Token> b) {
    const std::size_t n = a.size(), m = b.size(), w = m + 1;
    std::vector<int> h((n + 1) * w, 0);
    int best = 0;
    std::size_t bi = 0, bj = 0;
    for (std::size_t i = 1; i <= n; ++i) {
        for (std::size_t j = 1; j <= m; ++j) {
            const int diag = h[(i - 1) * w + j - 1] + (a[i - 1] == b[j - 1] ? 1 : -kEditPenalty);
            const int v = std::max({0, diag, h[(i - 1) * w + j] - kEditPenalty, h[i * w + j - 1] - kEditPenalty});
            h[i * w + j] = v;
            if (v > best || (v == best && v > 0 && i + j < bi + bj)) {
                best = v;
                bi = i;
                bj = j;
            }
        }
    }
    if (best == 0) return std::nullopt;
    std::size_t i = bi, j = bj;
    while (i > 0 && j > 0 && h[i * w + j] > 0) {
        const int here = h[i * w + j];
        if (here == h[(i - 1) * w + j - 1] + (a[i - 1] == b[j - 1] ? 1 : -kEditPenalty)) {
            --i, --j;
        } else if (here == h[(i - 1) * w + j] - kEditPenalty) {
            --i;
        } else {
            --j;
        }
    }
    return std::make_pair(TokenRange{i, bi}, TokenRange{j, bj});
}

MatchSpan span_from_ops(std::vector<EditOp> ops, std::size_t asr_begin, std::size_t ref_begin, Phase phase) {
    MatchSpan s;
    s.asr.begin = s.asr.end = asr_begin;
    s.ref.begin = s.ref.end = ref_begin;
    for (EditOp op : ops) {
        if (op != EditOp::Insert) ++s.asr.end;
        if (op != EditOp::Delete) ++s.ref.end;
        if (op != EditOp::Match) ++s.edit_distance;
    }
    s.phase = phase;
    s.script = std::move(ops);
    return s;
}

// Restricts a span to ASR tokens [lo, hi) and re-trims the edges.
std::optional<MatchSpan> clip_span(const MatchSpan& s, std::size_t lo, std::size_t hi) {
    std::vector<EditOp> ops;
    std::size_t i = s.asr.begin, j = s.ref.begin;
    std::size_t asr_begin = lo, ref_begin = 0;
    bool started = false;
    for (EditOp op : s.script) {
        const bool consumes_asr = op != EditOp::Insert;
        const bool inside = consumes_asr ? (i >= lo && i < hi) : (i > lo && i < hi);
        if (inside) {
            if (!started) {
                started = true;
                asr_begin = i;
                ref_begin = j;
            }
            ops.push_back(op);
        }
        if (consumes_asr) ++i;
        if (op != EditOp::Delete) ++j;
    }
    if (!started || !trim_to_core(ops, asr_begin, ref_begin)) return std::nullopt;
    return span_from_ops(std::move(ops), asr_begin, ref_begin, s.phase);
}

std::vector<MatchSpan> merge_contiguous(std::vector<MatchSpan> spans) {
    std::sort(spans.begin(), spans.end(), [](const auto& a, const auto& b) { return a.asr.begin < b.asr.begin; });
    std::vector<MatchSpan> out;
    for (auto& s : spans) {
        if (!out.empty() && out.back().asr.end == s.asr.begin && out.back().ref.end == s.ref.begin) {
            auto& prev = out.back();
            prev.asr.end = s.asr.end;
            prev.ref.end = s.ref.end;
            prev.edit_distance += s.edit_distance;
            prev.phase = std::min(prev.phase, s.phase);
            prev.script.insert(prev.script.end(), s.script.begin(), s.script.end());
        } else {
            out.push_back(std::move(s));
        }
    }
    return out;
}

class Matcher {
public:
    Matcher(std::span<const Token> asr, std::span<const Token> ref, const MatchParams& params, const Vocabulary* vocab)
        : asr_(asr), ref_(ref), params_(params), vocab_(vocab), claimed_(asr.size(), 0), ref_claimed_(ref.size(), 0) {}

    MatchResult run() {
        MatchResult result;
        result.coverage.asr_total = asr_.size();
        result.coverage.ref_total = ref_.size();

        add(anchor_pass(0, asr_.size(), Phase::Histogram));
        record(result.coverage, Phase::Histogram);

        add(fill_gaps(spans_, asr_, ref_, params_, vocab_, Phase::GapFill));
        record(result.coverage, Phase::GapFill);

        for (int depth = 1; depth <= params_.max_depth; ++depth) {
            std::vector<MatchSpan> fresh;
            for (const auto& gap : unclaimed_runs()) {
                auto found = anchor_pass(gap.begin, gap.end, Phase::Recursive);
                fresh.insert(fresh.end(), found.begin(), found.end());
            }
            const std::size_t before = spans_.size();
            add(std::move(fresh));
            add(fill_gaps(spans_, asr_, ref_, params_, vocab_, Phase::Recursive));
            if (spans_.size() == before) break;
        }
        record(result.coverage, Phase::Recursive);

        result.spans = spans_;
        return result;
    }

private:
    struct Proposal {
        MatchSpan span;
        double distance;
    };

    std::vector<TokenRange> unclaimed_runs() const {
        std::vector<TokenRange> out;
        std::size_t i = 0;
        const std::size_t min_len = std::max<std::size_t>(params_.min_span_tokens, 1);
        while (i < asr_.size()) {
            if (claimed_[i]) {
                ++i;
                continue;
            }
            const std::size_t b = i;
            while (i < asr_.size() && !claimed_[i]) ++i;
            if (i - b >= min_len) out.push_back({b, i});
        }
        return out;
    }

    // Histogram search + refinement over ASR tokens [lo, hi) against the whole reference.
    std::vector<MatchSpan> anchor_pass(std::size_t lo, std::size_t hi, Phase phase) {
        if (hi <= lo || ref_.empty()) return {};
        const auto sub = asr_.subspan(lo, hi - lo);
        const std::size_t w = std::min(params_.window, sub.size());
        const auto windows = candidate_search(sub, ref_, w, params_.stride, params_.min_overlap);
        const std::size_t margin = std::max<std::size_t>(w / 2, 1);

        std::vector<Proposal> proposals;
        const MatchSpan* prev = nullptr;
        for (const auto& win : windows) {
            std::vector<std::size_t> picked;
            for (const auto& hit : win.hits) {
                if (picked.size() >= params_.max_candidates) break;
                const bool near = std::any_of(picked.begin(), picked.end(), [&](std::size_t p) {
                    return (p > hit.ref_pos ? p - hit.ref_pos : hit.ref_pos - p) < margin;
                });
                if (!near) picked.push_back(hit.ref_pos);
            }
            std::optional<Proposal> best;
            std::size_t best_dev = 0;
            for (std::size_t pos : picked) {
                const std::size_t rb = pos - std::min(margin, pos);
                const std::size_t re = std::min(ref_.size(), pos + w + margin);
                auto span = refine_candidate(sub.subspan(win.asr.begin, win.asr.size()), lo + win.asr.begin,
                                             ref_.subspan(rb, re - rb), rb, params_.accept_threshold, phase, vocab_,
                                             params_.short_span_tokens);
                if (!span) continue;
                const double d = normalized_distance(*span, asr_, ref_, vocab_, params_.short_span_tokens);
                std::size_t dev = 0;
                if (prev) {
                    const auto diag = static_cast<long long>(span->ref.begin) - static_cast<long long>(span->asr.begin);
                    const auto prev_diag =
                        static_cast<long long>(prev->ref.begin) - static_cast<long long>(prev->asr.begin);
                    dev = static_cast<std::size_t>(std::llabs(diag - prev_diag));
                }
                if (!best || d < best->distance || (d == best->distance && dev < best_dev)) {
                    best = Proposal{std::move(*span), d};
                    best_dev = dev;
                }
            }
            if (best) {
                proposals.push_back(std::move(*best));
                prev = &proposals.back().span;
            }
        }

        std::vector<std::size_t> order(proposals.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            const auto& pa = proposals[a];
            const auto& pb = proposals[b];
            return std::make_tuple(pa.distance, -static_cast<long long>(pa.span.asr.size()), pa.span.asr.begin) <
                   std::make_tuple(pb.distance, -static_cast<long long>(pb.span.asr.size()), pb.span.asr.begin);
        });

        std::vector<MatchSpan> accepted;
        for (std::size_t idx : order) {
            const auto& s = proposals[idx].span;
            // Longest run inside the proposal whose words and reference words are both free, earliest on ties.
            const auto blocked = blocked_positions(s);
            std::size_t best_b = 0, best_len = 0;
            for (std::size_t i = s.asr.begin; i < s.asr.end;) {
                if (blocked[i - s.asr.begin]) {
                    ++i;
                    continue;
                }
                const std::size_t b = i;
                while (i < s.asr.end && !blocked[i - s.asr.begin]) ++i;
                if (i - b > best_len) {
                    best_b = b;
                    best_len = i - b;
                }
            }
            if (best_len == 0) continue;
            auto clipped = best_len == s.asr.size() ? std::optional<MatchSpan>(s)
                                                    : clip_span(s, best_b, best_b + best_len);
            if (!clipped || clipped->asr.size() < params_.min_span_tokens) continue;
            claim(*clipped);
            accepted.push_back(std::move(*clipped));
        }
        return accepted;
    }

    // A reference word aligns to at most one place in the recording.
    std::vector<char> blocked_positions(const MatchSpan& s) const {
        std::vector<char> out(s.asr.size(), 0);
        std::size_t i = s.asr.begin, j = s.ref.begin;
        for (EditOp op : s.script) {
            if (op == EditOp::Insert) {
                if (ref_claimed_[j] && i < s.asr.end) out[i - s.asr.begin] = 1;
                ++j;
                continue;
            }
            out[i - s.asr.begin] |= claimed_[i];
            if (op != EditOp::Delete) out[i - s.asr.begin] |= ref_claimed_[j++];
            ++i;
        }
        return out;
    }

    void claim(const MatchSpan& s) {
        for (std::size_t i = s.asr.begin; i < s.asr.end; ++i) claimed_[i] = 1;
        for (std::size_t j = s.ref.begin; j < s.ref.end; ++j) ref_claimed_[j] = 1;
    }

    void add(std::vector<MatchSpan> fresh) {
        for (auto& s : fresh) {
            claim(s);
            spans_.push_back(std::move(s));
        }
        spans_ = merge_contiguous(std::move(spans_));
    }

    void record(CoverageStats& cov, Phase phase) const {
        PhaseCoverage pc;
        pc.phase = phase;
        std::vector<char> ref_hit(ref_.size(), 0);
        for (const auto& s : spans_) {
            pc.asr_matched += s.asr.size();
            for (std::size_t j = s.ref.begin; j < s.ref.end; ++j) ref_hit[j] = 1;
        }
        pc.ref_matched = static_cast<std::size_t>(std::count(ref_hit.begin(), ref_hit.end(), 1));
        pc.asr_fraction = asr_.empty() ? 0.0 : static_cast<double>(pc.asr_matched) / static_cast<double>(asr_.size());
        pc.ref_fraction = ref_.empty() ? 0.0 : static_cast<double>(pc.ref_matched) / static_cast<double>(ref_.size());
        cov.phases.push_back(pc);
    }

    std::span<const Token> asr_;
    std::span<const Token> ref_;
    const MatchParams& params_;
    const Vocabulary* vocab_;
    std::vector<char> claimed_;
    std::vector<char> ref_claimed_;
    std::vector<MatchSpan> spans_;
};

std::string ngram_key(std::span<const std::string> tokens) {
    std::string key;
    for (const auto& t : tokens) {
        key += t;
        key.push_back('\x1f');
    }
    return key;
}

std::unordered_map<std::string, std::size_t> ngram_counts(const std::vector<std::string>& tokens, int n) {
    std::unordered_map<std::string, std::size_t> out;
    const auto k = static_cast<std::size_t>(n);
    for (std::size_t i = 0; i + k <= tokens.size(); ++i) {
        ++out[ngram_key(std::span<const std::string>(tokens).subspan(i, k))];
    }
    return out;
}

}  // namespace

std::vector<Pairing> pair_recordings(const std::map<std::string, std::vector<std::string>>& asr_texts,
                                     const std::map<std::string, std::vector<std::string>>& transcripts, int n,
                                     double floor) {
    if (n < 1) throw ConfigError("n-gram order for pairing must be positive");
    std::map<std::string, std::unordered_map<std::string, std::size_t>> section_grams;
    for (const auto& [section, tokens] : transcripts) section_grams.emplace(section, ngram_counts(tokens, n));

    std::vector<Pairing> out;
    for (const auto& [file, tokens] : asr_texts) {
        const auto grams = ngram_counts(tokens, n);
        const std::size_t total = tokens.size() >= static_cast<std::size_t>(n) ? tokens.size() - static_cast<std::size_t>(n) + 1 : 0;
        std::vector<Pairing> row;
        for (const auto& [section, sgrams] : section_grams) {
            std::size_t shared = 0;
            for (const auto& [g, c] : grams) {
                if (auto it = sgrams.find(g); it != sgrams.end()) shared += std::min(c, it->second);
            }
            const double score = total == 0 ? 0.0 : static_cast<double>(shared) / static_cast<double>(total);
            if (score >= floor) row.push_back({file, section, score});
        }
        std::stable_sort(row.begin(), row.end(), [](const auto& a, const auto& b) { return a.score > b.score; });
        out.insert(out.end(), row.begin(), row.end());
    }
    return out;
}

std::vector<WindowCandidates> candidate_search(std::span<const Token> asr, std::span<const Token> ref,
                                               std::size_t window, std::size_t stride, double min_overlap) {
    if (window < 1 || stride < 1) throw ConfigError("window and stride must be at least 1");
    std::vector<WindowCandidates> out;
    if (asr.empty() || ref.empty()) return out;
    const std::size_t w = std::min(window, asr.size());
    const std::size_t wr = std::min(w, ref.size());

    Token max_token = 0;
    for (Token t : asr) max_token = std::max(max_token, t);
    for (Token t : ref) max_token = std::max(max_token, t);
    std::vector<int> hist_asr(static_cast<std::size_t>(max_token) + 1, 0);
    std::vector<int> hist_ref(hist_asr.size(), 0);

    std::vector<std::size_t> starts;
    for (std::size_t s = 0; s + w <= asr.size(); s += stride) starts.push_back(s);
    if (starts.back() + w < asr.size()) starts.push_back(asr.size() - w);

    for (std::size_t start : starts) {
        WindowCandidates wc;
        wc.asr = {start, start + w};
        for (std::size_t i = start; i < start + w; ++i) ++hist_asr[static_cast<std::size_t>(asr[i])];

        long inter = 0;
        for (std::size_t j = 0; j < wr; ++j) {
            const auto t = static_cast<std::size_t>(ref[j]);
            if (++hist_ref[t] <= hist_asr[t]) ++inter;
        }
        for (std::size_t pos = 0;; ++pos) {
            const double overlap = static_cast<double>(inter) / static_cast<double>(w);
            if (overlap >= min_overlap) wc.hits.push_back({pos, overlap});
            if (pos + wr >= ref.size()) break;
            const auto out_tok = static_cast<std::size_t>(ref[pos]);
            if (hist_ref[out_tok]-- <= hist_asr[out_tok]) --inter;
            const auto in_tok = static_cast<std::size_t>(ref[pos + wr]);
            if (++hist_ref[in_tok] <= hist_asr[in_tok]) ++inter;
        }
        for (std::size_t j = ref.size() - wr; j < ref.size(); ++j) --hist_ref[static_cast<std::size_t>(ref[j])];
        for (std::size_t i = start; i < start + w; ++i) --hist_asr[static_cast<std::size_t>(asr[i])];

        std::stable_sort(wc.hits.begin(), wc.hits.end(),
                         [](const RefHit& a, const RefHit& b) { return a.overlap > b.overlap; });
        out.push_back(std::move(wc));
    }
    return out;
}

std::optional<MatchSpan> refine_candidate(std::span<const Token> asr_window, std::size_t asr_offset,
                                          std::span<const Token> ref_window, std::size_t ref_offset, double threshold,
                                          Phase phase, const Vocabulary* vocab, std::size_t short_span_tokens,
                                          Trim trim) {
    std::size_t asr_begin = 0, ref_begin = 0;
    if (trim == Trim::Core) {
        const auto core = local_core(asr_window, ref_window);
        if (!core) return std::nullopt;
        asr_window = asr_window.subspan(core->first.begin, core->first.size());
        ref_window = ref_window.subspan(core->second.begin, core->second.size());
        asr_offset += core->first.begin;
        ref_offset += core->second.begin;
    }
    auto script = levenshtein<Token>(asr_window, ref_window);
    if (!trim_edges(script.ops, asr_begin, ref_begin)) return std::nullopt;
    auto span = span_from_ops(std::move(script.ops), asr_offset + asr_begin, ref_offset + ref_begin, phase);
    const double d = core_distance(asr_window.subspan(span.asr.begin - asr_offset, span.asr.size()),
                                   ref_window.subspan(span.ref.begin - ref_offset, span.ref.size()),
                                   span.edit_distance, vocab, short_span_tokens);
    if (d > threshold) return std::nullopt;
    return span;
}

double normalized_distance(const MatchSpan& span, std::span<const Token> asr, std::span<const Token> ref,
                           const Vocabulary* vocab, std::size_t short_span_tokens) {
    return core_distance(asr.subspan(span.asr.begin, span.asr.size()), ref.subspan(span.ref.begin, span.ref.size()),
                         span.edit_distance, vocab, short_span_tokens);
}

std::vector<MatchSpan> fill_gaps(std::span<const MatchSpan> spans, std::span<const Token> asr,
                                 std::span<const Token> ref, const MatchParams& params, const Vocabulary* vocab,
                                 Phase phase) {
    std::vector<MatchSpan> out;
    auto fill = [&](TokenRange asr_gap, TokenRange ref_gap, Trim trim) {
        if (asr_gap.size() == 0 || ref_gap.size() == 0) return;
        if (asr_gap.size() > params.max_gap_tokens || ref_gap.size() > params.max_gap_tokens) return;
        auto span = refine_candidate(asr.subspan(asr_gap.begin, asr_gap.size()), asr_gap.begin,
                                     ref.subspan(ref_gap.begin, ref_gap.size()), ref_gap.begin, params.gap_threshold,
                                     phase, vocab, params.short_span_tokens, trim);
        if (span) out.push_back(std::move(*span));
    };
    if (spans.empty()) return out;

    const auto& first = spans.front();
    std::size_t ref_lo = 0;
    for (const auto& s : spans) {
        if (s.ref.end <= first.ref.begin) ref_lo = std::max(ref_lo, s.ref.end);
    }
    fill({0, first.asr.begin}, {ref_lo, first.ref.begin}, Trim::Core);

    for (std::size_t k = 1; k < spans.size(); ++k) {
        const auto& a = spans[k - 1];
        const auto& b = spans[k];
        if (b.asr.begin <= a.asr.end || b.ref.begin <= a.ref.end) continue;
        fill({a.asr.end, b.asr.begin}, {a.ref.end, b.ref.begin}, Trim::Indels);
    }

    const auto& last = spans.back();
    std::size_t ref_hi = ref.size();
    for (const auto& s : spans) {
        if (s.ref.begin >= last.ref.end) ref_hi = std::min(ref_hi, s.ref.begin);
    }
    fill({last.asr.end, asr.size()}, {last.ref.end, ref_hi}, Trim::Core);
    return out;
}

MatchResult match_sequences(std::span<const Token> asr, std::span<const Token> ref, const MatchParams& params,
                            const Vocabulary* vocab) {
    if (params.window < 1 || params.stride < 1) throw ConfigError("window and stride must be at least 1");
    return Matcher(asr, ref, params, vocab).run();
}

}  // namespace longalign::match
