// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "longalign/edit_distance.hpp"

namespace longalign::match {

using Token = std::int32_t;

// Interns word strings so sequences can be compared as integers.
class Vocabulary {
public:
    Token intern(std::string_view word);
    const std::string& text(Token t) const { return words_.at(static_cast<std::size_t>(t)); }
    std::size_t size() const { return words_.size(); }
    std::vector<Token> intern_all(std::span<const std::string> words);

private:
    std::vector<std::string> words_;
    std::unordered_map<std::string, Token> index_;
};

struct TokenRange {
    std::size_t begin = 0;
    std::size_t end = 0;

    std::size_t size() const { return end - begin; }
    bool empty() const { return end <= begin; }
    friend bool operator==(const TokenRange&, const TokenRange&) = default;
};

enum class Phase { Histogram, GapFill, Recursive };
std::string_view to_string(Phase p);
Phase phase_from_string(std::string_view s);

struct MatchSpan {
    TokenRange asr;
    TokenRange ref;
    std::size_t edit_distance = 0;
    Phase phase = Phase::Histogram;
    std::vector<EditOp> script;  // ASR span -> reference span, no edge insertions/deletions
};

struct PhaseCoverage {
    Phase phase = Phase::Histogram;
    std::size_t asr_matched = 0;  // cumulative
    std::size_t ref_matched = 0;  // cumulative
    double asr_fraction = 0.0;
    double ref_fraction = 0.0;
};

struct CoverageStats {
    std::size_t asr_total = 0;
    std::size_t ref_total = 0;
    std::vector<PhaseCoverage> phases;  // in execution order, cumulative
};

struct MatchParams {
    std::size_t window = 20;
    std::size_t stride = 10;
    double min_overlap = 0.5;
    double accept_threshold = 0.4;
    double gap_threshold = 0.6;
    int max_depth = 2;
    std::size_t max_candidates = 5;    // refined per ASR window
    std::size_t min_span_tokens = 2;   // shorter accepted pieces are dropped
    std::size_t short_span_tokens = 5; // below this, distance is measured on characters
    std::size_t max_gap_tokens = 3000; // larger gaps are left to the recursive pass
};

struct RefHit {
    std::size_t ref_pos = 0;
    double overlap = 0.0;
};

struct WindowCandidates {
    TokenRange asr;
    std::vector<RefHit> hits;  // overlap descending, ties by earliest position
};

// n-gram coverage between every ASR file and transcript section.
struct Pairing {
    std::string file;
    std::string section;
    double score = 0.0;
};

// Score = shared n-gram count (multiset intersection) / number of ASR n-grams.
// Returns all pairs with score >= floor, ordered by file, then score descending.
std::vector<Pairing> pair_recordings(const std::map<std::string, std::vector<std::string>>& asr_texts,
                                     const std::map<std::string, std::vector<std::string>>& transcripts, int n = 3,
                                     double floor = 0.1);

// Sliding bag-of-words search. ASR windows start every `stride` tokens (the last
// one is aligned to the end); each is compared with every reference window of the same size.
std::vector<WindowCandidates> candidate_search(std::span<const Token> asr, std::span<const Token> ref,
                                               std::size_t window, std::size_t stride, double min_overlap);

// How the edges are cut before scoring. Indels drops only leading/trailing
// insertions and deletions of the edit script; Core first narrows both windows
// to their best local alignment (+1 match, -2 any edit), which also cuts edges
// dominated by substitutions, then scripts that core.
enum class Trim { Indels, Core };

// Aligns an ASR window with a reference window, trims the edges and accepts
// when the normalized distance of what remains is within the threshold.
// Offsets place the returned ranges in the full sequences.
std::optional<MatchSpan> refine_candidate(std::span<const Token> asr_window, std::size_t asr_offset,
                                          std::span<const Token> ref_window, std::size_t ref_offset,
                                          double threshold, Phase phase, const Vocabulary* vocab = nullptr,
                                          std::size_t short_span_tokens = 5, Trim trim = Trim::Core);

// Normalized distance used for acceptance: token level, or character level for
// spans shorter than short_span_tokens when a vocabulary is available.
double normalized_distance(const MatchSpan& span, std::span<const Token> asr, std::span<const Token> ref,
                           const Vocabulary* vocab, std::size_t short_span_tokens);

// Forces alignments in ASR gaps flanked by two spans whose reference ranges are
// ordered. The flanking spans anchor the gap, so only indels are trimmed. The
// stretches before the first and after the last span are anchored on one side
// only, so they are narrowed to their best local alignment instead. Their
// reference reaches up to the nearest range another span uses.
std::vector<MatchSpan> fill_gaps(std::span<const MatchSpan> spans, std::span<const Token> asr,
                                 std::span<const Token> ref, const MatchParams& params,
                                 const Vocabulary* vocab = nullptr, Phase phase = Phase::GapFill);

struct MatchResult {
    std::vector<MatchSpan> spans;  // sorted by ASR position, non-overlapping in ASR
    CoverageStats coverage;
};

MatchResult match_sequences(std::span<const Token> asr, std::span<const Token> ref, const MatchParams& params = {},
                            const Vocabulary* vocab = nullptr);

}  // namespace longalign::match
