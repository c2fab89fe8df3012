// SPDX-License-Identifier: Apache-2.0
// Independent reference implementations used to check the engine. They favour
// obviousness over speed and share no code with the library.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "longalign/ctc.hpp"
#include "longalign/edit_distance.hpp"

namespace oracle {

using Rng = std::mt19937_64;

inline std::size_t uniform(Rng& rng, std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

inline double uniform_real(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

inline std::vector<int> random_tokens(Rng& rng, std::size_t max_len, int alphabet) {
    std::vector<int> out(uniform(rng, 0, max_len));
    for (auto& x : out) x = static_cast<int>(uniform(rng, 0, static_cast<std::size_t>(alphabet - 1)));
    return out;
}

// Textbook full-matrix edit distance.
template <typename T>
std::size_t naive_levenshtein(const std::vector<T>& a, const std::vector<T>& b) {
    std::vector<std::vector<std::size_t>> d(a.size() + 1, std::vector<std::size_t>(b.size() + 1, 0));
    for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
    for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            std::size_t best = d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            if (d[i - 1][j] + 1 < best) best = d[i - 1][j] + 1;
            if (d[i][j - 1] + 1 < best) best = d[i][j - 1] + 1;
            d[i][j] = best;
        }
    }
    return d[a.size()][b.size()];
}

// Replays an edit script; returns its cost, or nullopt when it does not turn a into b.
template <typename T>
std::optional<std::size_t> script_cost(const std::vector<longalign::match::EditOp>& ops, const std::vector<T>& a,
                                       const std::vector<T>& b) {
    using longalign::match::EditOp;
    std::size_t i = 0, j = 0, cost = 0;
    for (EditOp op : ops) {
        switch (op) {
            case EditOp::Match:
                if (i >= a.size() || j >= b.size() || a[i] != b[j]) return std::nullopt;
                ++i, ++j;
                break;
            case EditOp::Substitute:
                if (i >= a.size() || j >= b.size() || a[i] == b[j]) return std::nullopt;
                ++i, ++j, ++cost;
                break;
            case EditOp::Delete:
                if (i >= a.size()) return std::nullopt;
                ++i, ++cost;
                break;
            case EditOp::Insert:
                if (j >= b.size()) return std::nullopt;
                ++j, ++cost;
                break;
        }
    }
    if (i != a.size() || j != b.size()) return std::nullopt;
    return cost;
}

// Random log-softmax matrix over {blank, '|', a, b, ...}.
inline longalign::ctc::LogitMatrix random_logits(Rng& rng, std::size_t frames, std::size_t vocab, double spread = 4.0) {
    longalign::ctc::LogitMatrix m;
    m.vocab = {"<pad>", "|"};
    for (std::size_t v = 2; v < vocab; ++v) m.vocab.push_back(std::string(1, static_cast<char>('a' + v - 2)));
    m.blank_id = 0;
    m.word_delim_id = 1;
    m.frame_duration_ms = 20.0f;
    m.data.resize(frames * vocab);
    for (std::size_t t = 0; t < frames; ++t) {
        std::vector<double> z(vocab);
        for (auto& x : z) x = uniform_real(rng, -spread, spread);
        double mx = *std::max_element(z.begin(), z.end());
        double sum = 0;
        for (double x : z) sum += std::exp(x - mx);
        const double lse = mx + std::log(sum);
        for (std::size_t v = 0; v < vocab; ++v) m.data[t * vocab + v] = static_cast<float>(z[v] - lse);
    }
    return m;
}

// Rows that put probability p on the given label and spread the rest evenly.
inline longalign::ctc::LogitMatrix peaked_logits(const std::vector<std::string>& vocab,
                                                 const std::vector<std::uint32_t>& labels, double p = 0.999) {
    longalign::ctc::LogitMatrix m;
    m.vocab = vocab;
    m.blank_id = 0;
    m.word_delim_id = 1;
    m.frame_duration_ms = 20.0f;
    const double rest = std::log((1.0 - p) / static_cast<double>(vocab.size() - 1));
    for (std::uint32_t l : labels) {
        for (std::uint32_t v = 0; v < vocab.size(); ++v) {
            m.data.push_back(static_cast<float>(v == l ? std::log(p) : rest));
        }
    }
    return m;
}

struct BrutePath {
    double score = -std::numeric_limits<double>::infinity();
    std::vector<std::size_t> states;  // expanded-state index per frame
};

// Best CTC path by enumerating every label sequence over {blank} and the target
// labels. Expanded states number blanks 2k and target k as 2k+1. With
// optional_edges, targets[0] and targets.back() are delimiters that may be
// left out. Ties go to the smallest state sequence read from the last frame.
inline std::optional<BrutePath> brute_force_align(const longalign::ctc::LogitMatrix& m,
                                                  const std::vector<std::uint32_t>& targets, bool optional_edges) {
    std::vector<std::uint32_t> alphabet{m.blank_id};
    for (auto l : targets) {
        if (std::find(alphabet.begin(), alphabet.end(), l) == alphabet.end()) alphabet.push_back(l);
    }
    const std::size_t frames = m.num_frames();
    std::vector<std::pair<std::size_t, std::size_t>> variants{{0, targets.size()}};
    if (optional_edges) {
        variants.push_back({1, targets.size()});
        variants.push_back({0, targets.size() - 1});
        variants.push_back({1, targets.size() - 1});
    }
    std::optional<BrutePath> best;
    std::vector<std::size_t> digits(frames, 0);
    while (true) {
        std::vector<std::uint32_t> seq(frames);
        for (std::size_t t = 0; t < frames; ++t) seq[t] = alphabet[digits[t]];
        std::vector<std::uint32_t> collapsed;
        for (std::size_t t = 0; t < frames; ++t) {
            if (seq[t] == m.blank_id) continue;
            if (t > 0 && seq[t - 1] == seq[t]) continue;
            collapsed.push_back(seq[t]);
        }
        for (auto [lo, hi] : variants) {
            if (collapsed != std::vector<std::uint32_t>(targets.begin() + static_cast<std::ptrdiff_t>(lo),
                                                        targets.begin() + static_cast<std::ptrdiff_t>(hi))) {
                continue;
            }
            BrutePath p;
            p.states.resize(frames);
            std::size_t emitted = lo;
            double score = 0.0;
            for (std::size_t t = 0; t < frames; ++t) {
                if (seq[t] == m.blank_id) {
                    p.states[t] = 2 * emitted;
                } else {
                    if (t == 0 || seq[t - 1] != seq[t]) ++emitted;
                    p.states[t] = 2 * emitted - 1;
                }
                score = t == 0 ? static_cast<double>(m.row(t)[seq[t]]) : score + m.row(t)[seq[t]];
            }
            p.score = score;
            const bool better = !best || p.score > best->score ||
                                (p.score == best->score &&
                                 std::lexicographical_compare(p.states.rbegin(), p.states.rend(),
                                                              best->states.rbegin(), best->states.rend()));
            if (better) best = std::move(p);
            break;
        }
        std::size_t t = 0;
        while (t < frames && ++digits[t] == alphabet.size()) digits[t++] = 0;
        if (t == frames) break;
    }
    return best;
}

// Frame spans of target k (state 2k+1) along a brute-force path.
inline std::vector<std::pair<std::size_t, std::size_t>> target_spans(const BrutePath& p, std::size_t targets) {
    std::vector<std::pair<std::size_t, std::size_t>> out(targets, {SIZE_MAX, 0});
    for (std::size_t t = 0; t < p.states.size(); ++t) {
        if (p.states[t] % 2 == 0) continue;
        auto& s = out[p.states[t] / 2];
        if (s.first == SIZE_MAX) s.first = t;
        s.second = t;
    }
    return out;
}

inline double rms_db(const std::vector<float>& x) {
    long double acc = 0;
    for (float v : x) acc += static_cast<long double>(v) * v;
    return 10.0 * std::log10(static_cast<double>(acc / x.size()));
}

inline std::vector<float> sine(double amplitude, double freq_hz, unsigned rate, std::size_t samples) {
    std::vector<float> out(samples);
    const double pi = std::acos(-1.0);
    for (std::size_t i = 0; i < samples; ++i) {
        out[i] = static_cast<float>(amplitude * std::sin(2.0 * pi * freq_hz * static_cast<double>(i) / rate));
    }
    return out;
}

}  // namespace oracle
