// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace longalign::lm {

using WordId = std::uint32_t;

inline constexpr std::string_view kSentenceBegin = "<s>";
inline constexpr std::string_view kSentenceEnd = "</s>";
inline constexpr std::string_view kUnknown = "<unk>";
inline constexpr int kMaxOrder = 6;
// Log10 probability written for events with zero mass (ARPA convention).
inline constexpr double kLogZero = -99.0;

struct NgramEntry {
    double log10_prob = 0.0;
    double log10_backoff = 0.0;
};

struct NgramKey {
    std::array<WordId, kMaxOrder> ids{};
    std::uint8_t size = 0;

    NgramKey() = default;
    explicit NgramKey(std::span<const WordId> words);

    std::span<const WordId> words() const { return {ids.data(), size}; }
    friend bool operator==(const NgramKey&, const NgramKey&) = default;
};

struct NgramKeyHash {
    std::size_t operator()(const NgramKey& k) const noexcept;
};

using NgramTable = std::unordered_map<NgramKey, NgramEntry, NgramKeyHash>;

// Back-off n-gram model in ARPA semantics. Immutable once built; safe to share
// across threads.
class ArpaModel {
public:
    explicit ArpaModel(int order);

    int order() const { return order_; }
    const std::vector<std::string>& vocab() const { return vocab_; }
    std::optional<WordId> find(std::string_view word) const;
    WordId id_or_unknown(std::string_view word) const;
    WordId sentence_begin() const { return bos_; }
    WordId sentence_end() const { return eos_; }
    WordId unknown() const { return unk_; }

    // Adds a word to the vocabulary (idempotent) and returns its id.
    WordId add_word(std::string_view word);
    void set(std::span<const WordId> ngram, NgramEntry entry);
    const NgramEntry* lookup(std::span<const WordId> ngram) const;
    // Entries of order k, 1-based.
    const NgramTable& entries(int k) const { return tables_.at(static_cast<std::size_t>(k - 1)); }

    // Standard back-off evaluation. The context is truncated to order-1 words.
    double log10_prob(std::span<const WordId> context, WordId word) const;

private:
    int order_;
    std::vector<std::string> vocab_;
    std::unordered_map<std::string, WordId> index_;
    std::vector<NgramTable> tables_;
    WordId bos_ = 0;
    WordId eos_ = 0;
    WordId unk_ = 0;
};

struct TrainOptions {
    int order = 3;
    // One discount per order (index 0 = unigrams). Empty means estimate each
    // as n1 / (n1 + 2 n2) from the count-of-counts of that order.
    std::vector<double> discounts;
};

// Interpolated Kneser-Ney with a single discount per order. Each sentence is a
// line of whitespace-separated tokens; sentence markers are added implicitly.
// Throws DegenerateCorpus when a discount cannot be estimated.
ArpaModel train(std::span<const std::string> sentences, const TrainOptions& options = {});

// String front end for ArpaModel::log10_prob; unknown words map to <unk>.
double logprob(const ArpaModel& model, std::span<const std::string> context, std::string_view word);

std::string write_arpa(const ArpaModel& model);
// Throws ParseError carrying the line number on malformed input.
ArpaModel read_arpa(std::string_view text);

}  // namespace longalign::lm
