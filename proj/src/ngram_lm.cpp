// SPDX-License-Identifier: Apache-2.0
#include "longalign/ngram_lm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "longalign/errors.hpp"

namespace longalign::lm {

NgramKey::NgramKey(std::span<const WordId> words) {
    if (words.size() > static_cast<std::size_t>(kMaxOrder)) throw ConfigError("n-gram longer than supported order");
    std::copy(words.begin(), words.end(), ids.begin());
    size = static_cast<std::uint8_t>(words.size());
}

std::size_t NgramKeyHash::operator()(const NgramKey& k) const noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL ^ k.size;
    for (std::size_t i = 0; i < k.size; ++i) {
        h ^= k.ids[i] + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
        h *= 0x100000001b3ULL;
    }
    return static_cast<std::size_t>(h);
}

ArpaModel::ArpaModel(int order) : order_(order), tables_(static_cast<std::size_t>(order)) {
    if (order < 1 || order > kMaxOrder) throw ConfigError("unsupported n-gram order " + std::to_string(order));
    unk_ = add_word(kUnknown);
    bos_ = add_word(kSentenceBegin);
    eos_ = add_word(kSentenceEnd);
}

std::optional<WordId> ArpaModel::find(std::string_view word) const {
    if (auto it = index_.find(std::string(word)); it != index_.end()) return it->second;
    return std::nullopt;
}

WordId ArpaModel::id_or_unknown(std::string_view word) const { return find(word).value_or(unk_); }

WordId ArpaModel::add_word(std::string_view word) {
    auto [it, inserted] = index_.try_emplace(std::string(word), static_cast<WordId>(vocab_.size()));
    if (inserted) vocab_.emplace_back(word);
    return it->second;
}

void ArpaModel::set(std::span<const WordId> ngram, NgramEntry entry) {
    if (ngram.empty() || ngram.size() > static_cast<std::size_t>(order_)) {
        throw ConfigError("n-gram of length " + std::to_string(ngram.size()) + " in order-" + std::to_string(order_) +
                          " model");
    }
    tables_[ngram.size() - 1][NgramKey(ngram)] = entry;
}

const NgramEntry* ArpaModel::lookup(std::span<const WordId> ngram) const {
    if (ngram.empty() || ngram.size() > static_cast<std::size_t>(order_)) return nullptr;
    const auto& table = tables_[ngram.size() - 1];
    auto it = table.find(NgramKey(ngram));
    return it == table.end() ? nullptr : &it->second;
}

double ArpaModel::log10_prob(std::span<const WordId> context, WordId word) const {
    const std::size_t max_ctx = static_cast<std::size_t>(order_ - 1);
    if (context.size() > max_ctx) context = context.subspan(context.size() - max_ctx);

    std::array<WordId, kMaxOrder> buf{};
    double backoff = 0.0;
    for (std::size_t skip = 0;; ++skip) {
        const auto ctx = context.subspan(skip);
        std::copy(ctx.begin(), ctx.end(), buf.begin());
        buf[ctx.size()] = word;
        if (const auto* e = lookup(std::span<const WordId>(buf.data(), ctx.size() + 1))) {
            return backoff + e->log10_prob;
        }
        if (ctx.empty()) return backoff + kLogZero;
        if (const auto* c = lookup(ctx)) backoff += c->log10_backoff;
    }
}

namespace {

using Counts = std::vector<std::map<std::vector<WordId>, double>>;

std::vector<std::string> split_ws(std::string_view line) {
    std::vector<std::string> out;
    std::istringstream ss{std::string(line)};
    std::string tok;
    while (ss >> tok) out.push_back(tok);
    return out;
}

double safe_log10(double p) { return p > 0.0 ? std::log10(p) : kLogZero; }

}  // namespace

ArpaModel train(std::span<const std::string> sentences, const TrainOptions& options) {
    const int order = options.order;
    if (sentences.empty()) throw DegenerateCorpus("empty training corpus");
    if (!options.discounts.empty() && options.discounts.size() != static_cast<std::size_t>(order)) {
        throw ConfigError("expected one discount per order");
    }
    ArpaModel model(order);
    const WordId bos = model.sentence_begin();

    // Raw counts of every k-gram in the padded sentences.
    Counts raw(static_cast<std::size_t>(order));
    for (const auto& line : sentences) {
        std::vector<WordId> padded{bos};
        for (const auto& tok : split_ws(line)) {
            if (tok == kSentenceBegin || tok == kSentenceEnd) continue;
            padded.push_back(model.add_word(tok));
        }
        padded.push_back(model.sentence_end());
        for (int k = 1; k <= order; ++k) {
            for (std::size_t i = 0; i + static_cast<std::size_t>(k) <= padded.size(); ++i) {
                if (k == 1 && padded[i] == bos) continue;
                std::vector<WordId> g(padded.begin() + static_cast<std::ptrdiff_t>(i),
                                      padded.begin() + static_cast<std::ptrdiff_t>(i) + k);
                raw[static_cast<std::size_t>(k - 1)][g] += 1.0;
            }
        }
    }

    // Adjusted counts: continuation counts below the top order, except for
    // n-grams anchored at <s>, which cannot be extended to the left.
    Counts adjusted(static_cast<std::size_t>(order));
    adjusted[static_cast<std::size_t>(order - 1)] = raw[static_cast<std::size_t>(order - 1)];
    for (int k = order - 1; k >= 1; --k) {
        auto& adj = adjusted[static_cast<std::size_t>(k - 1)];
        for (const auto& [g, c] : raw[static_cast<std::size_t>(k - 1)]) {
            if (g.front() == bos) adj[g] = c;
        }
        for (const auto& [g, c] : raw[static_cast<std::size_t>(k)]) {
            std::vector<WordId> suffix(g.begin() + 1, g.end());
            if (suffix.front() == bos) continue;
            adj[suffix] += 1.0;
        }
    }

    std::vector<double> discount(static_cast<std::size_t>(order));
    for (int k = 1; k <= order; ++k) {
        if (!options.discounts.empty()) {
            discount[static_cast<std::size_t>(k - 1)] = options.discounts[static_cast<std::size_t>(k - 1)];
            continue;
        }
        double n1 = 0, n2 = 0;
        for (const auto& [g, c] : adjusted[static_cast<std::size_t>(k - 1)]) {
            if (c == 1.0) n1 += 1;
            if (c == 2.0) n2 += 1;
        }
        if (n1 + 2 * n2 == 0) {
            throw DegenerateCorpus("cannot estimate order-" + std::to_string(k) +
                                   " discount: no n-grams seen once or twice");
        }
        discount[static_cast<std::size_t>(k - 1)] = n1 / (n1 + 2 * n2);
    }
    for (double d : discount) {
        if (!(d >= 0.0 && d <= 1.0)) throw ConfigError("discounts must lie in [0, 1]");
    }

    // Per-context totals and type counts at each order.
    struct ContextStats {
        double total = 0;
        double types = 0;
    };
    std::vector<std::map<std::vector<WordId>, ContextStats>> ctx(static_cast<std::size_t>(order));
    for (int k = 1; k <= order; ++k) {
        for (const auto& [g, c] : adjusted[static_cast<std::size_t>(k - 1)]) {
            std::vector<WordId> h(g.begin(), g.end() - 1);
            auto& st = ctx[static_cast<std::size_t>(k - 1)][h];
            st.total += c;
            st.types += 1;
        }
    }

    const double predicted_vocab = static_cast<double>(model.vocab().size() - 1);  // all but <s>

    // Interpolated probability of word after context h (|h| < k).
    auto prob = [&](auto&& self, std::span<const WordId> h, WordId w) -> double {
        const std::size_t k = h.size() + 1;
        const double d = discount[k - 1];
        double lower = 0;
        if (h.empty()) {
            if (w == bos) return 0.0;
            lower = 1.0 / predicted_vocab;
        } else {
            lower = self(self, h.subspan(1), w);
        }
        const auto& stats = ctx[k - 1];
        auto it = stats.find(std::vector<WordId>(h.begin(), h.end()));
        if (it == stats.end() || it->second.total == 0) return lower;
        std::vector<WordId> g(h.begin(), h.end());
        g.push_back(w);
        const auto& adj = adjusted[k - 1];
        auto c = adj.find(g);
        const double count = c == adj.end() ? 0.0 : c->second;
        return std::max(count - d, 0.0) / it->second.total + d * it->second.types / it->second.total * lower;
    };

    for (WordId w = 0; w < model.vocab().size(); ++w) {
        model.set(std::span<const WordId>(&w, 1), {safe_log10(prob(prob, {}, w)), 0.0});
    }
    for (int k = 2; k <= order; ++k) {
        for (const auto& [g, c] : adjusted[static_cast<std::size_t>(k - 1)]) {
            std::span<const WordId> gs(g);
            model.set(gs, {safe_log10(prob(prob, gs.first(gs.size() - 1), gs.back())), 0.0});
        }
    }
    // Back-off weight of context h at order k+1 is the interpolation mass D * types / total.
    for (int k = 1; k < order; ++k) {
        for (const auto& [h, st] : ctx[static_cast<std::size_t>(k)]) {
            const auto* e = model.lookup(h);
            if (e == nullptr) continue;
            NgramEntry updated = *e;
            updated.log10_backoff = safe_log10(discount[static_cast<std::size_t>(k)] * st.types / st.total);
            model.set(h, updated);
        }
    }
    return model;
}

double logprob(const ArpaModel& model, std::span<const std::string> context, std::string_view word) {
    std::vector<WordId> ids;
    ids.reserve(context.size());
    for (const auto& w : context) ids.push_back(model.id_or_unknown(w));
    return model.log10_prob(ids, model.id_or_unknown(word));
}

std::string write_arpa(const ArpaModel& model) {
    const auto& vocab = model.vocab();
    std::string out = "\\data\\\n";
    for (int k = 1; k <= model.order(); ++k) {
        out += "ngram " + std::to_string(k) + "=" + std::to_string(model.entries(k).size()) + "\n";
    }
    char buf[64];
    for (int k = 1; k <= model.order(); ++k) {
        out += "\n\\" + std::to_string(k) + "-grams:\n";
        std::vector<std::pair<std::vector<std::string>, NgramEntry>> rows;
        for (const auto& [key, e] : model.entries(k)) {
            std::vector<std::string> words;
            for (WordId id : key.words()) words.push_back(vocab[id]);
            rows.emplace_back(std::move(words), e);
        }
        if (k == 1) {
            std::sort(rows.begin(), rows.end(), [&](const auto& a, const auto& b) {
                return *model.find(a.first[0]) < *model.find(b.first[0]);
            });
        } else {
            std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        }
        for (const auto& [words, e] : rows) {
            std::snprintf(buf, sizeof buf, "%.6f", std::max(e.log10_prob, kLogZero));
            out += buf;
            out += '\t';
            for (std::size_t i = 0; i < words.size(); ++i) {
                if (i) out += ' ';
                out += words[i];
            }
            if (k < model.order()) {
                std::snprintf(buf, sizeof buf, "\t%.6f", std::max(e.log10_backoff, kLogZero));
                out += buf;
            }
            out += '\n';
        }
    }
    out += "\n\\end\\\n";
    return out;
}

ArpaModel read_arpa(std::string_view text) {
    std::vector<std::string_view> lines;
    for (std::size_t pos = 0; pos <= text.size();) {
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        std::string_view line = text.substr(pos, nl - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.push_back(line);
        pos = nl + 1;
    }

    std::size_t i = 0;
    auto blank = [](std::string_view l) { return l.find_first_not_of(" \t") == std::string_view::npos; };
    while (i < lines.size() && blank(lines[i])) ++i;
    if (i == lines.size() || lines[i] != "\\data\\") throw ParseError(i + 1, "expected \\data\\");
    ++i;

    std::vector<std::size_t> counts;
    for (; i < lines.size() && !blank(lines[i]); ++i) {
        const auto l = lines[i];
        const auto eq = l.find('=');
        if (l.rfind("ngram ", 0) != 0 || eq == std::string_view::npos) throw ParseError(i + 1, "bad ngram count line");
        int k = 0;
        std::size_t count = 0;
        try {
            k = std::stoi(std::string(l.substr(6, eq - 6)));
            count = std::stoul(std::string(l.substr(eq + 1)));
        } catch (const std::exception&) {
            throw ParseError(i + 1, "malformed ngram count");
        }
        if (k != static_cast<int>(counts.size()) + 1) throw ParseError(i + 1, "ngram orders must be listed in order");
        counts.push_back(count);
    }
    if (counts.empty()) throw ParseError(i + 1, "no ngram counts in \\data\\ section");
    const int order = static_cast<int>(counts.size());
    if (order > kMaxOrder) throw ParseError(i + 1, "order exceeds supported maximum");

    ArpaModel model(order);
    bool saw_end = false;
    for (int k = 1; k <= order; ++k) {
        while (i < lines.size() && blank(lines[i])) ++i;
        const std::string header = "\\" + std::to_string(k) + "-grams:";
        if (i == lines.size() || lines[i] != header) throw ParseError(i + 1, "expected " + header);
        ++i;
        std::size_t seen = 0;
        for (; i < lines.size() && !blank(lines[i]); ++i) {
            if (lines[i].front() == '\\') break;
            const auto fields = split_ws(lines[i]);
            const std::size_t n = static_cast<std::size_t>(k);
            if (fields.size() != n + 1 && fields.size() != n + 2) throw ParseError(i + 1, "wrong field count");
            NgramEntry e;
            std::vector<WordId> ids;
            try {
                e.log10_prob = std::stod(fields[0]);
                if (fields.size() == n + 2) e.log10_backoff = std::stod(fields[n + 1]);
            } catch (const std::exception&) {
                throw ParseError(i + 1, "malformed number");
            }
            for (std::size_t w = 1; w <= n; ++w) ids.push_back(model.add_word(fields[w]));
            model.set(ids, e);
            ++seen;
        }
        if (seen != counts[static_cast<std::size_t>(k - 1)]) {
            throw ParseError(i + 1, "section " + header + " has " + std::to_string(seen) + " entries, header says " +
                                        std::to_string(counts[static_cast<std::size_t>(k - 1)]));
        }
    }
    while (i < lines.size() && blank(lines[i])) ++i;
    if (i < lines.size() && lines[i] == "\\end\\") saw_end = true;
    if (!saw_end) throw ParseError(i + 1, "missing \\end\\");
    return model;
}

}  // namespace longalign::lm
