// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace longalign::match {

// Script turning sequence a into sequence b. Delete drops an element of a,
// Insert adds an element of b.
enum class EditOp : char { Match = 'M', Substitute = 'S', Delete = 'D', Insert = 'I' };

struct EditScript {
    std::size_t distance = 0;
    std::vector<EditOp> ops;
};

std::string to_string(std::span<const EditOp> ops);
std::vector<EditOp> ops_from_string(std::string_view s);

// Unit-cost Levenshtein with a full traceback. Among equal-cost alignments the
// traceback (from the end) prefers match, then substitution, deletion, insertion.
template <typename T>
EditScript levenshtein(std::span<const T> a, std::span<const T> b) {
    const std::size_t n = a.size(), m = b.size();
    const std::size_t w = m + 1;
    std::vector<std::uint32_t> d((n + 1) * w);
    for (std::size_t j = 0; j <= m; ++j) d[j] = static_cast<std::uint32_t>(j);
    for (std::size_t i = 1; i <= n; ++i) {
        d[i * w] = static_cast<std::uint32_t>(i);
        for (std::size_t j = 1; j <= m; ++j) {
            const std::uint32_t diag = d[(i - 1) * w + j - 1] + (a[i - 1] == b[j - 1] ? 0u : 1u);
            d[i * w + j] = std::min({diag, d[(i - 1) * w + j] + 1, d[i * w + j - 1] + 1});
        }
    }
    EditScript out;
    out.distance = d[n * w + m];
    std::size_t i = n, j = m;
    while (i > 0 || j > 0) {
        const std::uint32_t here = d[i * w + j];
        if (i > 0 && j > 0 && a[i - 1] == b[j - 1] && here == d[(i - 1) * w + j - 1]) {
            out.ops.push_back(EditOp::Match);
            --i, --j;
        } else if (i > 0 && j > 0 && here == d[(i - 1) * w + j - 1] + 1) {
            out.ops.push_back(EditOp::Substitute);
            --i, --j;
        } else if (i > 0 && here == d[(i - 1) * w + j] + 1) {
            out.ops.push_back(EditOp::Delete);
            --i;
        } else {
            out.ops.push_back(EditOp::Insert);
            --j;
        }
    }
    std::reverse(out.ops.begin(), out.ops.end());
    return out;
}

// Distance only, linear memory.
template <typename T>
std::size_t levenshtein_distance(std::span<const T> a, std::span<const T> b) {
    std::vector<std::size_t> row(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        std::size_t diag = row[0];
        row[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t up = row[j];
            row[j] = std::min({diag + (a[i - 1] == b[j - 1] ? 0 : 1), up + 1, row[j - 1] + 1});
            diag = up;
        }
    }
    return row[b.size()];
}

// Rebuilds b from a and the script; the inserted and substituted elements come from b.
template <typename T>
std::vector<T> apply_script(std::span<const EditOp> ops, std::span<const T> a, std::span<const T> b) {
    std::vector<T> out;
    std::size_t i = 0, j = 0;
    for (EditOp op : ops) {
        switch (op) {
            case EditOp::Match: out.push_back(a[i]); ++i, ++j; break;
            case EditOp::Substitute: out.push_back(b[j]); ++i, ++j; break;
            case EditOp::Delete: ++i; break;
            case EditOp::Insert: out.push_back(b[j]); ++j; break;
        }
    }
    return out;
}

}  // namespace longalign::match
