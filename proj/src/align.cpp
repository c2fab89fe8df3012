// SPDX-License-Identifier: Apache-2.0
#include "longalign/align.hpp"

#include <algorithm>

#include "longalign/errors.hpp"
#include "longalign/unicode.hpp"

namespace longalign::align {

namespace {

struct Piece {
    std::size_t asr_begin, asr_end;
    std::size_t ref_begin, ref_end;
};

std::vector<Piece> cut_span(const match::MatchSpan& span, std::size_t piece_tokens) {
    using match::EditOp;
    std::vector<Piece> out;
    Piece cur{span.asr.begin, span.asr.begin, span.ref.begin, span.ref.begin};
    const auto& ops = span.script;
    for (std::size_t k = 0; k < ops.size(); ++k) {
        if (ops[k] != EditOp::Insert) ++cur.asr_end;
        if (ops[k] != EditOp::Delete) ++cur.ref_end;
        const bool cut_here = k + 1 < ops.size() && ops[k] == EditOp::Match && ops[k + 1] == EditOp::Match;
        if (cut_here && cur.ref_end - cur.ref_begin >= piece_tokens) {
            out.push_back(cur);
            cur = {cur.asr_end, cur.asr_end, cur.ref_end, cur.ref_end};
        }
    }
    if (cur.ref_end > cur.ref_begin) out.push_back(cur);
    return out;
}

}  // namespace

std::vector<TokenTiming> align_spans(const ctc::LogitMatrix& logits, std::span<const ctc::TimedWord> asr_words,
                                     std::span<const std::string> ref_tokens,
                                     std::span<const match::MatchSpan> spans, const AlignParams& params) {
    const std::size_t frames = logits.num_frames();
    std::vector<TokenTiming> out;
    for (const auto& span : spans) {
        if (span.asr.end > asr_words.size() || span.ref.end > ref_tokens.size() || span.asr.empty()) {
            throw InconsistentInputs("match span outside the ASR or reference sequence");
        }
        const auto pieces = cut_span(span, std::max<std::size_t>(params.piece_tokens, 1));
        for (std::size_t p = 0; p < pieces.size(); ++p) {
            const auto& piece = pieces[p];
            if (piece.asr_end <= piece.asr_begin) continue;
            const auto& first = asr_words[piece.asr_begin];
            const auto& last = asr_words[piece.asr_end - 1];
            std::size_t f0 = first.start_frame;
            std::size_t f1 = last.end_frame + 1;
            if (p == 0) {
                const std::size_t floor = piece.asr_begin == 0 ? 0 : asr_words[piece.asr_begin - 1].end_frame + 1;
                f0 = std::max(floor, f0 - std::min(f0, params.edge_pad_frames));
            }
            if (p + 1 == pieces.size()) {
                const std::size_t ceil = piece.asr_end < asr_words.size() ? asr_words[piece.asr_end].start_frame : frames;
                f1 = std::min(ceil, f1 + params.edge_pad_frames);
            } else {
                f1 = asr_words[pieces[p + 1].asr_begin].start_frame;
            }
            f1 = std::min(f1, frames);
            if (f1 <= f0) continue;

            std::u32string chars;
            for (std::size_t j = piece.ref_begin; j < piece.ref_end; ++j) {
                if (j > piece.ref_begin) chars.push_back(U' ');
                chars += unicode::decode(ref_tokens[j]);
            }
            const auto slice = logits.slice(f0, f1);
            try {
                const auto path = ctc::force_align(slice, chars, {.optional_edge_delimiters = true});
                const auto words = ctc::word_offsets(path, slice);
                if (words.size() != piece.ref_end - piece.ref_begin) continue;
                for (std::size_t k = 0; k < words.size(); ++k) {
                    out.push_back({piece.ref_begin + k, words[k].start_ms, words[k].end_ms});
                }
            } catch (const TooShortAudio&) {
            } catch (const UnknownSymbol&) {
            }
        }
    }
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.ref_token < b.ref_token; });
    return out;
}

}  // namespace longalign::align
