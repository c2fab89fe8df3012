// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace longalign::ctc {

// Per-frame natural-log probabilities over a character vocabulary.
struct LogitMatrix {
    std::vector<std::string> vocab;
    std::vector<float> data;  // frames x vocab, row-major
    std::uint32_t blank_id = 0;
    std::uint32_t word_delim_id = 1;
    float frame_duration_ms = 20.0f;
    double start_offset_ms = 0.0;

    std::size_t num_frames() const { return vocab.empty() ? 0 : data.size() / vocab.size(); }
    std::size_t vocab_size() const { return vocab.size(); }
    std::span<const float> row(std::size_t t) const {
        return {data.data() + t * vocab.size(), vocab.size()};
    }

    double frame_start_ms(std::size_t t) const { return start_offset_ms + static_cast<double>(t) * frame_duration_ms; }
    double end_ms() const { return frame_start_ms(num_frames()); }

    // Frames [begin, end) as a standalone matrix with the offset shifted.
    LogitMatrix slice(std::size_t begin, std::size_t end) const;

    // Throws FormatError unless ids, duration and every row's log-sum-exp are valid.
    void validate(double row_tolerance = 1e-3) const;
};

// LGTS container: "LGTS", u32 version, u32 T, u32 V, u32 blank, u32 delimiter,
// f32 frame ms, f64 start offset ms, T*V f32, JSON trailer, u64 trailer length.
// All integers and floats little-endian.
std::string encode_lgts(const LogitMatrix& m);
LogitMatrix decode_lgts(std::string_view bytes);

LogitMatrix read_lgts(const std::string& path);
void write_lgts(const std::string& path, const LogitMatrix& m);

}  // namespace longalign::ctc
