// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace longalign {

// Speech activity interval in milliseconds of the source recording.
struct SpeechSegment {
    double start_ms = 0.0;
    double end_ms = 0.0;

    friend bool operator==(const SpeechSegment&, const SpeechSegment&) = default;
};

// JSON form: [{"start_ms": .., "end_ms": ..}, ...]
std::vector<SpeechSegment> parse_segments(std::string_view json_text);
std::string segments_to_json(const std::vector<SpeechSegment>& segments);

}  // namespace longalign
