// SPDX-License-Identifier: Apache-2.0
#include "longalign/vad.hpp"

#include <cmath>
#include <limits>

#include <json.hpp>

#include "longalign/errors.hpp"

namespace longalign {

std::vector<SpeechSegment> parse_segments(std::string_view json_text) {
    std::vector<SpeechSegment> out;
    try {
        for (const auto& s : nlohmann::json::parse(json_text)) {
            out.push_back({s.at("start_ms").get<double>(), s.at("end_ms").get<double>()});
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad segment list: ") + e.what());
    }
    for (const auto& s : out) {
        if (!(s.end_ms > s.start_ms) || s.start_ms < 0) throw InvalidSegment("segment must satisfy 0 <= start < end");
    }
    return out;
}

std::string segments_to_json(const std::vector<SpeechSegment>& segments) {
    auto arr = nlohmann::json::array();
    for (const auto& s : segments) arr.push_back({{"start_ms", s.start_ms}, {"end_ms", s.end_ms}});
    return arr.dump();
}

namespace vad {

// Float32 samples carry about 1e-7 relative error, which moves the RMS of a
// window built exactly on the threshold by up to ~1e-6 dB.
constexpr double kThresholdSlackDb = 1e-6;

namespace {

template <typename T>
double rms_dbfs_impl(std::span<const T> samples) {
    if (samples.empty()) throw EmptyWindow("RMS of an empty window");
    double sum = 0.0;
    for (T x : samples) sum += static_cast<double>(x) * static_cast<double>(x);
    const double mean = sum / static_cast<double>(samples.size());
    if (mean == 0.0) return -std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(mean);
}

}  // namespace

double rms_dbfs(std::span<const float> samples) { return rms_dbfs_impl(samples); }
double rms_dbfs(std::span<const double> samples) { return rms_dbfs_impl(samples); }

std::vector<SpeechSegment> filter_segments(std::span<const SpeechSegment> segments, const audio::PcmAudio& audio,
                                           double threshold_db) {
    std::vector<SpeechSegment> kept;
    const double rate = audio.sample_rate;
    for (const auto& seg : segments) {
        if (!(seg.end_ms > seg.start_ms) || seg.start_ms < 0) throw InvalidSegment("segment must satisfy 0 <= start < end");
        const auto begin = static_cast<std::size_t>(std::floor(seg.start_ms * rate / 1000.0 + 1e-9));
        const auto end = static_cast<std::size_t>(std::ceil(seg.end_ms * rate / 1000.0 - 1e-9));
        if (end > audio.samples.size()) {
            throw SegmentOutOfRange("segment ends at " + std::to_string(seg.end_ms) + " ms, audio lasts " +
                                    std::to_string(audio.duration_ms()) + " ms");
        }
        if (end <= begin) continue;
        const double db = rms_dbfs(std::span<const float>(audio.samples).subspan(begin, end - begin));
        if (db >= threshold_db - kThresholdSlackDb) kept.push_back(seg);
    }
    return kept;
}

}  // namespace vad
}  // namespace longalign
