// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

#include "longalign/segment.hpp"
#include "longalign/wav.hpp"

namespace longalign::vad {

inline constexpr double kDefaultThresholdDb = -45.0;

// 20 log10 of the window RMS; -inf for digital silence. Throws EmptyWindow.
double rms_dbfs(std::span<const float> samples);
double rms_dbfs(std::span<const double> samples);

// Keeps segments whose whole-span RMS is at or above threshold_db, in order.
// Throws SegmentOutOfRange for a segment past the end of the audio.
std::vector<SpeechSegment> filter_segments(std::span<const SpeechSegment> segments, const audio::PcmAudio& audio,
                                           double threshold_db = kDefaultThresholdDb);

}  // namespace longalign::vad
