// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace longalign::audio {

// Mono PCM normalized to [-1, 1].
struct PcmAudio {
    std::vector<float> samples;
    unsigned sample_rate = 16000;

    double duration_ms() const { return 1000.0 * static_cast<double>(samples.size()) / sample_rate; }
};

// Reads RIFF/WAVE with 16-bit integer or 32-bit float mono samples.
PcmAudio decode_wav(std::string_view bytes);
PcmAudio read_wav(const std::string& path);

enum class SampleFormat { Int16, Float32 };
std::string encode_wav(const PcmAudio& audio, SampleFormat format);
void write_wav(const std::string& path, const PcmAudio& audio, SampleFormat format);

}  // namespace longalign::audio
