// SPDX-License-Identifier: Apache-2.0
#include "longalign/wav.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>

#include "longalign/errors.hpp"

namespace longalign::audio {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint32_t u32(std::string_view b, std::size_t o) {
    return static_cast<std::uint32_t>(static_cast<unsigned char>(b[o])) |
           static_cast<std::uint32_t>(static_cast<unsigned char>(b[o + 1])) << 8 |
           static_cast<std::uint32_t>(static_cast<unsigned char>(b[o + 2])) << 16 |
           static_cast<std::uint32_t>(static_cast<unsigned char>(b[o + 3])) << 24;
}

std::uint16_t u16(std::string_view b, std::size_t o) {
    return static_cast<std::uint16_t>(static_cast<unsigned char>(b[o]) | static_cast<unsigned char>(b[o + 1]) << 8);
}

void put32(std::string& s, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put16(std::string& s, std::uint16_t v) {
    s.push_back(static_cast<char>(v & 0xFF));
    s.push_back(static_cast<char>(v >> 8));
}

}  // namespace

PcmAudio decode_wav(std::string_view b) {
    if (b.size() < 12 || b.substr(0, 4) != "RIFF" || b.substr(8, 4) != "WAVE") throw FormatError("not a RIFF/WAVE file");
    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t rate = 0;
    bool have_fmt = false;
    std::size_t pos = 12;
    while (pos + 8 <= b.size()) {
        const auto id = b.substr(pos, 4);
        const std::uint32_t size = u32(b, pos + 4);
        const std::size_t body = pos + 8;
        if (body + size > b.size()) throw FormatError("truncated WAV chunk");
        if (id == "fmt ") {
            if (size < 16) throw FormatError("short fmt chunk");
            format = u16(b, body);
            channels = u16(b, body + 2);
            rate = u32(b, body + 4);
            bits = u16(b, body + 14);
            if (format == kFormatExtensible && size >= 26) format = u16(b, body + 24);
            have_fmt = true;
        } else if (id == "data") {
            if (!have_fmt) throw FormatError("WAV data chunk before fmt chunk");
            if (channels != 1) throw FormatError("only mono WAV is supported");
            PcmAudio out;
            out.sample_rate = rate;
            if (format == kFormatPcm && bits == 16) {
                out.samples.resize(size / 2);
                for (std::size_t i = 0; i < out.samples.size(); ++i) {
                    out.samples[i] = static_cast<float>(static_cast<std::int16_t>(u16(b, body + 2 * i))) / 32768.0f;
                }
            } else if (format == kFormatFloat && bits == 32) {
                out.samples.resize(size / 4);
                for (std::size_t i = 0; i < out.samples.size(); ++i) {
                    out.samples[i] = std::bit_cast<float>(u32(b, body + 4 * i));
                }
            } else {
                throw FormatError("unsupported WAV sample format (need 16-bit PCM or 32-bit float)");
            }
            return out;
        }
        pos = body + size + (size & 1);
    }
    throw FormatError("WAV file has no data chunk");
}

PcmAudio read_wav(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return decode_wav(ss.str());
}

std::string encode_wav(const PcmAudio& audio, SampleFormat format) {
    const std::uint16_t bits = format == SampleFormat::Int16 ? 16 : 32;
    const std::uint32_t data_size = static_cast<std::uint32_t>(audio.samples.size() * (bits / 8));
    std::string s = "RIFF";
    put32(s, 36 + data_size);
    s += "WAVEfmt ";
    put32(s, 16);
    put16(s, format == SampleFormat::Int16 ? kFormatPcm : kFormatFloat);
    put16(s, 1);
    put32(s, audio.sample_rate);
    put32(s, audio.sample_rate * (bits / 8));
    put16(s, bits / 8);
    put16(s, bits);
    s += "data";
    put32(s, data_size);
    for (float x : audio.samples) {
        if (format == SampleFormat::Int16) {
            const float c = std::clamp(x, -1.0f, 32767.0f / 32768.0f);
            put16(s, static_cast<std::uint16_t>(static_cast<std::int16_t>(std::lround(c * 32768.0f))));
        } else {
            put32(s, std::bit_cast<std::uint32_t>(x));
        }
    }
    return s;
}

void write_wav(const std::string& path, const PcmAudio& audio, SampleFormat format) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + path);
    const auto bytes = encode_wav(audio, format);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace longalign::audio
