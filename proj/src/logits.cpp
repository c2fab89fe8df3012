// SPDX-License-Identifier: Apache-2.0
#include "longalign/logits.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "longalign/errors.hpp"

namespace longalign::ctc {

namespace {

constexpr std::uint32_t kVersion = 1;
constexpr std::size_t kHeaderSize = 4 + 5 * 4 + 4 + 8;

template <typename T>
void put(std::string& out, T value) {
    using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
    const U bits = std::bit_cast<U>(value);
    for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

template <typename T>
T get(std::string_view in, std::size_t offset) {
    using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
    U bits = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
        bits |= static_cast<U>(static_cast<unsigned char>(in[offset + i])) << (8 * i);
    }
    return std::bit_cast<T>(bits);
}

}  // namespace

LogitMatrix LogitMatrix::slice(std::size_t begin, std::size_t end) const {
    if (begin > end || end > num_frames()) throw RangeError("logit slice out of range");
    LogitMatrix out;
    out.vocab = vocab;
    out.blank_id = blank_id;
    out.word_delim_id = word_delim_id;
    out.frame_duration_ms = frame_duration_ms;
    out.start_offset_ms = frame_start_ms(begin);
    out.data.assign(data.begin() + static_cast<std::ptrdiff_t>(begin * vocab.size()),
                    data.begin() + static_cast<std::ptrdiff_t>(end * vocab.size()));
    return out;
}

void LogitMatrix::validate(double row_tolerance) const {
    const std::size_t v = vocab.size();
    if (v == 0) throw FormatError("empty vocabulary");
    if (blank_id >= v || word_delim_id >= v) throw FormatError("blank or delimiter id outside vocabulary");
    if (blank_id == word_delim_id) throw FormatError("blank and word delimiter must differ");
    if (!(frame_duration_ms > 0.0f)) throw FormatError("frame duration must be positive");
    if (data.size() % v != 0) throw FormatError("logit data is not a whole number of frames");
    for (std::size_t t = 0; t < num_frames(); ++t) {
        const auto r = row(t);
        double mx = -INFINITY;
        for (float x : r) mx = std::max(mx, static_cast<double>(x));
        double sum = 0;
        for (float x : r) sum += std::exp(static_cast<double>(x) - mx);
        const double lse = mx + std::log(sum);
        if (!(std::abs(lse) <= row_tolerance)) {
            throw FormatError("frame " + std::to_string(t) + " is not a log-distribution (log-sum-exp " +
                              std::to_string(lse) + ")");
        }
    }
}

std::string encode_lgts(const LogitMatrix& m) {
    std::string out = "LGTS";
    put<std::uint32_t>(out, kVersion);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(m.num_frames()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(m.vocab_size()));
    put<std::uint32_t>(out, m.blank_id);
    put<std::uint32_t>(out, m.word_delim_id);
    put<float>(out, m.frame_duration_ms);
    put<double>(out, m.start_offset_ms);
    out.reserve(out.size() + m.data.size() * 4 + 64);
    for (float x : m.data) put<float>(out, x);
    const std::string trailer = nlohmann::json{{"vocab", m.vocab}}.dump();
    out += trailer;
    put<std::uint64_t>(out, trailer.size());
    return out;
}

LogitMatrix decode_lgts(std::string_view in) {
    if (in.size() < kHeaderSize + 8) throw FormatError("LGTS file too short");
    if (in.substr(0, 4) != "LGTS") throw FormatError("bad LGTS magic");
    if (get<std::uint32_t>(in, 4) != kVersion) throw FormatError("unsupported LGTS version");
    const std::uint64_t frames = get<std::uint32_t>(in, 8);
    const std::uint64_t vsize = get<std::uint32_t>(in, 12);
    LogitMatrix m;
    m.blank_id = get<std::uint32_t>(in, 16);
    m.word_delim_id = get<std::uint32_t>(in, 20);
    m.frame_duration_ms = get<float>(in, 24);
    m.start_offset_ms = get<double>(in, 28);

    const std::uint64_t trailer_len = get<std::uint64_t>(in, in.size() - 8);
    const std::uint64_t payload = frames * vsize * 4;
    if (kHeaderSize + payload + trailer_len + 8 != in.size()) throw FormatError("LGTS size does not match header");

    m.data.resize(frames * vsize);
    for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] = get<float>(in, kHeaderSize + 4 * i);

    try {
        const auto j = nlohmann::json::parse(in.substr(kHeaderSize + payload, trailer_len));
        m.vocab = j.at("vocab").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad LGTS trailer: ") + e.what());
    }
    if (m.vocab.size() != vsize) throw FormatError("LGTS trailer vocabulary size does not match header");
    if (m.blank_id >= vsize || m.word_delim_id >= vsize) throw FormatError("LGTS special ids out of range");
    return m;
}

LogitMatrix read_lgts(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return decode_lgts(ss.str());
}

void write_lgts(const std::string& path, const LogitMatrix& m) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + path);
    const auto bytes = encode_lgts(m);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace longalign::ctc
