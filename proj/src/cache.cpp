// SPDX-License-Identifier: Apache-2.0
#include "longalign/cache.hpp"

#include <atomic>
#include <cstdint>
#include <fstream>
#include <sstream>

#include <openssl/evp.h>
#include <unistd.h>

#include "longalign/errors.hpp"

namespace longalign::cache {

namespace {

std::string to_hex(const unsigned char* data, unsigned len) {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned i = 0; i < len; ++i) {
        out.push_back(kDigits[data[i] >> 4]);
        out.push_back(kDigits[data[i] & 0xF]);
    }
    return out;
}

}  // namespace

struct KeyBuilder::Impl {
    EVP_MD_CTX* ctx = nullptr;
};

KeyBuilder::KeyBuilder() : impl_(std::make_unique<Impl>()) {
    impl_->ctx = EVP_MD_CTX_new();
    if (!impl_->ctx || EVP_DigestInit_ex(impl_->ctx, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("cannot initialise SHA-256");
    }
}

KeyBuilder::~KeyBuilder() { EVP_MD_CTX_free(impl_->ctx); }

KeyBuilder& KeyBuilder::add(std::string_view field) {
    unsigned char len[8];
    auto n = static_cast<std::uint64_t>(field.size());
    for (int i = 0; i < 8; ++i) len[i] = static_cast<unsigned char>(n >> (8 * i));
    EVP_DigestUpdate(impl_->ctx, len, sizeof len);
    EVP_DigestUpdate(impl_->ctx, field.data(), field.size());
    return *this;
}

std::string KeyBuilder::hex() {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned len = 0;
    EVP_DigestFinal_ex(impl_->ctx, digest, &len);
    EVP_DigestInit_ex(impl_->ctx, EVP_sha256(), nullptr);
    return to_hex(digest, len);
}

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("SHA-256 failed");
    }
    return to_hex(digest, len);
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_atomic(const std::filesystem::path& path, std::string_view content) {
    static std::atomic<unsigned> counter{0};
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) throw std::runtime_error("short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

Store::Store(std::filesystem::path dir) : dir_(std::move(dir)) { std::filesystem::create_directories(dir_); }

Lookup Store::load(std::string_view name, std::string_view key, nlohmann::json& payload) const {
    const auto path = path_for(name);
    if (!std::filesystem::exists(path)) return Lookup::Miss;
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(read_file(path));
        if (doc.at("key").get<std::string>() != key) return Lookup::Stale;
        if (sha256_hex(doc.at("payload").dump()) != doc.at("checksum").get<std::string>()) return Lookup::Corrupt;
    } catch (const nlohmann::json::exception&) {
        return Lookup::Corrupt;
    }
    payload = std::move(doc.at("payload"));
    return Lookup::Hit;
}

void Store::save(std::string_view name, std::string_view key, const nlohmann::json& payload) const {
    nlohmann::json doc{{"key", key}, {"checksum", sha256_hex(payload.dump())}, {"payload", payload}};
    write_atomic(path_for(name), doc.dump());
}

}  // namespace longalign::cache
