// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

namespace longalign::cache {

std::string sha256_hex(std::string_view data);

// Incremental SHA-256 over length-prefixed fields, so ("ab","c") and ("a","bc") differ.
class KeyBuilder {
public:
    KeyBuilder();
    ~KeyBuilder();
    KeyBuilder(const KeyBuilder&) = delete;
    KeyBuilder& operator=(const KeyBuilder&) = delete;

    KeyBuilder& add(std::string_view field);
    KeyBuilder& add_json(const nlohmann::json& field) { return add(field.dump()); }
    std::string hex();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

std::string read_file(const std::filesystem::path& path);

// Writes to a temporary sibling and renames it over the target.
void write_atomic(const std::filesystem::path& path, std::string_view content);

enum class Lookup { Hit, Miss, Stale, Corrupt };

// Artifacts are JSON documents {"key", "checksum", "payload"} stored under a
// directory. A key mismatch means the inputs changed; a checksum mismatch means
// the file was damaged. Both are reported so the caller recomputes.
class Store {
public:
    explicit Store(std::filesystem::path dir);

    const std::filesystem::path& dir() const { return dir_; }
    std::filesystem::path path_for(std::string_view name) const { return dir_ / std::string(name); }

    Lookup load(std::string_view name, std::string_view key, nlohmann::json& payload) const;
    void save(std::string_view name, std::string_view key, const nlohmann::json& payload) const;

private:
    std::filesystem::path dir_;
};

}  // namespace longalign::cache
