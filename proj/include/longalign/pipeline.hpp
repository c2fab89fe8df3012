// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "longalign/align.hpp"
#include "longalign/ctc.hpp"
#include "longalign/filters.hpp"
#include "longalign/matcher.hpp"

namespace longalign::pipeline {

struct PipelineConfig {
    std::filesystem::path logits_dir;
    std::filesystem::path segments_dir;  // optional: <id>.json speech segments
    std::filesystem::path audio_dir;     // optional: <id>.wav for the energy gate
    std::filesystem::path corpus;
    std::filesystem::path norm_config;   // optional: built-in rules when empty
    std::filesystem::path output_dir;
    std::filesystem::path cache_dir;     // defaults to <output_dir>/cache

    int lm_order = 3;
    ctc::BeamOptions beam;
    double vad_threshold_db = -45.0;
    int pair_n = 3;
    double pair_floor = 0.1;
    match::MatchParams match;
    align::AlignParams align;
    filters::Thresholds thresholds;
    double chunk_min_s = 3.0;
    double chunk_max_s = 6.0;

    std::size_t workers = 1;
    bool force = false;

    // Relative paths are resolved against base_dir.
    static PipelineConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
    static PipelineConfig load(const std::filesystem::path& path);
    nlohmann::json to_json() const;

    // Throws ConfigError for missing inputs or out-of-range settings.
    void validate() const;
};

enum class Stage { Decode, Pair, Match, Align, Assemble, Filter, Stats };

std::string_view to_string(Stage s);
Stage stage_from_string(std::string_view s);
const std::vector<Stage>& all_stages();

struct StageReport {
    Stage stage = Stage::Decode;
    std::size_t computed = 0;
    std::size_t reused = 0;
};

// Runs fn(i) for i in [0, n) on `workers` threads. Rethrows the exception of
// the lowest failing index.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

class Pipeline {
public:
    explicit Pipeline(PipelineConfig config);
    ~Pipeline();
    Pipeline(const Pipeline&) = delete;
    Pipeline& operator=(const Pipeline&) = delete;

    // Runs one stage; upstream artifacts must already be cached (MissingUpstream otherwise).
    StageReport run(Stage stage);
    // Runs every stage in order, computing whatever is missing or stale.
    std::vector<StageReport> run_all();

    const PipelineConfig& config() const;

private:
    struct State;
    std::unique_ptr<State> state_;
};

}  // namespace longalign::pipeline
