// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "longalign/cache.hpp"
#include "longalign/corpus.hpp"
#include "longalign/errors.hpp"
#include "longalign/pipeline.hpp"
#include "longalign/synth.hpp"

using namespace longalign;
namespace fs = std::filesystem;
using pipeline::Stage;

namespace {

fs::path fresh_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("longalign_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write_text(const fs::path& p, const std::string& s) {
    std::ofstream out(p, std::ios::binary);
    out << s;
}

// A small generated corpus shared by the pipeline tests.
const fs::path& small_corpus() {
    static const fs::path dir = [] {
        const auto d = fresh_dir("corpus");
        synth::SynthOptions o;
        o.speeches = 24;
        o.files = 2;
        synth::generate(o, d);
        return d;
    }();
    return dir;
}

pipeline::PipelineConfig config_for(const std::string& out_name, std::size_t workers = 1) {
    auto cfg = pipeline::PipelineConfig::load(small_corpus() / "config.json");
    cfg.output_dir = fresh_dir(out_name);
    cfg.cache_dir.clear();
    cfg.workers = workers;
    return cfg;
}

std::size_t computed(const std::vector<pipeline::StageReport>& reports, Stage s) {
    for (const auto& r : reports) {
        if (r.stage == s) return r.computed;
    }
    return 0;
}

std::size_t total_computed(const std::vector<pipeline::StageReport>& reports) {
    std::size_t n = 0;
    for (const auto& r : reports) n += r.computed;
    return n;
}

}  // namespace

TEST_CASE("SHA-256 and field keys") {
    CHECK(cache::sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    cache::KeyBuilder a, b;
    a.add("ab").add("c");
    b.add("a").add("bc");
    const auto ka = a.hex();
    CHECK(ka.size() == 64);
    CHECK(ka != b.hex());
    cache::KeyBuilder c;
    c.add("ab").add("c");
    CHECK(c.hex() == ka);
}

TEST_CASE("artifact store reports hits, misses, stale and damaged files") {
    const auto dir = fresh_dir("store");
    cache::Store store(dir);
    nlohmann::json payload;
    CHECK(store.load("x.json", "k1", payload) == cache::Lookup::Miss);
    store.save("sub/x.json", "k1", {{"v", 1}});
    CHECK(store.load("sub/x.json", "k1", payload) == cache::Lookup::Hit);
    CHECK(payload.at("v") == 1);
    CHECK(store.load("sub/x.json", "k2", payload) == cache::Lookup::Stale);

    auto doc = nlohmann::json::parse(cache::read_file(store.path_for("sub/x.json")));
    doc["payload"]["v"] = 2;
    write_text(store.path_for("sub/x.json"), doc.dump());
    CHECK(store.load("sub/x.json", "k1", payload) == cache::Lookup::Corrupt);
    write_text(store.path_for("sub/x.json"), "{trunc");
    CHECK(store.load("sub/x.json", "k1", payload) == cache::Lookup::Corrupt);

    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        CHECK(e.path().filename().string().find(".tmp") == std::string::npos);
    }
}

TEST_CASE("atomic writes replace whole files") {
    const auto dir = fresh_dir("atomic");
    const auto p = dir / "a.txt";
    cache::write_atomic(p, "first");
    cache::write_atomic(p, "second");
    CHECK(cache::read_file(p) == "second");
    std::size_t files = 0;
    for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir)) ++files;
    CHECK(files == 1);
    CHECK_THROWS_AS(cache::read_file(dir / "missing"), FormatError);
}

TEST_CASE("corpus JSONL") {
    const std::string good =
        R"({"speech_id":"a","section_id":"s","date":"2020-01-01","text":"Dobar dan. Hvala.","sentences":[[0,10],[11,17]],"speaker":{"name":"X"}})"
        "\n\n"
        R"({"speech_id":"b","section_id":"s","date":"2020-01-01","text":"Bez granica."})"
        "\n";
    const auto speeches = corpus::parse_jsonl(good);
    REQUIRE(speeches.size() == 2);
    CHECK(speeches[0].sentences.size() == 2);
    CHECK(speeches[0].speaker.at("name") == "X");
    CHECK(speeches[1].sentences.empty());
    CHECK(corpus::parse_jsonl(corpus::to_jsonl(speeches)).size() == 2);

    try {
        corpus::parse_jsonl(good + R"({"speech_id":"a","section_id":"s","date":"","text":"x"})" + "\n");
        FAIL("duplicate accepted");
    } catch (const ParseError& e) {
        CHECK(e.line() == 4);
    }
    CHECK_THROWS_AS(corpus::parse_jsonl(R"({"speech_id":"a","section_id":"s","date":"","text":"ab","sentences":[[0,5]]})"),
                    ParseError);
    CHECK_THROWS_AS(corpus::parse_jsonl("{oops"), ParseError);
    CHECK_THROWS_AS(corpus::read_jsonl("/nonexistent.jsonl"), FormatError);
}

TEST_CASE("parallel_for visits every index and reports the first failure") {
    std::vector<std::atomic<int>> hits(100);
    pipeline::parallel_for(100, 8, [&](std::size_t i) { ++hits[i]; });
    for (const auto& h : hits) CHECK(h == 1);
    try {
        pipeline::parallel_for(50, 4, [](std::size_t i) {
            if (i == 7 || i == 31) throw std::runtime_error("fail " + std::to_string(i));
        });
        FAIL("no exception");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()) == "fail 7");
    }
    pipeline::parallel_for(0, 3, [](std::size_t) { FAIL("called"); });
}

TEST_CASE("pipeline config") {
    const auto dir = small_corpus();
    const auto cfg = pipeline::PipelineConfig::load(dir / "config.json");
    CHECK(cfg.corpus.is_absolute());
    CHECK(fs::exists(cfg.corpus));
    CHECK(cfg.logits_dir == dir / "logits");
    CHECK_NOTHROW(cfg.validate());
    const auto again = pipeline::PipelineConfig::from_json(cfg.to_json());
    CHECK(again.to_json() == cfg.to_json());

    auto bad = cfg;
    bad.workers = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.corpus = dir / "missing.jsonl";
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.match.window = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    CHECK_THROWS_AS(pipeline::PipelineConfig::load(dir / "nope.json"), ConfigError);

    CHECK(pipeline::stage_from_string("match") == Stage::Match);
    CHECK_THROWS_AS(pipeline::stage_from_string("mix"), ConfigError);
    CHECK(pipeline::all_stages().size() == 7);
}

TEST_CASE("single stages need their upstream artifacts") {
    auto cfg = config_for("staged");
    pipeline::Pipeline p(cfg);
    CHECK_THROWS_AS(p.run(Stage::Match), MissingUpstream);
    CHECK(p.run(Stage::Decode).computed == 2);
    CHECK(p.run(Stage::Pair).computed == 1);
    CHECK(p.run(Stage::Match).computed == 2);
    CHECK_THROWS_AS(p.run(Stage::Assemble), MissingUpstream);
    CHECK(p.run(Stage::Align).computed == 2);
    CHECK(p.run(Stage::Assemble).computed == 2);
    CHECK(p.run(Stage::Filter).computed == 1);
    CHECK(p.run(Stage::Stats).computed == 1);
    CHECK(fs::exists(cfg.output_dir / "dataset.jsonl"));
    CHECK(fs::exists(cfg.output_dir / "stats.json"));
    CHECK(fs::exists(cfg.output_dir / "chunks.jsonl"));
    CHECK(fs::exists(cfg.output_dir / "records"));

    const auto first = cache::read_file(cfg.output_dir / "dataset.jsonl");
    auto damaged = cfg.cache_dir.empty() ? cfg.output_dir / "cache" : cfg.cache_dir;
    write_text(damaged / "pair.json", "{broken");
    pipeline::Pipeline q(cfg);
    CHECK_THROWS_AS(q.run(Stage::Match), CorruptCache);
    const auto reports = q.run_all();
    CHECK(computed(reports, Stage::Pair) == 1);
    CHECK(computed(reports, Stage::Match) == 0);
    CHECK(cache::read_file(cfg.output_dir / "dataset.jsonl") == first);
}

TEST_CASE("reruns reuse the cache and recompute only what changed") {
    auto cfg = config_for("rerun");
    std::vector<pipeline::StageReport> reports;
    {
        pipeline::Pipeline p(cfg);
        reports = p.run_all();
    }
    CHECK(computed(reports, Stage::Decode) == 2);
    const auto first = cache::read_file(cfg.output_dir / "dataset.jsonl");
    const auto first_stats = cache::read_file(cfg.output_dir / "stats.json");
    {
        pipeline::Pipeline p(cfg);
        reports = p.run_all();
    }
    CHECK(total_computed(reports) == 0);
    CHECK(cache::read_file(cfg.output_dir / "dataset.jsonl") == first);
    CHECK(cache::read_file(cfg.output_dir / "stats.json") == first_stats);

    const auto cache_dir = cfg.output_dir / "cache";
    std::vector<fs::path> decoded;
    for (const auto& e : fs::directory_iterator(cache_dir / "decode")) decoded.push_back(e.path());
    REQUIRE(decoded.size() == 2);
    fs::remove(decoded[0]);
    {
        pipeline::Pipeline p(cfg);
        reports = p.run_all();
    }
    CHECK(computed(reports, Stage::Decode) == 1);
    CHECK(total_computed(reports) == 1);
    CHECK(cache::read_file(cfg.output_dir / "dataset.jsonl") == first);

    auto forced = cfg;
    forced.force = true;
    {
        pipeline::Pipeline p(forced);
        reports = p.run_all();
    }
    CHECK(computed(reports, Stage::Decode) == 2);
    CHECK(cache::read_file(cfg.output_dir / "dataset.jsonl") == first);

    auto looser = cfg;
    looser.thresholds.sentence_cer = 0.5;
    {
        pipeline::Pipeline p(looser);
        reports = p.run_all();
    }
    CHECK(computed(reports, Stage::Decode) == 0);
    CHECK(computed(reports, Stage::Filter) == 1);
}

TEST_CASE("worker count does not change the output") {
    auto one = config_for("workers1", 1);
    auto four = config_for("workers4", 4);
    {
        pipeline::Pipeline p(one);
        p.run_all();
    }
    {
        pipeline::Pipeline p(four);
        p.run_all();
    }
    CHECK(cache::read_file(one.output_dir / "dataset.jsonl") == cache::read_file(four.output_dir / "dataset.jsonl"));
    CHECK(cache::read_file(one.output_dir / "chunks.jsonl") == cache::read_file(four.output_dir / "chunks.jsonl"));
}

TEST_CASE("cache directory can be moved by the environment") {
    const auto dir = fresh_dir("envcache");
    auto cfg = config_for("envout");
    ::setenv("LONGALIGN_CACHE_DIR", dir.c_str(), 1);
    {
        pipeline::Pipeline p(cfg);
        p.run(Stage::Decode);
    }
    ::unsetenv("LONGALIGN_CACHE_DIR");
    CHECK(fs::exists(dir / "decode"));
    CHECK_FALSE(fs::exists(cfg.output_dir / "cache" / "decode"));
}

TEST_CASE("command line runs the pipeline") {
    const auto dir = fresh_dir("cli");
    const std::string bin = LONGALIGN_BIN;
    REQUIRE(std::system((bin + " synth " + dir.string() + " --speeches 12 --files 3 > /dev/null").c_str()) == 0);
    const std::string run = bin + " pipeline --config " + (dir / "config.json").string() + " --workers 2";
    REQUIRE(std::system((run + " > /dev/null").c_str()) == 0);
    CHECK(fs::exists(dir / "out" / "dataset.jsonl"));
    const auto stats = nlohmann::json::parse(cache::read_file(dir / "out" / "stats.json"));
    CHECK(stats.at("files") == 3);
    CHECK(stats.at("dataset").at("sentences").get<std::size_t>() > 0);

    CHECK(std::system((bin + " match --config " + (dir / "nope.json").string() + " 2> /dev/null").c_str()) != 0);
    CHECK(std::system((bin + " filter --config " + (dir / "config.json").string() + " --sentence-cer 0.2 > /dev/null")
                          .c_str()) == 0);
}
