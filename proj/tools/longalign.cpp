// SPDX-License-Identifier: Apache-2.0
// Command line front end: runs pipeline stages over a directory of inputs.
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "longalign/errors.hpp"
#include "longalign/pipeline.hpp"
#include "longalign/synth.hpp"

namespace lp = longalign::pipeline;

namespace {

struct Overrides {
    std::string config;
    std::optional<std::size_t> workers;
    bool force = false;
    std::optional<double> speech_cer, sentence_cer, ratio, alpha, beta;
    std::optional<std::size_t> beam, window, stride;
};

void add_common(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--config", o.config, "pipeline config (JSON)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--workers", o.workers, "parallel workers")->check(CLI::PositiveNumber);
    cmd->add_flag("--force", o.force, "recompute even when cached");
    cmd->add_option("--speech-cer", o.speech_cer, "drop speeches with CER at or above this");
    cmd->add_option("--sentence-cer", o.sentence_cer, "drop sentences with CER above this");
    cmd->add_option("--ratio", o.ratio, "drop sentences above this many seconds per character");
    cmd->add_option("--alpha", o.alpha, "LM weight");
    cmd->add_option("--beta", o.beta, "word insertion bonus");
    cmd->add_option("--beam", o.beam, "beam width")->check(CLI::PositiveNumber);
    cmd->add_option("--window", o.window, "matcher window (tokens)")->check(CLI::PositiveNumber);
    cmd->add_option("--stride", o.stride, "matcher stride (tokens)")->check(CLI::PositiveNumber);
}

lp::PipelineConfig make_config(const Overrides& o) {
    auto cfg = lp::PipelineConfig::load(o.config);
    if (o.workers) cfg.workers = *o.workers;
    cfg.force = o.force;
    if (o.speech_cer) cfg.thresholds.speech_cer = *o.speech_cer;
    if (o.sentence_cer) cfg.thresholds.sentence_cer = *o.sentence_cer;
    if (o.ratio) cfg.thresholds.ratio = *o.ratio;
    if (o.alpha) cfg.beam.alpha = *o.alpha;
    if (o.beta) cfg.beam.beta = *o.beta;
    if (o.beam) cfg.beam.beam_width = *o.beam;
    if (o.window) cfg.match.window = *o.window;
    if (o.stride) cfg.match.stride = *o.stride;
    return cfg;
}

void print(const lp::StageReport& r) {
    std::printf("%-9s computed %zu, reused %zu\n", std::string(lp::to_string(r.stage)).c_str(), r.computed, r.reused);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Long-recording speech-to-text alignment"};
    app.require_subcommand(1);

    Overrides o;
    std::vector<std::pair<CLI::App*, lp::Stage>> stage_cmds;
    for (lp::Stage s : lp::all_stages()) {
        auto* cmd = app.add_subcommand(std::string(lp::to_string(s)), "run the " + std::string(lp::to_string(s)) + " stage");
        add_common(cmd, o);
        stage_cmds.emplace_back(cmd, s);
    }
    auto* pipeline_cmd = app.add_subcommand("pipeline", "run every stage");
    add_common(pipeline_cmd, o);

    longalign::synth::SynthOptions so;
    std::string synth_dir;
    auto* synth_cmd = app.add_subcommand("synth", "write a synthetic corpus with ground truth");
    synth_cmd->add_option("dir", synth_dir, "output directory")->required();
    synth_cmd->add_option("--seed", so.seed, "random seed");
    synth_cmd->add_option("--speeches", so.speeches, "number of speeches")->check(CLI::PositiveNumber);
    synth_cmd->add_option("--files", so.files, "number of recordings")->check(CLI::PositiveNumber);
    synth_cmd->add_option("--noise", so.noise_rate, "share of noisy characters");
    synth_cmd->add_option("--delete", so.delete_fraction, "share of spoken words missing from the corpus");

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth_cmd->parsed()) {
            const auto truth = longalign::synth::generate(so, synth_dir);
            std::printf("wrote %zu speeches, %zu words (%zu untranscribed), expected yield %.4f\n",
                        truth.speeches.size(), truth.spoken_words, truth.deleted_words, truth.expected_yield());
            return 0;
        }
        lp::Pipeline pipeline(make_config(o));
        if (pipeline_cmd->parsed()) {
            for (const auto& r : pipeline.run_all()) print(r);
            return 0;
        }
        for (const auto& [cmd, stage] : stage_cmds) {
            if (cmd->parsed()) print(pipeline.run(stage));
        }
    } catch (const longalign::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
