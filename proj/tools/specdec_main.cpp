#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "specdec/harness.hpp"

namespace {

using specdec::ExperimentConfig;
using specdec::Token;

struct CommonFlags {
    std::string config_path;
    std::string output;
    std::string decoder;
    std::string target_file, draft_file, prefix_file;
    std::vector<std::string> prefixes;
    int trials = -1;

    // generator
    int vocab_size = -1, order = -1;
    double knob = -1.0;
    long model_seed = -1;

    // decode knobs
    int n = -1, gamma = -1, beams = -1, block = -1;
    double tau = -1.0;
    long seed = -1;
    std::string beam_mode;
    int min_width = -1, max_width = -1;

    // sweep
    std::string axis;
    std::vector<double> values;

    // gen-fixtures
    std::string fixtures_target_out, fixtures_draft_out;
};

void add_common_flags(CLI::App * cmd, CommonFlags & f) {
    cmd->add_option("--config", f.config_path, "JSON experiment config; flags override its fields");
    cmd->add_option("--out", f.output, "output CSV path");
    cmd->add_option("--target", f.target_file, "target model file");
    cmd->add_option("--draft", f.draft_file, "draft model file");
    cmd->add_option("--vocab-size", f.vocab_size, "generator vocab size");
    cmd->add_option("--order", f.order, "generator context order");
    cmd->add_option("--knob", f.knob, "generator divergence knob in [0,1]");
    cmd->add_option("--model-seed", f.model_seed, "generator seed");
    cmd->add_option("--prefix", f.prefixes, "prefix as space-separated token ids (repeatable)");
    cmd->add_option("--prefix-file", f.prefix_file, "corpus file of prefixes");
    cmd->add_option("--trials", f.trials, "trials per prefix");
    cmd->add_option("--n", f.n, "max new tokens");
    cmd->add_option("--gamma", f.gamma, "draft tokens per iteration");
    cmd->add_option("--tau", f.tau, "mjsd acceptance threshold");
    cmd->add_option("--beams", f.beams, "beam count");
    cmd->add_option("--block", f.block, "mjgd block length K");
    cmd->add_option("--seed", f.seed, "decode seed");
    cmd->add_option("--beam-mode", f.beam_mode, "deterministic or stochastic");
    cmd->add_option("--min-width", f.min_width, "sbd minimum width M1");
    cmd->add_option("--max-width", f.max_width, "sbd maximum width M2");
}

std::vector<Token> parse_prefix(const std::string & text) {
    std::istringstream in(text);
    std::vector<Token> out;
    long v = 0;
    while (in >> v) out.push_back(Token(v));
    if (!in.eof()) throw specdec::ConfigError("--prefix expects space-separated token ids");
    return out;
}

ExperimentConfig build_config(const CommonFlags & f) {
    ExperimentConfig cfg;
    if (!f.config_path.empty()) cfg = specdec::load_experiment_config(f.config_path);

    if (!f.output.empty()) cfg.output = f.output;
    if (!f.decoder.empty()) cfg.decoder = f.decoder;
    if (!f.target_file.empty()) cfg.target_file = f.target_file;
    if (!f.draft_file.empty()) cfg.draft_file = f.draft_file;
    if (!f.prefix_file.empty()) cfg.prefix_file = f.prefix_file;
    if (!f.prefixes.empty()) {
        cfg.prefixes.clear();
        for (const auto & p : f.prefixes) cfg.prefixes.push_back(parse_prefix(p));
    }
    if (f.trials >= 0) cfg.trials = f.trials;

    if (f.vocab_size >= 0 || f.order >= 0 || f.knob >= 0.0 || f.model_seed >= 0) {
        ExperimentConfig::GeneratorSpec gen = cfg.generator.value_or(ExperimentConfig::GeneratorSpec{});
        if (f.vocab_size >= 0) gen.vocab_size = f.vocab_size;
        if (f.order >= 0) gen.order = f.order;
        if (f.knob >= 0.0) gen.divergence_knob = f.knob;
        if (f.model_seed >= 0) gen.seed = uint64_t(f.model_seed);
        cfg.generator = gen;
    }

    if (f.n >= 0) cfg.decode.max_new_tokens = f.n;
    if (f.gamma >= 0) cfg.decode.gamma = f.gamma;
    if (f.tau >= 0.0) cfg.decode.tau = f.tau;
    if (f.beams >= 0) cfg.decode.num_beams = f.beams;
    if (f.block >= 0) cfg.decode.mjgd_block = f.block;
    if (f.seed >= 0) cfg.decode.seed = uint64_t(f.seed);
    if (f.min_width >= 0) cfg.decode.sbd_min_width = f.min_width;
    if (f.max_width >= 0) cfg.decode.sbd_max_width = f.max_width;
    if (!f.beam_mode.empty()) {
        if (f.beam_mode == "deterministic") cfg.decode.beam_mode = specdec::BeamMode::deterministic;
        else if (f.beam_mode == "stochastic") cfg.decode.beam_mode = specdec::BeamMode::stochastic;
        else throw specdec::ConfigError("--beam-mode must be deterministic or stochastic");
    }

    if (!f.axis.empty()) cfg.sweep_axis = f.axis;
    if (!f.values.empty()) cfg.sweep_values = f.values;
    return cfg;
}

} // namespace

int main(int argc, char ** argv) {
    CLI::App app{"speculative decoding laboratory over exact tabular language models"};
    app.require_subcommand(1);

    CommonFlags f;

    CLI::App * decode = app.add_subcommand("decode", "run a decoder and emit per-run CSV rows");
    decode->add_option("--decoder", f.decoder, "greedy|beam|mjgd|vanilla-spec|mjsd|sbd");
    add_common_flags(decode, f);

    CLI::App * verify = app.add_subcommand("verify-dist", "run the exactness verification suite");
    add_common_flags(verify, f);

    CLI::App * sweep = app.add_subcommand("sweep", "sweep K, tau or num_beams and emit summary rows");
    sweep->add_option("--axis", f.axis, "K|tau|num_beams");
    sweep->add_option("--values", f.values, "swept values");
    add_common_flags(sweep, f);

    CLI::App * compare = app.add_subcommand("compare", "greedy vs vanilla-spec vs mjsd side by side");
    add_common_flags(compare, f);

    CLI::App * gen = app.add_subcommand("gen-fixtures", "write a generated model pair to JSON files");
    gen->add_option("--target-out", f.fixtures_target_out, "output path for the target model");
    gen->add_option("--draft-out", f.fixtures_draft_out, "output path for the draft model");
    add_common_flags(gen, f);

    CLI11_PARSE(app, argc, argv);

    try {
        ExperimentConfig cfg = build_config(f);
        if (decode->parsed()) return specdec::cmd_decode(cfg, std::cout);
        if (verify->parsed()) {
            if (f.output.empty() && cfg.output == "out.csv") cfg.output = "verify_dist.csv";
            return specdec::cmd_verify_dist(cfg, std::cout);
        }
        if (sweep->parsed()) return specdec::cmd_sweep(cfg, std::cout);
        if (compare->parsed()) return specdec::cmd_compare(cfg, std::cout);
        if (gen->parsed()) {
            if (!f.fixtures_target_out.empty()) cfg.fixtures_target_out = f.fixtures_target_out;
            if (!f.fixtures_draft_out.empty()) cfg.fixtures_draft_out = f.fixtures_draft_out;
            if (!cfg.generator) cfg.generator = ExperimentConfig::GeneratorSpec{};
            return specdec::cmd_gen_fixtures(cfg, std::cout);
        }
    } catch (const std::exception & e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
