#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "specdec/cost_model.hpp"
#include "specdec/decoders.hpp"
#include "specdec/lm.hpp"
#include "specdec/sbd.hpp"

namespace specdec {

// shortest round-trip decimal form; stable across reruns
std::string fmt_double(double x);

// RFC-4180 field quoting
std::string csv_field(const std::string & s);
std::string csv_row(std::span<const std::string> fields);

// Everything a command needs, loadable from a JSON config file. Flags in
// the CLI map onto the same fields, so a run is a pure function of this
// struct plus any referenced fixture files.
struct ExperimentConfig {
    struct GeneratorSpec {
        int vocab_size = 4;
        int order      = 1;
        double divergence_knob = 0.5;
        uint64_t seed  = 1;
    };

    std::optional<std::string> target_file;
    std::optional<std::string> draft_file;
    std::optional<GeneratorSpec> generator;

    std::string decoder = "greedy"; // greedy|beam|mjgd|vanilla-spec|mjsd|sbd
    DecodeConfig decode;

    std::vector<std::vector<Token>> prefixes; // defaults to {{0}}
    std::optional<std::string> prefix_file;

    int trials = 1;
    std::string output = "out.csv";
    CostParams cost;

    std::string sweep_axis; // K | tau | num_beams
    std::vector<double> sweep_values;

    std::string fixtures_target_out = "target_model.json";
    std::string fixtures_draft_out  = "draft_model.json";
};

ExperimentConfig load_experiment_config(const std::string & path);
ExperimentConfig parse_experiment_config(const std::string & json_text, const std::string & origin);

// newline-delimited sequences of whitespace-separated token ids
std::vector<std::vector<Token>> load_corpus(const std::string & path);

// One verification check: an exactness claim, the oracle that decided it,
// and the statistics it produced. Closed-form rows leave the chi-square
// fields unset.
struct EquivalenceReport {
    std::string decoder;
    std::string oracle; // closed-form | monte-carlo
    std::string detail;
    long trials = 0;
    double tv = 0.0;
    std::optional<double> chi_square;
    std::optional<double> p_value;
    bool pass = false;
};

// Analytic integration of one speculative iteration: for every context
// reachable while drafting, the exact law of the emitted token
// (min(p,q) mass plus rejection mass routed through the residual) is
// compared against the warped target row. Reports the worst total
// variation distance over all contexts.
struct VanillaOracleResult {
    double max_tv = 0.0;
    int contexts  = 0;
};
VanillaOracleResult vanilla_closed_form_check(const TabularLM & q_lm, const TabularLM & p_lm,
                                              std::span<const Token> prefix, const DecodeConfig & cfg);

// upper-tail p-value of the chi-square distribution
double chi_square_p_value(double stat, int df);

// Monte-Carlo check of the sampling-step exactness claim: pools the
// outputs of `trials` single-layer verification rounds and compares their
// empirical law against the exact target layer beam distribution.
// Requires distinct input sequences and min_width == max_width (the
// configuration in which every output slot provably follows the target
// law; see the suite notes in cmd_verify_dist).
struct SbdMcResult {
    double tv = 0.0;
    double chi_square = 0.0;
    double p_value = 0.0;
    long trials = 0;
    long pooled = 0;
    int categories = 0;
    double accept_rate = 0.0;
};
SbdMcResult sbd_theorem_check(const TabularLM & q_lm, const TabularLM & p_lm,
                              const std::vector<std::vector<Token>> & inputs, int min_width,
                              int max_width, long trials, uint64_t seed);

// components of the fixed verification suite run by cmd_verify_dist
std::vector<EquivalenceReport> verify_vanilla_closed_form_reports(); // 20 seeded pairs
EquivalenceReport verify_vanilla_mc_report();                        // first-token frequencies
EquivalenceReport verify_sbd_degenerate_report();                    // q == p accepts everything
std::vector<EquivalenceReport> verify_sbd_theorem_reports();         // 5 exact-law configurations

// the full suite, in report order
std::vector<EquivalenceReport> builtin_verify_suite();

// CLI subcommands; each returns a process exit code and prints one
// summary line to `out`.
int cmd_decode(const ExperimentConfig & cfg, std::ostream & out);
int cmd_verify_dist(const ExperimentConfig & cfg, std::ostream & out);
int cmd_sweep(const ExperimentConfig & cfg, std::ostream & out);
int cmd_compare(const ExperimentConfig & cfg, std::ostream & out);
int cmd_gen_fixtures(const ExperimentConfig & cfg, std::ostream & out);

} // namespace specdec
