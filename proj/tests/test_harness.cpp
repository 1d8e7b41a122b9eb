#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "specdec/harness.hpp"

using namespace specdec;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path & path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string & name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

} // namespace

TEST_CASE("fmt_double shortest round trip") {
    CHECK(fmt_double(1.0) == "1");
    CHECK(fmt_double(0.5) == "0.5");
    CHECK(fmt_double(0.1) == "0.1");
    CHECK(std::stod(fmt_double(0.64489247311827946)) == 0.64489247311827946);
}

TEST_CASE("csv quoting") {
    CHECK(csv_field("plain") == "plain");
    CHECK(csv_field("a,b") == "\"a,b\"");
    CHECK(csv_field("say \"hi\"") == "\"say \"\"hi\"\"\"");
    const std::vector<std::string> fields{"a", "b,c", "d"};
    CHECK(csv_row(fields) == "a,\"b,c\",d\n");
}

TEST_CASE("config parsing") {
    const std::string text = R"({
        "models": {"vocab_size": 3, "order": 1, "divergence_knob": 0.4, "seed": 9},
        "decoder": "mjsd",
        "decode": {"max_new_tokens": 6, "gamma": 2, "tau": 0.2, "num_beams": 2,
                   "warp_draft": {"top_k": 2}, "warp_target": {"argmax": true}, "seed": 5},
        "prefixes": [[0], [1, 2]],
        "trials": 3,
        "output": "x.csv"
    })";
    const ExperimentConfig cfg = parse_experiment_config(text, "test");
    REQUIRE(cfg.generator.has_value());
    CHECK(cfg.generator->vocab_size == 3);
    CHECK(cfg.generator->divergence_knob == 0.4);
    CHECK(cfg.decoder == "mjsd");
    CHECK(cfg.decode.max_new_tokens == 6);
    CHECK(cfg.decode.tau == 0.2);
    REQUIRE(cfg.decode.warp_draft.top_k.has_value());
    CHECK(*cfg.decode.warp_draft.top_k == 2);
    CHECK(cfg.decode.warp_target.argmax);
    CHECK(cfg.prefixes.size() == 2);
    CHECK(cfg.trials == 3);

    CHECK_THROWS_AS((void)parse_experiment_config("{\"bogus\": 1}", "t"), ConfigError);
    CHECK_THROWS_AS((void)parse_experiment_config("not json", "t"), ConfigError);
    CHECK_THROWS_AS((void)parse_experiment_config(R"({"decode": {"nope": 1}})", "t"), ConfigError);
}

TEST_CASE("corpus loading") {
    TempDir dir("specdec_corpus_test");
    const fs::path path = dir.path / "corpus.txt";
    std::ofstream(path) << "0 1 2\n\n3 0\n";
    const auto corpus = load_corpus(path.string());
    REQUIRE(corpus.size() == 2);
    CHECK(corpus[0] == std::vector<Token>{0, 1, 2});
    CHECK(corpus[1] == std::vector<Token>{3, 0});

    std::ofstream(path) << "0 x 2\n";
    CHECK_THROWS_AS((void)load_corpus(path.string()), ConfigError);
}

TEST_CASE("chi_square_p_value sanity") {
    // the median of chi-square with 1 df is about 0.455
    CHECK(chi_square_p_value(0.455, 1) == doctest::Approx(0.5).epsilon(0.01));
    CHECK(chi_square_p_value(100.0, 2) < 1e-6);
    CHECK(chi_square_p_value(0.0, 3) == doctest::Approx(1.0));
}

TEST_CASE("vanilla closed-form oracle over a generated pair") {
    auto [target, draft] = make_random_lm_pair(3, 1, 0.5, 2);
    DecodeConfig cfg;
    cfg.gamma = 2;
    const std::vector<Token> prefix{0};
    const auto result = vanilla_closed_form_check(draft, target, prefix, cfg);
    CHECK(result.max_tv <= 1e-10);
    CHECK(result.contexts == 1 + 3);
}

TEST_CASE("sbd_theorem_check validates its preconditions") {
    auto [target, draft] = make_random_lm_pair(3, 1, 0.5, 2);
    CHECK_THROWS_AS((void)sbd_theorem_check(draft, target, {{0}, {0}}, 2, 2, 10, 1),
                    std::invalid_argument);
    CHECK_THROWS_AS((void)sbd_theorem_check(draft, target, {{0}, {1}}, 1, 2, 10, 1),
                    std::invalid_argument);
}

TEST_CASE("cmd_gen_fixtures then decode from files") {
    TempDir dir("specdec_harness_gen");
    ExperimentConfig gen_cfg;
    gen_cfg.generator = ExperimentConfig::GeneratorSpec{4, 1, 0.5, 7};
    gen_cfg.fixtures_target_out = (dir.path / "target.json").string();
    gen_cfg.fixtures_draft_out  = (dir.path / "draft.json").string();
    std::ostringstream log;
    CHECK(cmd_gen_fixtures(gen_cfg, log) == 0);

    ExperimentConfig dec_cfg;
    dec_cfg.target_file = gen_cfg.fixtures_target_out;
    dec_cfg.draft_file  = gen_cfg.fixtures_draft_out;
    dec_cfg.decoder     = "vanilla-spec";
    dec_cfg.decode.max_new_tokens = 8;
    dec_cfg.decode.gamma          = 2;
    dec_cfg.trials                = 2;
    dec_cfg.output = (dir.path / "runs.csv").string();
    CHECK(cmd_decode(dec_cfg, log) == 0);
    const std::string csv = slurp(dec_cfg.output);
    CHECK(csv.find("vanilla-spec") != std::string::npos);
    // header plus 1 prefix x 2 trials
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
}

TEST_CASE("cmd_decode greedy over the chain fixture reports ppl exactly 1") {
    TempDir dir("specdec_harness_chain");
    const std::string model_path = (dir.path / "chain.json").string();
    save_model_file(make_chain_lm(4), model_path);

    ExperimentConfig cfg;
    cfg.target_file = model_path;
    cfg.decoder     = "greedy";
    cfg.decode.max_new_tokens     = 6;
    cfg.decode.warp_target.argmax = true;
    cfg.output = (dir.path / "chain.csv").string();
    std::ostringstream log;
    CHECK(cmd_decode(cfg, log) == 0);
    std::istringstream lines(slurp(cfg.output));
    std::string header, row;
    std::getline(lines, header);
    std::getline(lines, row);
    std::vector<std::string> cells;
    std::istringstream cs(row);
    std::string cell;
    while (std::getline(cs, cell, ',')) cells.push_back(cell);
    CHECK(cells[5] == "1"); // ppl column, exactly
}

TEST_CASE("commands are deterministic given the same config") {
    TempDir dir("specdec_harness_repro");
    ExperimentConfig cfg;
    cfg.generator = ExperimentConfig::GeneratorSpec{4, 1, 0.5, 7};
    cfg.decoder   = "mjsd";
    cfg.decode.max_new_tokens = 10;
    cfg.decode.gamma          = 3;
    cfg.decode.num_beams      = 2;
    cfg.trials                = 3;
    std::ostringstream log;

    cfg.output = (dir.path / "a.csv").string();
    CHECK(cmd_decode(cfg, log) == 0);
    cfg.output = (dir.path / "b.csv").string();
    CHECK(cmd_decode(cfg, log) == 0);
    CHECK(slurp(dir.path / "a.csv") == slurp(dir.path / "b.csv"));

    cfg.sweep_axis   = "tau";
    cfg.sweep_values = {0.0, 0.5, 0.999999999};
    cfg.output       = (dir.path / "s1.csv").string();
    CHECK(cmd_sweep(cfg, log) == 0);
    cfg.output = (dir.path / "s2.csv").string();
    CHECK(cmd_sweep(cfg, log) == 0);
    CHECK(slurp(dir.path / "s1.csv") == slurp(dir.path / "s2.csv"));
}

TEST_CASE("cmd_sweep tau endpoints move accepted length monotonically") {
    TempDir dir("specdec_harness_sweep");
    ExperimentConfig cfg;
    cfg.generator = ExperimentConfig::GeneratorSpec{4, 1, 0.6, 11};
    cfg.decode.gamma          = 3;
    cfg.decode.num_beams      = 2;
    // single iteration per run: the per-iteration acceptance set shrinks
    // pointwise as tau grows, so the means are comparable run by run
    cfg.decode.max_new_tokens = 1;
    cfg.trials                = 40;
    cfg.sweep_axis            = "tau";
    cfg.sweep_values          = {0.0, 0.3, 0.7, 0.999999999};
    cfg.output                = (dir.path / "tau.csv").string();
    std::ostringstream log;
    CHECK(cmd_sweep(cfg, log) == 0);

    std::istringstream lines(slurp(cfg.output));
    std::string line;
    std::getline(lines, line); // header
    double prev = 1e9;
    int rows = 0;
    while (std::getline(lines, line)) {
        std::vector<std::string> cells;
        std::istringstream cs(line);
        std::string cell;
        while (std::getline(cs, cell, ',')) cells.push_back(cell);
        const double mean_eta = std::stod(cells[5]);
        CHECK(mean_eta <= prev + 1e-12);
        prev = mean_eta;
        ++rows;
    }
    CHECK(rows == 4);
}

TEST_CASE("cmd_sweep num_beams improves the chosen draft joint at gamma 1") {
    TempDir dir("specdec_harness_beams");
    ExperimentConfig cfg;
    cfg.generator = ExperimentConfig::GeneratorSpec{4, 1, 0.6, 13};
    // single-step drafts: the width-2 candidate pool contains the
    // width-1 pool, so the best joint cannot get worse
    cfg.decode.gamma          = 1;
    cfg.decode.max_new_tokens = 1;
    cfg.trials                = 20;
    cfg.sweep_axis            = "num_beams";
    cfg.sweep_values          = {1, 2};
    cfg.output                = (dir.path / "beams.csv").string();
    std::ostringstream log;
    CHECK(cmd_sweep(cfg, log) == 0);

    std::istringstream lines(slurp(cfg.output));
    std::string header, row1, row2;
    std::getline(lines, header);
    std::getline(lines, row1);
    std::getline(lines, row2);
    const auto draft_joint = [](const std::string & row) {
        std::vector<std::string> cells;
        std::istringstream cs(row);
        std::string cell;
        while (std::getline(cs, cell, ',')) cells.push_back(cell);
        return std::stod(cells[7]);
    };
    CHECK(draft_joint(row2) >= draft_joint(row1) - 1e-12);
}

TEST_CASE("cmd_compare emits the three decoders and the energy inequality") {
    TempDir dir("specdec_harness_compare");
    ExperimentConfig cfg;
    cfg.generator = ExperimentConfig::GeneratorSpec{4, 1, 0.3, 7};
    cfg.decode.max_new_tokens = 16;
    cfg.decode.gamma          = 4;
    cfg.decode.num_beams      = 2;
    cfg.trials                = 4;
    cfg.output                = (dir.path / "cmp.csv").string();
    std::ostringstream log;
    CHECK(cmd_compare(cfg, log) == 0);
    const std::string csv = slurp(cfg.output);
    CHECK(csv.find("greedy") != std::string::npos);
    CHECK(csv.find("vanilla-spec") != std::string::npos);
    CHECK(csv.find("mjsd") != std::string::npos);
    CHECK(log.str().find("beats greedy iff mean accepted >") != std::string::npos);
}
