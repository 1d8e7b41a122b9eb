#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "specdec/decoders.hpp"

using namespace specdec;

namespace {

std::pair<TabularLM, TabularLM> fixture1() { return make_random_lm_pair(4, 2, 0.5, 1); }

TabularLM build_lm(int vocab_size, ModelRole role,
                   const std::vector<std::pair<std::vector<Token>, std::vector<double>>> & rows) {
    TabularLM::Table table;
    for (const auto & [ctx, probs] : rows) table.emplace(ctx, Distribution::normalized(probs));
    // remaining single-token contexts default to uniform rows
    for (Token t = 0; t < vocab_size; ++t) {
        const std::vector<Token> key{t};
        if (!table.contains(key)) {
            table.emplace(key, Distribution::normalized(std::vector<double>(size_t(vocab_size), 1.0)));
        }
    }
    return TabularLM(Vocab{vocab_size, {}}, 1, role, std::move(table));
}

// tables realizing a failing sub-prefix: the first draft ratio is 0.05,
// the two-token ratio 0.125, so tau = 0.1 accepts length 2
std::pair<TabularLM, TabularLM> longest_prefix_pair_v3() {
    TabularLM p = build_lm(3, ModelRole::target, {{{}, {0.04, 0.48, 0.48}}, {{0}, {1.0, 0.0, 0.0}}});
    TabularLM q = build_lm(3, ModelRole::draft, {{{}, {0.8, 0.1, 0.1}}, {{0}, {0.4, 0.3, 0.3}}});
    return {std::move(p), std::move(q)};
}

// wider vocabulary variant hitting the ratios 0.05 then 0.5 exactly
std::pair<TabularLM, TabularLM> longest_prefix_pair_v10() {
    std::vector<double> q_root(10, 0.2 / 9.0);
    q_root[0] = 0.8;
    std::vector<double> q_after0(10, 0.1);
    std::vector<double> p_root(10, 0.96 / 9.0);
    p_root[0] = 0.04;
    std::vector<double> p_after0(10, 0.0);
    p_after0[0] = 1.0;
    TabularLM p = build_lm(10, ModelRole::target, {{{}, p_root}, {{0}, p_after0}});
    TabularLM q = build_lm(10, ModelRole::draft, {{{}, q_root}, {{0}, q_after0}});
    return {std::move(p), std::move(q)};
}

// every reachable acceptance ratio stays below 1
std::pair<TabularLM, TabularLM> always_imperfect_pair() {
    TabularLM p = build_lm(2, ModelRole::target,
                           {{{}, {0.6, 0.4}}, {{0}, {0.6, 0.4}}, {{1}, {0.6, 0.4}}});
    TabularLM q = build_lm(2, ModelRole::draft,
                           {{{}, {0.9, 0.1}}, {{0}, {0.9, 0.1}}, {{1}, {0.9, 0.1}}});
    return {std::move(p), std::move(q)};
}

WarpSpec argmax_warp() {
    WarpSpec warp;
    warp.argmax = true;
    return warp;
}

} // namespace

TEST_CASE("greedy_decode examples") {
    DecodeConfig cfg;
    cfg.warp_target = argmax_warp();

    const TabularLM chain = make_chain_lm(4);
    cfg.max_new_tokens    = 5;
    const TokenSeq out = greedy_decode(chain, TokenSeq{{1}, 1}, cfg);
    CHECK(out.tokens == std::vector<Token>{1, 2, 3, 0, 1, 2});

    // uniform rows: argmax tie-break picks token 0 every step
    TabularLM::Table table;
    table.emplace(std::vector<Token>{}, Distribution::normalized(std::vector<double>(4, 1.0)));
    const TabularLM uni(Vocab{4, {}}, 0, ModelRole::target, std::move(table));
    cfg.max_new_tokens = 3;
    CHECK(greedy_decode(uni, TokenSeq{{}, 0}, cfg).tokens == std::vector<Token>{0, 0, 0});

    // per-step argmax of the stored rows, stepped by hand
    auto [target, draft] = fixture1();
    cfg.max_new_tokens = 4;
    const TokenSeq got = greedy_decode(target, TokenSeq{{0}, 1}, cfg);
    std::vector<Token> ctx{0};
    for (int i = 0; i < 4; ++i) {
        const Distribution & row = target.next_dist(ctx);
        Token best = 0;
        for (Token v = 1; v < 4; ++v) {
            if (row.at(v) > row.at(best)) best = v;
        }
        CHECK(got.tokens[size_t(1 + i)] == best);
        ctx.push_back(best);
    }
}

TEST_CASE("greedy_decode stop token and stats") {
    const TabularLM chain = make_chain_lm(4);
    DecodeConfig cfg;
    cfg.warp_target    = argmax_warp();
    cfg.max_new_tokens = 8;
    RunStats stats;
    const TokenSeq out = greedy_decode(chain, TokenSeq{{0}, 1}, cfg, &stats);
    CHECK(out.generated_count() == 8);
    CHECK(stats.large_model_calls == 8);
    CHECK(stats.large_model_calls == stats.tokens_emitted);
    CHECK(stats.iterations == 8);

    cfg.stop_token = 3;
    RunStats stats2;
    const TokenSeq stopped = greedy_decode(chain, TokenSeq{{0}, 1}, cfg, &stats2);
    CHECK(stopped.tokens == std::vector<Token>{0, 1, 2, 3});
    CHECK(stats2.tokens_emitted == 3);
}

TEST_CASE("beam_decode width one equals greedy under argmax") {
    auto [target, draft] = fixture1();
    DecodeConfig cfg;
    cfg.warp_target    = argmax_warp();
    cfg.max_new_tokens = 5;
    cfg.num_beams      = 1;
    const TokenSeq greedy = greedy_decode(target, TokenSeq{{0}, 1}, cfg);
    const auto candidates = beam_decode(target, TokenSeq{{0}, 1}, cfg);
    REQUIRE(candidates.size() == 1);
    CHECK(candidates[0].seq.tokens == greedy.tokens);
}

TEST_CASE("beam_decode two-step ranking against exhaustive enumeration") {
    // root row favors token 0 but token 1 leads to the strong successor:
    // joint(1,0) = 0.4*0.9 = 0.36 beats joint(0,*) = 0.6*0.1 = 0.06
    std::vector<double> root(10, 0.0);
    root[0] = 0.6;
    root[1] = 0.4;
    std::vector<double> after0(10, 0.1);
    std::vector<double> after1(10, 0.1 / 9.0);
    after1[0] = 0.9;
    const TabularLM lm = build_lm(10, ModelRole::target, {{{}, root}, {{0}, after0}, {{1}, after1}});

    DecodeConfig cfg;
    cfg.max_new_tokens = 2;
    cfg.num_beams      = 2;
    const auto candidates = beam_decode(lm, TokenSeq{{}, 0}, cfg);
    REQUIRE(candidates.size() == 2);
    CHECK(candidates[0].seq.tokens == std::vector<Token>{1, 0});
    CHECK(candidates[0].score == doctest::Approx(std::log(0.36)).epsilon(1e-12));
    CHECK(candidates[1].seq.tokens == std::vector<Token>{0, 0});
    CHECK(candidates[1].score == doctest::Approx(std::log(0.06)).epsilon(1e-12));

    // exhaustive oracle over all two-token sequences
    std::vector<std::pair<double, std::vector<Token>>> all;
    for (Token a = 0; a < 10; ++a) {
        for (Token b = 0; b < 10; ++b) {
            const std::vector<Token> seq{a, b};
            const double lp = joint_logprob(lm, {}, seq);
            if (!std::isinf(lp)) all.emplace_back(lp, seq);
        }
    }
    std::sort(all.begin(), all.end(), [](const auto & x, const auto & y) {
        if (x.first != y.first) return x.first > y.first;
        return x.second < y.second;
    });
    CHECK(all[0].second == std::vector<Token>(candidates[0].seq.generated().begin(),
                                              candidates[0].seq.generated().end()));
}

TEST_CASE("beam_decode stochastic degenerate chain") {
    const TabularLM chain = make_chain_lm(4, ModelRole::draft);
    DecodeConfig cfg;
    cfg.max_new_tokens = 4;
    cfg.num_beams      = 3;
    cfg.beam_mode      = BeamMode::stochastic;
    for (uint64_t seed : {1ull, 9ull, 77ull}) {
        cfg.seed = seed;
        const auto candidates = beam_decode(chain, TokenSeq{{0}, 1}, cfg);
        REQUIRE(candidates.size() == 3);
        for (const auto & c : candidates) {
            CHECK(c.seq.tokens == std::vector<Token>{0, 1, 2, 3, 0});
            CHECK(c.score == 0.0);
        }
    }
}

TEST_CASE("beam candidate scores re-derive from joint_logprob") {
    auto [target, draft] = fixture1();
    DecodeConfig cfg;
    cfg.max_new_tokens    = 4;
    cfg.num_beams         = 3;
    cfg.warp_target.top_k = 3;
    for (const BeamMode mode : {BeamMode::deterministic, BeamMode::stochastic}) {
        cfg.beam_mode = mode;
        cfg.seed      = 21;
        const auto candidates = beam_decode(target, TokenSeq{{0, 1}, 2}, cfg);
        for (const auto & c : candidates) {
            const double expect = joint_logprob(target, c.seq.prefix(), c.seq.generated(), &cfg.warp_target);
            CHECK(c.score == doctest::Approx(expect).epsilon(1e-12));
        }
    }
}

TEST_CASE("mjgd_decode block length one matches greedy bit for bit") {
    auto [target, draft] = fixture1();
    DecodeConfig cfg;
    cfg.max_new_tokens = 6;

    // argmax mode
    cfg.warp_target = argmax_warp();
    CHECK(mjgd_decode(target, TokenSeq{{0}, 1}, 1, cfg).tokens ==
          greedy_decode(target, TokenSeq{{0}, 1}, cfg).tokens);

    // sampling mode, same seed: identical draws
    cfg.warp_target = WarpSpec{};
    for (uint64_t seed : {0ull, 3ull, 123ull}) {
        cfg.seed = seed;
        CHECK(mjgd_decode(target, TokenSeq{{0}, 1}, 1, cfg).tokens ==
              greedy_decode(target, TokenSeq{{0}, 1}, cfg).tokens);
    }
}

TEST_CASE("mjgd_decode emits the jointly optimal block") {
    auto [target, draft] = fixture1();
    DecodeConfig cfg;
    cfg.warp_target    = argmax_warp();
    cfg.max_new_tokens = 4;

    const TokenSeq out = mjgd_decode(target, TokenSeq{{0}, 1}, 2, cfg);
    REQUIRE(out.generated_count() == 4);

    // enumeration oracle: each emitted block attains the max joint
    std::vector<Token> ctx{0};
    for (int step = 0; step < 2; ++step) {
        const std::vector<Token> block(out.tokens.begin() + 1 + 2 * step, out.tokens.begin() + 3 + 2 * step);
        const double got = joint_logprob(target, ctx, block);
        double best = -std::numeric_limits<double>::infinity();
        for (Token a = 0; a < 4; ++a) {
            for (Token b = 0; b < 4; ++b) {
                best = std::max(best, joint_logprob(target, ctx, std::vector<Token>{a, b}));
            }
        }
        CHECK(got == doctest::Approx(best).epsilon(1e-12));
        ctx.insert(ctx.end(), block.begin(), block.end());
    }

    // K = N returns the globally optimal sequence
    const TokenSeq global = mjgd_decode(target, TokenSeq{{0}, 1}, 4, cfg);
    const std::vector<Token> gprefix{0};
    const double global_lp = joint_logprob(target, gprefix, global.generated());
    CHECK(global_lp == doctest::Approx(optimal_suffix_score(target, gprefix, {}, 4)).epsilon(1e-12));
}

TEST_CASE("mjgd_decode budget") {
    auto [target, draft] = fixture1();
    DecodeConfig cfg;
    cfg.warp_target = argmax_warp();
    CHECK_THROWS_AS((void)mjgd_decode(target, TokenSeq{{0}, 1}, 12, cfg), BudgetExceededError);
}

TEST_CASE("optimal_suffix_score") {
    auto [target, draft] = fixture1();
    const std::vector<Token> prefix{0, 1};
    const std::vector<Token> block{2, 0};

    CHECK(optimal_suffix_score(target, prefix, block, 0) ==
          doctest::Approx(joint_logprob(target, prefix, block)).epsilon(1e-12));

    // a probability-1 future adds nothing beyond the block score
    const TabularLM chain = make_chain_lm(4);
    const std::vector<Token> cpfx{0};
    const std::vector<Token> cblk{1, 2};
    CHECK(optimal_suffix_score(chain, cpfx, cblk, 3) ==
          doctest::Approx(joint_logprob(chain, cpfx, cblk)).epsilon(1e-12));

    // independent enumeration over every 2-token future
    double best = -std::numeric_limits<double>::infinity();
    for (Token a = 0; a < 4; ++a) {
        for (Token b = 0; b < 4; ++b) {
            std::vector<Token> cont = block;
            cont.push_back(a);
            cont.push_back(b);
            best = std::max(best, joint_logprob(target, prefix, cont));
        }
    }
    CHECK(optimal_suffix_score(target, prefix, block, 2) == doctest::Approx(best).epsilon(1e-12));

    CHECK_THROWS_AS((void)optimal_suffix_score(target, prefix, block, 11), BudgetExceededError);
}

TEST_CASE("residual_distribution examples") {
    const Distribution a =
        residual_distribution(Distribution::checked({0.5, 0.5}), Distribution::checked({1.0, 0.0}));
    CHECK(a.at(0) == 0.0);
    CHECK(a.at(1) == 1.0);

    const Distribution p = Distribution::checked({0.6, 0.3, 0.1});
    const Distribution q = Distribution::checked({0.2, 0.5, 0.3});
    const Distribution r = residual_distribution(p, q);
    CHECK(r.at(0) == 1.0);
    CHECK(r.at(1) == 0.0);
    CHECK(r.at(2) == 0.0);

    CHECK_THROWS_AS((void)residual_distribution(p, p), ZeroResidualError);
}

TEST_CASE("vanilla_spec_step accepts everything when draft equals target") {
    auto [target, draft] = make_random_lm_pair(4, 1, 0.0, 11);
    DecodeConfig cfg;
    cfg.gamma = 3;
    const std::vector<Token> prefix{0};
    for (uint64_t seed = 0; seed < 50; ++seed) {
        Rng rng(seed);
        const StepOutcome step = vanilla_spec_step(draft, target, prefix, cfg, rng);
        CHECK(step.eta == 3);
        CHECK(step.accepted_tokens.size() == 3);
    }
}

TEST_CASE("vanilla_spec_step rejects a zero-probability draft token surely") {
    // draft puts all its mass on token 0, target gives it zero
    TabularLM p = build_lm(3, ModelRole::target, {{{}, {0.0, 0.7, 0.3}}});
    TabularLM q = build_lm(3, ModelRole::draft, {{{}, {1.0, 0.0, 0.0}}});
    DecodeConfig cfg;
    cfg.gamma = 2;
    const std::vector<Token> prefix{};
    for (uint64_t seed = 0; seed < 50; ++seed) {
        Rng rng(seed);
        const StepOutcome step = vanilla_spec_step(q, p, prefix, cfg, rng);
        CHECK(step.eta == 0);
        CHECK(step.resampled_token != 0); // residual removed the rejected token's mass
    }
}

TEST_CASE("vanilla_spec_step emitted-token law equals the warped target row") {
    // closed-form integration over the acceptance uniforms, computed
    // independently of the sampling path
    auto [target, draft] = make_random_lm_pair(4, 1, 0.5, 7);
    DecodeConfig cfg;
    cfg.gamma             = 2;
    cfg.warp_target.top_k = 3;
    cfg.warp_draft.top_k  = 3;

    std::vector<std::vector<Token>> contexts{{0}};
    for (Token v = 0; v < 4; ++v) contexts.push_back({0, v});
    for (const auto & ctx : contexts) {
        std::vector<double> p_row = target.next_dist(ctx).probs();
        warp_in_place(p_row, cfg.warp_target);
        std::vector<double> q_row = draft.next_dist(ctx).probs();
        warp_in_place(q_row, cfg.warp_draft);

        double reject = 0.0, res_mass = 0.0;
        for (size_t i = 0; i < p_row.size(); ++i) {
            reject += std::max(0.0, q_row[i] - p_row[i]);
            res_mass += std::max(0.0, p_row[i] - q_row[i]);
        }
        std::vector<double> marginal(p_row.size());
        for (size_t i = 0; i < p_row.size(); ++i) {
            marginal[i] = std::min(p_row[i], q_row[i]);
            if (reject > 0.0) marginal[i] += reject * std::max(0.0, p_row[i] - q_row[i]) / res_mass;
        }
        CHECK(tv_distance(marginal, p_row) <= 1e-12);
    }
}

TEST_CASE("mjsd_step longest-prefix acceptance on the constructed tables") {
    auto [p, q] = longest_prefix_pair_v3();
    DecodeConfig cfg;
    cfg.gamma      = 2;
    cfg.tau        = 0.1;
    cfg.num_beams  = 1;
    cfg.warp_draft = argmax_warp();
    const std::vector<Token> prefix{};
    Rng rng(5);
    const StepOutcome step = mjsd_step(q, p, prefix, cfg, rng);
    CHECK(step.accepted_tokens == std::vector<Token>{0, 0});
    CHECK(step.eta == 2);
    REQUIRE(step.accept_flags.size() == 2);
    CHECK_FALSE(step.accept_flags[0]); // ratio 0.05 fails tau = 0.1
    CHECK(step.accept_flags[1]);       // ratio 0.125 passes
    CHECK(std::exp(step.target_p_logprobs[0] - step.draft_q_logprobs[0]) == doctest::Approx(0.05).epsilon(1e-12));
    CHECK(std::exp(step.target_p_logprobs[1] - step.draft_q_logprobs[1]) == doctest::Approx(0.125).epsilon(1e-12));
}

TEST_CASE("mjsd_step hits the 0.05 then 0.5 ratios on the wide tables") {
    auto [p, q] = longest_prefix_pair_v10();
    DecodeConfig cfg;
    cfg.gamma      = 2;
    cfg.tau        = 0.1;
    cfg.num_beams  = 1;
    cfg.warp_draft = argmax_warp();
    const std::vector<Token> prefix{};
    Rng rng(5);
    const StepOutcome step = mjsd_step(q, p, prefix, cfg, rng);
    CHECK(step.eta == 2);
    CHECK_FALSE(step.accept_flags[0]);
    CHECK(std::exp(step.target_p_logprobs[0] - step.draft_q_logprobs[0]) == doctest::Approx(0.05).epsilon(1e-12));
    CHECK(std::exp(step.target_p_logprobs[1] - step.draft_q_logprobs[1]) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("mjsd_step tau endpoints") {
    auto [p, q] = always_imperfect_pair();
    DecodeConfig cfg;
    cfg.gamma       = 3;
    cfg.num_beams   = 1;
    cfg.warp_draft  = argmax_warp();
    cfg.warp_target = argmax_warp();
    const std::vector<Token> prefix{0};

    // tau close to 1: every ratio is below 1, so no draft survives and
    // each iteration emits exactly the one target token
    cfg.tau = 1.0 - 1e-9;
    for (uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed);
        const StepOutcome step = mjsd_step(q, p, prefix, cfg, rng);
        CHECK(step.eta == 0);
        CHECK(step.accepted_tokens.empty());
    }

    // tau = 0: all gamma drafts accepted whenever their target mass is
    // positive
    cfg.tau = 0.0;
    for (uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed);
        const StepOutcome step = mjsd_step(q, p, prefix, cfg, rng);
        CHECK(step.eta == 3);
    }
}

TEST_CASE("mjsd accepted prefixes obey the relative error bound") {
    auto [target, draft] = make_random_lm_pair(4, 1, 0.6, 17);
    DecodeConfig cfg;
    cfg.gamma     = 4;
    cfg.tau       = 0.1;
    cfg.num_beams = 2;
    const double bound = 1.0 / cfg.tau - 1.0;
    std::vector<Token> ctx{0};
    Rng rng(3);
    for (int iter = 0; iter < 500; ++iter) {
        const StepOutcome step = mjsd_step(draft, target, ctx, cfg, rng);
        for (size_t j = 0; j < step.accept_flags.size(); ++j) {
            if (!step.accept_flags[j]) continue;
            const double qj = std::exp(step.draft_q_logprobs[j]);
            const double pj = std::exp(step.target_p_logprobs[j]);
            if (qj > pj) CHECK((qj - pj) / pj < bound);
        }
        ctx.push_back(step.accepted_tokens.empty() ? step.resampled_token : step.accepted_tokens[0]);
        if (ctx.size() > 30) ctx.assign({0});
    }
}

TEST_CASE("speculative steps emit between 1 and gamma+1 tokens") {
    auto [target, draft] = make_random_lm_pair(3, 1, 0.7, 23);
    DecodeConfig cfg;
    cfg.gamma     = 3;
    cfg.tau       = 0.3;
    cfg.num_beams = 2;
    const std::vector<Token> prefix{0};
    for (uint64_t seed = 0; seed < 100; ++seed) {
        Rng rng(seed);
        const StepOutcome v = vanilla_spec_step(draft, target, prefix, cfg, rng);
        CHECK(v.eta >= 0);
        CHECK(v.eta <= cfg.gamma);
        CHECK(int(v.accepted_tokens.size()) == v.eta);
        const StepOutcome m = mjsd_step(draft, target, prefix, cfg, rng);
        CHECK(m.eta >= 0);
        CHECK(m.eta <= cfg.gamma);
        CHECK(int(m.accepted_tokens.size()) == m.eta);
    }
}

TEST_CASE("run_decoder vanilla all-accept arithmetic") {
    auto [target, draft] = make_random_lm_pair(4, 1, 0.0, 29);
    DecodeConfig cfg;
    cfg.max_new_tokens = 8;
    cfg.gamma          = 4;
    const auto [seq, stats] = run_decoder(DecoderKind::vanilla_spec, &draft, target, TokenSeq{{0}, 1}, cfg);
    CHECK(seq.generated_count() == 8);
    CHECK(stats.iterations == 2);
    CHECK(stats.tokens_emitted == 8);
    CHECK(stats.accepted_lengths == std::vector<int>{4, 4});
    CHECK(stats.large_model_calls == 2); // one batched call per iteration
}

TEST_CASE("run_decoder greedy counters") {
    auto [target, draft] = fixture1();
    DecodeConfig cfg;
    cfg.max_new_tokens = 8;
    cfg.warp_target    = argmax_warp();
    const auto [seq, stats] = run_decoder(DecoderKind::greedy, nullptr, target, TokenSeq{{0}, 1}, cfg);
    CHECK(stats.large_model_calls == 8);
    CHECK(stats.tokens_emitted == 8);
    CHECK(stats.large_model_calls == stats.tokens_emitted);
}

TEST_CASE("run_decoder mjsd determinism") {
    auto [target, draft] = make_random_lm_pair(4, 1, 0.5, 7);
    DecodeConfig cfg;
    cfg.max_new_tokens = 12;
    cfg.gamma          = 3;
    cfg.num_beams      = 2;
    cfg.seed           = 3;
    const auto [seq_a, stats_a] = run_decoder(DecoderKind::mjsd, &draft, target, TokenSeq{{0}, 1}, cfg);
    const auto [seq_b, stats_b] = run_decoder(DecoderKind::mjsd, &draft, target, TokenSeq{{0}, 1}, cfg);
    CHECK(seq_a.tokens == seq_b.tokens);
    CHECK(stats_a.accepted_lengths == stats_b.accepted_lengths);
    CHECK(stats_a.large_model_calls == stats_b.large_model_calls);
    CHECK(stats_a.small_model_calls == stats_b.small_model_calls);
    // every iteration is one batched large call
    CHECK(stats_a.large_model_calls == stats_a.iterations);
}

TEST_CASE("mjsd accepts longer prefixes than vanilla on the constructed tables") {
    auto [p, q] = longest_prefix_pair_v3();
    DecodeConfig cfg;
    cfg.max_new_tokens = 12;
    cfg.gamma          = 2;
    cfg.tau            = 0.1;
    cfg.num_beams      = 1;
    cfg.warp_draft     = argmax_warp();
    cfg.warp_target    = argmax_warp();
    cfg.seed           = 4;
    const auto [mj_seq, mj_stats] = run_decoder(DecoderKind::mjsd, &q, p, TokenSeq{{}, 0}, cfg);
    const auto [va_seq, va_stats] = run_decoder(DecoderKind::vanilla_spec, &q, p, TokenSeq{{}, 0}, cfg);
    CHECK(mj_stats.mean_accepted_length() > va_stats.mean_accepted_length());
}
