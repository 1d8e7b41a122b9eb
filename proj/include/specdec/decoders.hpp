#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "specdec/cost_model.hpp"
#include "specdec/lm.hpp"
#include "specdec/rng.hpp"

namespace specdec {

enum class DecoderKind { greedy, beam, mjgd, vanilla_spec, mjsd };

enum class BeamMode { deterministic, stochastic };

// Every knob the experiments sweep. warp_target governs target-side
// sampling everywhere; warp_draft governs draft token generation.
struct DecodeConfig {
    int max_new_tokens = 16; // N
    int gamma     = 4;       // draft tokens per speculative iteration
    double tau    = 0.1;     // joint-likelihood acceptance threshold
    int num_beams = 1;       // M
    int mjgd_block = 1;      // K, tokens per mjgd step

    BeamMode beam_mode = BeamMode::deterministic;
    // pick the mjsd draft by sampling a beam proportional to its joint
    // likelihood instead of taking the best one
    bool sample_draft_beam = false;
    // compare warped instead of raw p/q in the mjsd acceptance ratio
    bool mjsd_warped_ratio = false;

    WarpSpec warp_draft;
    WarpSpec warp_target;

    uint64_t seed = 0;
    std::optional<Token> stop_token;

    long enum_budget = 1'000'000; // state cap for the exact joint enumerations

    int sbd_min_width = 1; // M1 (sbd decodes driven through the harness)
    int sbd_max_width = 2; // M2

    void validate() const;
};

// One speculative iteration: accepted draft tokens plus the always-present
// correction/bonus token. Logprob vectors are cumulative per draft prefix
// (entry j-1 covers tokens 1..j) recording exactly the values the
// acceptance rule compared; accept_flags keeps the per-prefix verdicts.
struct StepOutcome {
    std::vector<Token> accepted_tokens;
    int eta = 0;
    Token resampled_token = -1;
    std::vector<double> draft_q_logprobs;
    std::vector<double> target_p_logprobs;
    std::vector<bool> accept_flags;
};

// candidate kept by beam decoding; score is the joint log-likelihood of
// the generated tokens under the owning (warped) model
struct BeamCandidate {
    TokenSeq seq;
    double score = 0.0;
};

// Samples one token per step from the warp_target-warped row; with an
// argmax warp the output is deterministic.
TokenSeq greedy_decode(const TabularLM & lm, const TokenSeq & prefix, const DecodeConfig & cfg,
                       RunStats * stats = nullptr);

// Beam decoding over cfg.max_new_tokens steps, M = cfg.num_beams.
// Deterministic mode keeps the exact top-M by joint warped likelihood
// (ties lexicographic by tokens); stochastic mode draws M children per
// step from the joint distribution over beams x next token. Returns
// candidates sorted by score descending. The warp follows the model role:
// draft models warp with cfg.warp_draft, target models with
// cfg.warp_target.
std::vector<BeamCandidate> beam_decode(const TabularLM & lm, const TokenSeq & prefix,
                                       const DecodeConfig & cfg, RunStats * stats = nullptr);

// Exact multi-token joint decoding: each step enumerates all vocab^K
// blocks, then argmax-selects (ties lexicographic) or samples from the
// warped joint. Throws BudgetExceededError when vocab^K exceeds
// cfg.enum_budget.
TokenSeq mjgd_decode(const TabularLM & p_lm, const TokenSeq & prefix, int block_len,
                     const DecodeConfig & cfg, RunStats * stats = nullptr);

// max over all length-horizon continuations of
// joint_logprob(prefix, block + continuation), by exhaustive enumeration
double optimal_suffix_score(const TabularLM & p_lm, std::span<const Token> prefix,
                            std::span<const Token> block, int horizon, long enum_budget = 1'000'000);

// norm(max(0, p - q)); throws ZeroResidualError when p <= q elementwise
Distribution residual_distribution(const Distribution & p, const Distribution & q);

// One iteration of vanilla speculative decoding: gamma draft tokens from
// the warped draft model, per-token min(1, p/q) coin flips against the
// warped target, residual resample at the first rejection or a bonus
// target token after full acceptance.
StepOutcome vanilla_spec_step(const TabularLM & q_lm, const TabularLM & p_lm,
                              std::span<const Token> prefix, const DecodeConfig & cfg, Rng & rng,
                              RunStats * stats = nullptr);

// One iteration of multi-token joint speculative decoding: draft via beam
// decoding with the small model, verify every draft prefix by the joint
// likelihood ratio against tau, keep the longest passing prefix, then
// sample one token from the target row at position eta+1 (already
// computed by the batched verification call).
StepOutcome mjsd_step(const TabularLM & q_lm, const TabularLM & p_lm, std::span<const Token> prefix,
                      const DecodeConfig & cfg, Rng & rng, RunStats * stats = nullptr);

// Iteration loop around the per-step ops: stops at cfg.max_new_tokens
// (surplus tokens of the final iteration are truncated; stats count the
// full iteration) or at cfg.stop_token. q_lm may be null for the
// draft-free kinds.
std::pair<TokenSeq, RunStats> run_decoder(DecoderKind kind, const TabularLM * q_lm,
                                          const TabularLM & p_lm, const TokenSeq & prefix,
                                          const DecodeConfig & cfg);

} // namespace specdec
