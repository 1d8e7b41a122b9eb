#pragma once

#include <span>
#include <utility>
#include <vector>

#include "specdec/errors.hpp"

namespace specdec {

// Per-run counters shared by every decoder. A "call" is one logical model
// evaluation (possibly batched); "inputs" counts the contexts covered by
// those calls, which is what the flop term of the cost model scales with.
// accepted_lengths holds one entry per iteration: the eta of a speculative
// step, or emitted-tokens-minus-one for the non-speculative decoders, so
// tokens before truncation is always sum(eta_i + 1).
struct RunStats {
    int large_model_calls = 0;
    int small_model_calls = 0;
    long large_model_inputs = 0;
    long small_model_inputs = 0;
    int tokens_emitted = 0;
    int iterations     = 0;
    std::vector<int> accepted_lengths;

    double mean_accepted_length() const;

    RunStats & operator+=(const RunStats & other);
};

// Analytical power/time parameters. Large-model per-call time decomposes
// into a per-input flop term plus a fixed memory term; the small model
// reuses both scaled by small_ratio. Defaults are order-of-magnitude
// choices in the memory-dominated regime (pw_mem > pw_flop, t_mem much
// larger than t_flop per input at small batch).
struct CostParams {
    double pw_flop_w = 50.0;
    double pw_mem_w  = 150.0;
    double t_flop_per_input_s = 0.002;
    double t_mem_per_call_s   = 0.37;
    double small_ratio        = 0.01; // small-model per-call cost relative to large

    void validate() const;
};

// modeled wall time: flop time plus memory time across both models
double time_estimate(const RunStats & stats, const CostParams & params);

// E = pw_flop * T_flop + pw_mem * T_mem, linear in every counter
double energy_estimate(const RunStats & stats, const CostParams & params);

// Least-squares fit of energy/run = intercept + slope * batch_size.
// The intercept is the memory-dominated per-run energy, the slope the
// per-input flop energy.
struct CostFit {
    double intercept = 0.0;
    double slope     = 0.0;
    std::vector<double> residuals;
};

// rows are (batch_size, energy_per_run); throws DegenerateFitError when
// every batch size is identical
CostFit fit_cost_params(std::span<const std::pair<double, double>> rows);

// Side-by-side comparison of two runs under one set of cost parameters.
// Ratios are a-over-b.
struct SpeedupReport {
    double time_per_token_a = 0.0, time_per_token_b = 0.0;
    double energy_per_token_a = 0.0, energy_per_token_b = 0.0;
    double mean_accepted_a = 0.0, mean_accepted_b = 0.0;
    double time_ratio = 0.0, energy_ratio = 0.0;
};

SpeedupReport speedup_report(const RunStats & a, const RunStats & b, const CostParams & params);

} // namespace specdec
