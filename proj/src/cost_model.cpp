#include "specdec/cost_model.hpp"

#include <cmath>
#include <stdexcept>

namespace specdec {

double RunStats::mean_accepted_length() const {
    if (accepted_lengths.empty()) return 0.0;
    long sum = 0;
    for (int eta : accepted_lengths) sum += eta;
    return double(sum) / double(accepted_lengths.size());
}

RunStats & RunStats::operator+=(const RunStats & other) {
    large_model_calls += other.large_model_calls;
    small_model_calls += other.small_model_calls;
    large_model_inputs += other.large_model_inputs;
    small_model_inputs += other.small_model_inputs;
    tokens_emitted += other.tokens_emitted;
    iterations += other.iterations;
    accepted_lengths.insert(accepted_lengths.end(), other.accepted_lengths.begin(), other.accepted_lengths.end());
    return *this;
}

void CostParams::validate() const {
    if (!(pw_flop_w > 0.0 && pw_mem_w > 0.0 && t_flop_per_input_s > 0.0 && t_mem_per_call_s > 0.0 &&
          small_ratio > 0.0)) {
        throw std::invalid_argument("CostParams: all entries must be positive");
    }
    if (!(pw_mem_w > pw_flop_w)) {
        throw std::invalid_argument("CostParams: pw_mem must exceed pw_flop");
    }
}

static double flop_time(const RunStats & s, const CostParams & p) {
    return p.t_flop_per_input_s * (double(s.large_model_inputs) + p.small_ratio * double(s.small_model_inputs));
}

static double mem_time(const RunStats & s, const CostParams & p) {
    return p.t_mem_per_call_s * (double(s.large_model_calls) + p.small_ratio * double(s.small_model_calls));
}

double time_estimate(const RunStats & stats, const CostParams & params) {
    return flop_time(stats, params) + mem_time(stats, params);
}

double energy_estimate(const RunStats & stats, const CostParams & params) {
    return params.pw_flop_w * flop_time(stats, params) + params.pw_mem_w * mem_time(stats, params);
}

CostFit fit_cost_params(std::span<const std::pair<double, double>> rows) {
    if (rows.size() < 2) throw DegenerateFitError("fit_cost_params: need at least 2 rows");
    double xm = 0.0, ym = 0.0;
    for (const auto & [x, y] : rows) {
        xm += x;
        ym += y;
    }
    xm /= double(rows.size());
    ym /= double(rows.size());
    double sxx = 0.0, sxy = 0.0;
    for (const auto & [x, y] : rows) {
        sxx += (x - xm) * (x - xm);
        sxy += (x - xm) * (y - ym);
    }
    if (sxx == 0.0) throw DegenerateFitError("fit_cost_params: all batch sizes equal");
    CostFit fit;
    fit.slope     = sxy / sxx;
    fit.intercept = ym - fit.slope * xm;
    fit.residuals.reserve(rows.size());
    for (const auto & [x, y] : rows) fit.residuals.push_back(y - (fit.intercept + fit.slope * x));
    return fit;
}

SpeedupReport speedup_report(const RunStats & a, const RunStats & b, const CostParams & params) {
    if (a.tokens_emitted < 1 || b.tokens_emitted < 1) {
        throw std::invalid_argument("speedup_report: both runs must have emitted tokens");
    }
    SpeedupReport r;
    r.time_per_token_a   = time_estimate(a, params) / double(a.tokens_emitted);
    r.time_per_token_b   = time_estimate(b, params) / double(b.tokens_emitted);
    r.energy_per_token_a = energy_estimate(a, params) / double(a.tokens_emitted);
    r.energy_per_token_b = energy_estimate(b, params) / double(b.tokens_emitted);
    r.mean_accepted_a    = a.mean_accepted_length();
    r.mean_accepted_b    = b.mean_accepted_length();
    r.time_ratio         = r.time_per_token_a / r.time_per_token_b;
    r.energy_ratio       = r.energy_per_token_a / r.energy_per_token_b;
    return r;
}

} // namespace specdec
