#include "specdec/decoders.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace specdec {

static constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void DecodeConfig::validate() const {
    if (max_new_tokens < 1) throw std::invalid_argument("DecodeConfig: max_new_tokens must be >= 1");
    if (gamma < 1) throw std::invalid_argument("DecodeConfig: gamma must be >= 1");
    if (num_beams < 1) throw std::invalid_argument("DecodeConfig: num_beams must be >= 1");
    if (mjgd_block < 1) throw std::invalid_argument("DecodeConfig: mjgd_block must be >= 1");
    // tau = 1 rejects every draft; kept reachable for the threshold ablation
    if (tau < 0.0 || tau > 1.0) throw std::invalid_argument("DecodeConfig: tau must be in [0,1]");
    if (sbd_min_width < 1 || sbd_max_width < sbd_min_width) {
        throw std::invalid_argument("DecodeConfig: need 1 <= sbd_min_width <= sbd_max_width");
    }
    if (enum_budget < 1) throw std::invalid_argument("DecodeConfig: enum_budget must be >= 1");
}

static const WarpSpec & warp_for(const TabularLM & lm, const DecodeConfig & cfg) {
    return lm.role() == ModelRole::draft ? cfg.warp_draft : cfg.warp_target;
}

static void count_call(RunStats * stats, bool large, long inputs) {
    if (stats == nullptr) return;
    if (large) {
        stats->large_model_calls += 1;
        stats->large_model_inputs += inputs;
    } else {
        stats->small_model_calls += 1;
        stats->small_model_inputs += inputs;
    }
}

TokenSeq greedy_decode(const TabularLM & lm, const TokenSeq & prefix, const DecodeConfig & cfg,
                       RunStats * stats) {
    cfg.validate();
    Rng rng(cfg.seed);
    TokenSeq out{prefix.tokens, int(prefix.tokens.size())};
    for (int i = 0; i < cfg.max_new_tokens; ++i) {
        std::vector<double> row = lm.next_dist(out.tokens).probs();
        count_call(stats, true, 1);
        warp_in_place(row, cfg.warp_target);
        const Token t = Token(rng.categorical(row));
        out.tokens.push_back(t);
        if (stats != nullptr) {
            stats->iterations += 1;
            stats->accepted_lengths.push_back(0);
            stats->tokens_emitted += 1;
        }
        if (cfg.stop_token && t == *cfg.stop_token) break;
    }
    return out;
}

namespace {

struct Beam {
    std::vector<Token> tokens; // generated part only
    double score = 0.0;
    bool finished = false;
};

struct CallCounter {
    RunStats * stats = nullptr;
    bool large = true;
};

// shared engine for the beam [OP] and the mjsd draft generator
std::vector<Beam> beam_search(const TabularLM & lm, std::span<const Token> prefix, int num_beams,
                              int steps, BeamMode mode, const WarpSpec & warp,
                              std::optional<Token> stop_token, Rng & rng, CallCounter counter) {
    std::vector<Beam> beams{Beam{}};
    std::vector<Token> ctx(prefix.begin(), prefix.end());

    for (int step = 0; step < steps; ++step) {
        std::vector<const Beam *> active;
        for (const Beam & b : beams) {
            if (!b.finished) active.push_back(&b);
        }
        if (active.empty()) break;

        // one batched model evaluation over all unfinished beams
        std::vector<std::vector<double>> rows;
        rows.reserve(active.size());
        for (const Beam * b : active) {
            ctx.resize(prefix.size());
            ctx.insert(ctx.end(), b->tokens.begin(), b->tokens.end());
            std::vector<double> row = lm.next_dist(ctx).probs();
            warp_in_place(row, warp);
            rows.push_back(std::move(row));
        }
        count_call(counter.stats, counter.large, long(active.size()));

        std::vector<Beam> next;
        for (const Beam & b : beams) {
            if (b.finished) next.push_back(b);
        }

        if (mode == BeamMode::deterministic) {
            std::vector<Beam> candidates = next;
            for (size_t k = 0; k < active.size(); ++k) {
                for (int v = 0; v < lm.vocab_size(); ++v) {
                    const double p = rows[k][size_t(v)];
                    if (p <= 0.0) continue;
                    Beam child;
                    child.tokens = active[k]->tokens;
                    child.tokens.push_back(Token(v));
                    child.score    = active[k]->score + std::log(p);
                    child.finished = stop_token && Token(v) == *stop_token;
                    candidates.push_back(std::move(child));
                }
            }
            std::sort(candidates.begin(), candidates.end(), [](const Beam & a, const Beam & b) {
                if (a.score != b.score) return a.score > b.score;
                return a.tokens < b.tokens;
            });
            if (int(candidates.size()) > num_beams) candidates.resize(size_t(num_beams));
            beams = std::move(candidates);
        } else {
            // stochastic beam sampling: joint distribution over
            // (unfinished beam, next token), weights proportional to the
            // beam's joint likelihood times the warped next-token row
            double max_score = kNegInf;
            for (const Beam * b : active) max_score = std::max(max_score, b->score);
            std::vector<double> flat(active.size() * size_t(lm.vocab_size()), 0.0);
            for (size_t k = 0; k < active.size(); ++k) {
                const double w = std::exp(active[k]->score - max_score);
                for (int v = 0; v < lm.vocab_size(); ++v) {
                    flat[k * size_t(lm.vocab_size()) + size_t(v)] = w * rows[k][size_t(v)];
                }
            }
            std::vector<Beam> children;
            for (int m = int(next.size()); m < num_beams; ++m) {
                const int flat_idx = rng.categorical(flat);
                const size_t k = size_t(flat_idx) / size_t(lm.vocab_size());
                const int    v = flat_idx % lm.vocab_size();
                Beam child;
                child.tokens = active[k]->tokens;
                child.tokens.push_back(Token(v));
                child.score = active[k]->score + std::log(rows[k][size_t(v)]);
                children.push_back(std::move(child));
            }
            beams = std::move(next);
            beams.insert(beams.end(), std::make_move_iterator(children.begin()),
                         std::make_move_iterator(children.end()));
        }
    }

    std::sort(beams.begin(), beams.end(), [](const Beam & a, const Beam & b) {
        if (a.score != b.score) return a.score > b.score;
        return a.tokens < b.tokens;
    });
    return beams;
}

} // namespace

std::vector<BeamCandidate> beam_decode(const TabularLM & lm, const TokenSeq & prefix,
                                       const DecodeConfig & cfg, RunStats * stats) {
    cfg.validate();
    Rng rng(cfg.seed);
    const auto beams = beam_search(lm, prefix.tokens, cfg.num_beams, cfg.max_new_tokens, cfg.beam_mode,
                                   warp_for(lm, cfg), cfg.stop_token, rng, CallCounter{stats, true});
    std::vector<BeamCandidate> out;
    out.reserve(beams.size());
    for (const Beam & b : beams) {
        TokenSeq seq{prefix.tokens, int(prefix.tokens.size())};
        seq.tokens.insert(seq.tokens.end(), b.tokens.begin(), b.tokens.end());
        out.push_back(BeamCandidate{std::move(seq), b.score});
    }
    if (stats != nullptr) {
        stats->iterations += cfg.max_new_tokens;
        for (int i = 0; i < cfg.max_new_tokens; ++i) stats->accepted_lengths.push_back(0);
    }
    return out;
}

namespace {

// Depth-first enumeration of all vocab^depth blocks in lexicographic
// order. Probabilities multiply raw row entries directly (no log-exp
// round trip) and a zero factor prunes the whole subtree.
struct BlockEnum {
    const TabularLM & lm;
    int depth;
    long * row_queries;

    template <typename Fn>
    void walk(std::vector<Token> & ctx, std::vector<Token> & block, double acc, const Fn & fn) {
        if (int(block.size()) == depth) {
            fn(block, acc);
            return;
        }
        if (acc == 0.0) {
            // zero-probability subtree: emit without querying deeper rows
            block.push_back(0);
            for (Token v = 0; v < lm.vocab_size(); ++v) {
                block.back() = v;
                walk(ctx, block, 0.0, fn);
            }
            block.pop_back();
            return;
        }
        const Distribution & row = lm.next_dist(ctx);
        if (row_queries != nullptr) ++*row_queries;
        block.push_back(0);
        for (Token v = 0; v < lm.vocab_size(); ++v) {
            block.back() = v;
            ctx.push_back(v);
            walk(ctx, block, acc * row.at(v), fn);
            ctx.pop_back();
        }
        block.pop_back();
    }
};

void check_enum_budget(int vocab_size, int depth, long budget, const char * who) {
    double states = 1.0;
    for (int i = 0; i < depth; ++i) states *= double(vocab_size);
    if (states > double(budget)) {
        throw BudgetExceededError(std::string(who) + ": vocab^" + std::to_string(depth) + " = " +
                                  std::to_string(states) + " exceeds enumeration budget " + std::to_string(budget));
    }
}

} // namespace

TokenSeq mjgd_decode(const TabularLM & p_lm, const TokenSeq & prefix, int block_len,
                     const DecodeConfig & cfg, RunStats * stats) {
    cfg.validate();
    if (block_len < 1) throw std::invalid_argument("mjgd_decode: block length must be >= 1");
    check_enum_budget(p_lm.vocab_size(), block_len, cfg.enum_budget, "mjgd_decode");

    Rng rng(cfg.seed);
    TokenSeq out{prefix.tokens, int(prefix.tokens.size())};
    const long n_blocks = [&] {
        long n = 1;
        for (int i = 0; i < block_len; ++i) n *= p_lm.vocab_size();
        return n;
    }();

    while (out.generated_count() < cfg.max_new_tokens) {
        long queries = 0;
        std::vector<Token> best;
        std::vector<Token> chosen;

        if (cfg.warp_target.argmax) {
            // top-k/nucleus keep the most probable block, so argmax of the
            // warped joint is argmax of the raw joint; strictly-greater
            // keeps the first (lexicographically smallest) block on ties
            double best_p = -1.0;
            std::vector<Token> ctx = out.tokens;
            std::vector<Token> block;
            BlockEnum{p_lm, block_len, &queries}.walk(ctx, block, 1.0, [&](const std::vector<Token> & b, double p) {
                if (p > best_p) {
                    best_p = p;
                    best   = b;
                }
            });
            chosen = best;
        } else {
            std::vector<double> joint;
            joint.reserve(size_t(n_blocks));
            std::vector<Token> ctx = out.tokens;
            std::vector<Token> block;
            BlockEnum{p_lm, block_len, &queries}.walk(ctx, block, 1.0,
                                                      [&](const std::vector<Token> &, double p) { joint.push_back(p); });
            warp_in_place(joint, cfg.warp_target);
            long idx = rng.categorical(joint);
            chosen.resize(size_t(block_len));
            for (int i = block_len - 1; i >= 0; --i) {
                chosen[size_t(i)] = Token(idx % p_lm.vocab_size());
                idx /= p_lm.vocab_size();
            }
        }

        if (stats != nullptr) {
            stats->large_model_calls += int(queries);
            stats->large_model_inputs += queries;
            stats->iterations += 1;
            stats->accepted_lengths.push_back(block_len - 1);
        }
        bool stopped = false;
        for (Token t : chosen) {
            out.tokens.push_back(t);
            if (stats != nullptr) stats->tokens_emitted += 1;
            if (cfg.stop_token && t == *cfg.stop_token) {
                stopped = true;
                break;
            }
        }
        if (stopped) break;
    }

    // the final block may overshoot N; keep the first N tokens
    const int limit = prefix.prefix_len + cfg.max_new_tokens;
    if (int(out.tokens.size()) > limit) {
        if (stats != nullptr) stats->tokens_emitted -= int(out.tokens.size()) - limit;
        out.tokens.resize(size_t(limit));
    }
    return out;
}

double optimal_suffix_score(const TabularLM & p_lm, std::span<const Token> prefix,
                            std::span<const Token> block, int horizon, long enum_budget) {
    if (horizon < 0) throw std::invalid_argument("optimal_suffix_score: horizon must be >= 0");
    check_enum_budget(p_lm.vocab_size(), horizon, enum_budget, "optimal_suffix_score");

    const double block_lp = joint_logprob(p_lm, prefix, block);
    if (horizon == 0) return block_lp;
    if (std::isinf(block_lp)) return kNegInf;

    std::vector<Token> ctx(prefix.begin(), prefix.end());
    ctx.insert(ctx.end(), block.begin(), block.end());
    double best = 0.0; // best future probability, linear domain
    std::vector<Token> future;
    BlockEnum{p_lm, horizon, nullptr}.walk(ctx, future, 1.0, [&](const std::vector<Token> &, double p) {
        if (p > best) best = p;
    });
    if (best == 0.0) return kNegInf;
    return block_lp + std::log(best);
}

Distribution residual_distribution(const Distribution & p, const Distribution & q) {
    if (p.size() != q.size()) throw std::invalid_argument("residual_distribution: size mismatch");
    std::vector<double> res(size_t(p.size()), 0.0);
    double total = 0.0;
    for (int i = 0; i < p.size(); ++i) {
        res[size_t(i)] = std::max(0.0, p.at(i) - q.at(i));
        total += res[size_t(i)];
    }
    if (!(total > 0.0)) {
        throw ZeroResidualError("residual_distribution: p <= q elementwise, nothing to resample");
    }
    for (double & r : res) r /= total;
    return Distribution::normalized(std::move(res));
}

StepOutcome vanilla_spec_step(const TabularLM & q_lm, const TabularLM & p_lm,
                              std::span<const Token> prefix, const DecodeConfig & cfg, Rng & rng,
                              RunStats * stats) {
    cfg.validate();
    const int gamma = cfg.gamma;

    // step 1: draft gamma tokens autoregressively from the warped q
    std::vector<Token> ctx(prefix.begin(), prefix.end());
    std::vector<Token> draft;
    std::vector<std::vector<double>> q_rows;
    draft.reserve(size_t(gamma));
    for (int t = 0; t < gamma; ++t) {
        std::vector<double> row = q_lm.next_dist(ctx).probs();
        count_call(stats, false, 1);
        warp_in_place(row, cfg.warp_draft);
        const Token x = Token(rng.categorical(row));
        draft.push_back(x);
        ctx.push_back(x);
        q_rows.push_back(std::move(row));
    }

    // step 2: one batched target evaluation over the gamma+1 prefixes
    std::vector<std::vector<double>> p_rows;
    ctx.assign(prefix.begin(), prefix.end());
    for (int t = 0; t <= gamma; ++t) {
        std::vector<double> row = p_lm.next_dist(ctx).probs();
        warp_in_place(row, cfg.warp_target);
        p_rows.push_back(std::move(row));
        if (t < gamma) ctx.push_back(draft[size_t(t)]);
    }
    count_call(stats, true, gamma + 1);

    // step 3: accept each token with probability min(1, p/q); the strict
    // comparison makes a zero target probability reject surely
    StepOutcome out;
    double q_acc = 0.0, p_acc = 0.0;
    int reject_at = -1;
    for (int t = 0; t < gamma; ++t) {
        const double qp = q_rows[size_t(t)][size_t(draft[size_t(t)])];
        const double pp = p_rows[size_t(t)][size_t(draft[size_t(t)])];
        q_acc += qp > 0.0 ? std::log(qp) : kNegInf;
        p_acc += pp > 0.0 ? std::log(pp) : kNegInf;
        out.draft_q_logprobs.push_back(q_acc);
        out.target_p_logprobs.push_back(p_acc);
        const double ratio  = std::min(1.0, pp / qp);
        const bool accepted = rng.uniform() < ratio;
        out.accept_flags.push_back(accepted);
        if (!accepted) {
            reject_at = t;
            break;
        }
        out.accepted_tokens.push_back(draft[size_t(t)]);
    }
    out.eta = int(out.accepted_tokens.size());

    if (reject_at >= 0) {
        const Distribution p_dist = Distribution::normalized(p_rows[size_t(reject_at)]);
        const Distribution q_dist = Distribution::normalized(q_rows[size_t(reject_at)]);
        const Distribution res    = residual_distribution(p_dist, q_dist);
        out.resampled_token       = Token(rng.categorical(res.probs()));
    } else {
        out.resampled_token = Token(rng.categorical(p_rows[size_t(gamma)]));
    }
    if (stats != nullptr) {
        stats->iterations += 1;
        stats->accepted_lengths.push_back(out.eta);
        stats->tokens_emitted += out.eta + 1;
    }
    return out;
}

StepOutcome mjsd_step(const TabularLM & q_lm, const TabularLM & p_lm, std::span<const Token> prefix,
                      const DecodeConfig & cfg, Rng & rng, RunStats * stats) {
    cfg.validate();
    const int gamma = cfg.gamma;

    // draft: beam decoding with the small model, gamma steps
    const auto beams = beam_search(q_lm, prefix, cfg.num_beams, gamma, cfg.beam_mode, cfg.warp_draft,
                                   std::nullopt, rng, CallCounter{stats, false});
    size_t pick = 0;
    if (cfg.sample_draft_beam && beams.size() > 1) {
        double max_score = kNegInf;
        for (const Beam & b : beams) max_score = std::max(max_score, b.score);
        std::vector<double> weights;
        weights.reserve(beams.size());
        for (const Beam & b : beams) weights.push_back(std::exp(b.score - max_score));
        pick = size_t(rng.categorical(weights));
    }
    const std::vector<Token> & draft = beams[pick].tokens;
    const int n_draft = int(draft.size());

    // one batched target evaluation over the gamma+1 prefixes
    std::vector<Token> ctx(prefix.begin(), prefix.end());
    std::vector<std::vector<double>> p_rows_raw;
    for (int t = 0; t <= n_draft; ++t) {
        p_rows_raw.push_back(p_lm.next_dist(ctx).probs());
        if (t < n_draft) ctx.push_back(draft[size_t(t)]);
    }
    count_call(stats, true, n_draft + 1);

    // cumulative joint likelihoods of every draft prefix; the ratio uses
    // raw p and q unless cfg.mjsd_warped_ratio
    StepOutcome out;
    ctx.assign(prefix.begin(), prefix.end());
    double q_acc = 0.0, p_acc = 0.0;
    int eta = 0;
    for (int j = 1; j <= n_draft; ++j) {
        const Token x = draft[size_t(j - 1)];
        double qp, pp;
        if (cfg.mjsd_warped_ratio) {
            std::vector<double> q_row = q_lm.next_dist(ctx).probs();
            warp_in_place(q_row, cfg.warp_draft);
            std::vector<double> p_row = p_rows_raw[size_t(j - 1)];
            warp_in_place(p_row, cfg.warp_target);
            qp = q_row[size_t(x)];
            pp = p_row[size_t(x)];
        } else {
            qp = q_lm.next_dist(ctx).at(x);
            pp = p_rows_raw[size_t(j - 1)][size_t(x)];
        }
        q_acc += qp > 0.0 ? std::log(qp) : kNegInf;
        p_acc += pp > 0.0 ? std::log(pp) : kNegInf;
        out.draft_q_logprobs.push_back(q_acc);
        out.target_p_logprobs.push_back(p_acc);
        // min(1, p_j/q_j) > tau, evaluated in the log domain
        const double ratio = p_acc >= q_acc ? 1.0 : std::exp(p_acc - q_acc);
        const bool passes  = ratio > cfg.tau;
        out.accept_flags.push_back(passes);
        if (passes) eta = j; // longest accepted prefix so far
        ctx.push_back(x);
    }
    out.eta = eta;
    out.accepted_tokens.assign(draft.begin(), draft.begin() + eta);

    // bonus token from the target row at position eta+1 (already computed)
    std::vector<double> bonus_row = p_rows_raw[size_t(eta)];
    warp_in_place(bonus_row, cfg.warp_target);
    out.resampled_token = Token(rng.categorical(bonus_row));

    if (stats != nullptr) {
        stats->iterations += 1;
        stats->accepted_lengths.push_back(out.eta);
        stats->tokens_emitted += out.eta + 1;
    }
    return out;
}

std::pair<TokenSeq, RunStats> run_decoder(DecoderKind kind, const TabularLM * q_lm,
                                          const TabularLM & p_lm, const TokenSeq & prefix,
                                          const DecodeConfig & cfg) {
    cfg.validate();
    RunStats stats;

    switch (kind) {
        case DecoderKind::greedy: {
            TokenSeq out = greedy_decode(p_lm, prefix, cfg, &stats);
            return {std::move(out), std::move(stats)};
        }
        case DecoderKind::beam: {
            auto candidates = beam_decode(p_lm, prefix, cfg, &stats);
            stats.tokens_emitted = candidates.front().seq.generated_count();
            return {std::move(candidates.front().seq), std::move(stats)};
        }
        case DecoderKind::mjgd: {
            TokenSeq out = mjgd_decode(p_lm, prefix, cfg.mjgd_block, cfg, &stats);
            return {std::move(out), std::move(stats)};
        }
        case DecoderKind::vanilla_spec:
        case DecoderKind::mjsd: {
            if (q_lm == nullptr) throw std::invalid_argument("run_decoder: speculative kinds need a draft model");
            Rng rng(cfg.seed);
            TokenSeq out{prefix.tokens, int(prefix.tokens.size())};
            bool stopped = false;
            while (!stopped && out.generated_count() < cfg.max_new_tokens) {
                const StepOutcome step = kind == DecoderKind::vanilla_spec
                                             ? vanilla_spec_step(*q_lm, p_lm, out.tokens, cfg, rng, &stats)
                                             : mjsd_step(*q_lm, p_lm, out.tokens, cfg, rng, &stats);
                std::vector<Token> emitted = step.accepted_tokens;
                emitted.push_back(step.resampled_token);
                for (Token t : emitted) {
                    out.tokens.push_back(t);
                    if (cfg.stop_token && t == *cfg.stop_token) {
                        stopped = true;
                        break;
                    }
                }
            }
            const int limit = prefix.prefix_len + cfg.max_new_tokens;
            if (int(out.tokens.size()) > limit) out.tokens.resize(size_t(limit));
            stats.tokens_emitted = out.generated_count();
            return {std::move(out), std::move(stats)};
        }
    }
    throw std::invalid_argument("run_decoder: unknown decoder kind");
}

} // namespace specdec
