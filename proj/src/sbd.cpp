#include "specdec/sbd.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace specdec {

ProductDist layer_beam_distribution(std::span<const Distribution * const> rows,
                                    std::span<const double> scores) {
    if (rows.size() != scores.size() || rows.empty()) {
        throw std::invalid_argument("layer_beam_distribution: rows/scores size mismatch");
    }
    double score_total = 0.0;
    for (double s : scores) {
        if (s < 0.0) throw std::invalid_argument("layer_beam_distribution: negative beam score");
        score_total += s;
    }
    if (!(score_total > 0.0)) {
        throw AllRejectedError("layer_beam_distribution: every beam score is zero");
    }

    ProductDist dist;
    dist.parents = int(rows.size());
    dist.vocab   = rows[0]->size();
    dist.probs.resize(size_t(dist.parents) * size_t(dist.vocab), 0.0);
    double total = 0.0;
    for (int k = 0; k < dist.parents; ++k) {
        if (scores[size_t(k)] == 0.0) continue;
        for (int v = 0; v < dist.vocab; ++v) {
            const double m = scores[size_t(k)] * rows[size_t(k)]->at(v);
            dist.probs[size_t(dist.index(k, v))] = m;
            total += m;
        }
    }
    for (double & p : dist.probs) p /= total;
    return dist;
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

namespace {

// Distinct parent sequences with aggregated beam scores. Sampling with
// replacement duplicates tree nodes; the layer distribution is over
// sequences, so duplicates merge and their scores add (a sequence drawn
// twice carries twice the weight, matching i.i.d. beam sampling).
struct ParentGroups {
    std::vector<std::vector<Token>> seqs;
    std::vector<double> scores;
};

ParentGroups group_parents(std::span<const std::vector<Token> * const> seqs,
                           std::span<const double> scores) {
    ParentGroups groups;
    std::map<std::vector<Token>, size_t> index;
    for (size_t k = 0; k < seqs.size(); ++k) {
        const auto [it, fresh] = index.emplace(*seqs[size_t(k)], groups.seqs.size());
        if (fresh) {
            groups.seqs.push_back(*seqs[size_t(k)]);
            groups.scores.push_back(scores[size_t(k)]);
        } else {
            groups.scores[it->second] += scores[size_t(k)];
        }
    }
    return groups;
}

// layer beam distribution over the grouped parents under `lm`
ProductDist grouped_layer_dist(const TabularLM & lm, const ParentGroups & groups) {
    std::vector<const Distribution *> rows;
    rows.reserve(groups.seqs.size());
    for (const auto & seq : groups.seqs) rows.push_back(&lm.next_dist(seq));
    return layer_beam_distribution(rows, groups.scores);
}

} // namespace

DraftTree build_draft_tree(const TabularLM & q_lm, const std::vector<std::vector<Token>> & inputs,
                           int max_width, int gamma, Rng & rng, RunStats * stats) {
    if (inputs.empty() || int(inputs.size()) > max_width) {
        throw std::invalid_argument("build_draft_tree: need 1 <= inputs <= max_width");
    }
    DraftTree tree;
    tree.roots = inputs;

    // parent weights: unit for the fresh inputs, then each node's own
    // sampling probability (mirrors the target-side score bookkeeping)
    std::vector<const std::vector<Token> *> parent_seqs;
    std::vector<double> parent_scores;
    for (const auto & s : inputs) {
        parent_seqs.push_back(&s);
        parent_scores.push_back(1.0);
    }

    for (int layer = 0; layer < gamma; ++layer) {
        const ParentGroups groups = group_parents(parent_seqs, parent_scores);
        count_call(stats, false, long(parent_seqs.size()));

        DraftLayer out;
        out.small_dist = grouped_layer_dist(q_lm, groups);
        out.nodes.reserve(size_t(max_width));
        for (int j = 0; j < max_width; ++j) {
            const int flat = out.small_dist.sample(rng);
            DraftNode node;
            node.parent = flat / out.small_dist.vocab;
            node.token  = Token(flat % out.small_dist.vocab);
            node.q_prob = out.small_dist.probs[size_t(flat)];
            node.seq    = groups.seqs[size_t(node.parent)];
            node.seq.push_back(node.token);
            out.nodes.push_back(std::move(node));
        }
        tree.layers.push_back(std::move(out));

        parent_seqs.clear();
        parent_scores.clear();
        for (const DraftNode & node : tree.layers.back().nodes) {
            parent_seqs.push_back(&node.seq);
            parent_scores.push_back(node.q_prob);
        }
    }
    return tree;
}

LayerVerdict verify_layer(const ProductDist & target_dist, const ProductDist & small_dist,
                          std::span<const DraftNode> nodes,
                          std::span<const std::vector<Token>> parent_seqs, int min_width,
                          int max_width, Rng & rng) {
    if (target_dist.probs.size() != small_dist.probs.size()) {
        throw std::invalid_argument("verify_layer: product spaces differ");
    }
    if (int(parent_seqs.size()) != target_dist.parents) {
        throw std::invalid_argument("verify_layer: parent sequence list does not match distribution");
    }

    LayerVerdict verdict;
    verdict.scores.assign(nodes.size(), 0.0);

    std::vector<double> p_state = target_dist.probs;
    const auto residual_update = [&]() {
        double total = 0.0;
        for (size_t i = 0; i < p_state.size(); ++i) {
            p_state[i] = std::max(0.0, p_state[i] - small_dist.probs[i]);
            total += p_state[i];
        }
        if (!(total > 0.0)) {
            throw AllRejectedError("verify_layer: residual has zero mass");
        }
        for (double & p : p_state) p /= total;
    };

    for (size_t j = 0; j < nodes.size(); ++j) {
        const int idx  = target_dist.index(nodes[j].parent, nodes[j].token);
        const double q = small_dist.probs[size_t(idx)];
        const double p = p_state[size_t(idx)];
        if (rng.uniform() < p / q) {
            verdict.accepted.push_back(nodes[j].seq);
            verdict.scores[j] = target_dist.probs[size_t(idx)];
            verdict.accept_count += 1;
            p_state = target_dist.probs;
        } else {
            // score 0 marks rejection and zeroes out the node's children
            residual_update();
        }
    }

    if (verdict.accept_count < min_width) {
        verdict.terminate = true;
        // pad with residual draws; p resets to the target distribution
        // after every draw
        int cnt = verdict.accept_count;
        while (cnt < max_width) {
            const int flat = rng.categorical(p_state);
            std::vector<Token> seq = parent_seqs[size_t(flat) / size_t(target_dist.vocab)];
            seq.push_back(Token(flat % target_dist.vocab));
            verdict.accepted.push_back(std::move(seq));
            ++cnt;
            p_state = target_dist.probs;
        }
    }
    return verdict;
}

std::vector<std::vector<Token>> sbd_step(const TabularLM & q_lm, const TabularLM & p_lm,
                                         const std::vector<std::vector<Token>> & inputs, int min_width,
                                         int max_width, int gamma, Rng & rng, RunStats * stats) {
    if (inputs.empty() || int(inputs.size()) > max_width) {
        throw std::invalid_argument("sbd_step: need 1 <= inputs <= max_width");
    }
    if (min_width < 1 || min_width > max_width || gamma < 1) {
        throw std::invalid_argument("sbd_step: need 1 <= min_width <= max_width and gamma >= 1");
    }

    DraftTree tree = build_draft_tree(q_lm, inputs, max_width, gamma, rng, stats);

    // one batched target evaluation covering every tree context: the
    // inputs (layer-1 parents) plus all gamma * max_width draft nodes
    count_call(stats, true, long(inputs.size()) + long(gamma) * long(max_width));

    std::vector<const std::vector<Token> *> parent_seqs;
    std::vector<double> parent_scores;
    for (const auto & s : inputs) {
        parent_seqs.push_back(&s);
        parent_scores.push_back(1.0);
    }

    for (int layer = 0; layer < gamma; ++layer) {
        const ParentGroups groups = group_parents(parent_seqs, parent_scores);
        const ProductDist target  = grouped_layer_dist(p_lm, groups);
        const DraftLayer & drafts = tree.layers[size_t(layer)];
        LayerVerdict verdict =
            verify_layer(target, drafts.small_dist, drafts.nodes, groups.seqs, min_width, max_width, rng);
        if (stats != nullptr) {
            stats->iterations += 1;
            stats->accepted_lengths.push_back(verdict.accept_count);
        }
        if (verdict.terminate) return std::move(verdict.accepted);
        parent_seqs.clear();
        parent_scores.clear();
        for (size_t j = 0; j < drafts.nodes.size(); ++j) {
            parent_seqs.push_back(&drafts.nodes[j].seq);
            parent_scores.push_back(verdict.scores[j]);
        }
    }

    // all layers accepted: sample the next layer from the target
    const ParentGroups groups = group_parents(parent_seqs, parent_scores);
    const ProductDist next    = grouped_layer_dist(p_lm, groups);
    std::vector<std::vector<Token>> out;
    out.reserve(size_t(max_width));
    for (int j = 0; j < max_width; ++j) {
        const int flat = next.sample(rng);
        std::vector<Token> seq = groups.seqs[size_t(flat) / size_t(next.vocab)];
        seq.push_back(Token(flat % next.vocab));
        out.push_back(std::move(seq));
    }
    return out;
}

WidthLaw uniform_width_law(int min_width, int max_width) {
    if (min_width < 1 || max_width < min_width) {
        throw std::invalid_argument("uniform_width_law: need 1 <= min_width <= max_width");
    }
    const int span = max_width - min_width + 1;
    return [min_width, span](Rng & rng) { return min_width + std::min(span - 1, int(rng.uniform() * span)); };
}

std::vector<std::vector<Token>> rwbd_reference(const TabularLM & p_lm,
                                               const std::vector<std::vector<Token>> & inputs,
                                               int min_width, int max_width, const WidthLaw & width_law,
                                               int steps, Rng & rng, RunStats * stats) {
    if (inputs.empty() || int(inputs.size()) > max_width) {
        throw std::invalid_argument("rwbd_reference: need 1 <= inputs <= max_width");
    }
    std::vector<std::vector<Token>> particles = inputs;
    for (int step = 0; step < steps; ++step) {
        const int m = width_law(rng);
        if (m < min_width || m > max_width) {
            throw std::invalid_argument("rwbd_reference: width law left [min_width, max_width]");
        }
        std::vector<const std::vector<Token> *> seqs;
        std::vector<double> ones;
        for (const auto & seq : particles) {
            seqs.push_back(&seq);
            ones.push_back(1.0);
        }
        const ParentGroups groups = group_parents(seqs, ones);
        const ProductDist dist    = grouped_layer_dist(p_lm, groups);
        count_call(stats, true, long(particles.size()));

        std::vector<std::vector<Token>> next;
        next.reserve(size_t(m));
        for (int j = 0; j < m; ++j) {
            const int flat = dist.sample(rng);
            std::vector<Token> seq = groups.seqs[size_t(flat) / size_t(dist.vocab)];
            seq.push_back(Token(flat % dist.vocab));
            next.push_back(std::move(seq));
        }
        particles = std::move(next);
        if (stats != nullptr) stats->iterations += 1;
    }
    return particles;
}

TokenSeq sbd_decode(const TabularLM & q_lm, const TabularLM & p_lm, const TokenSeq & prefix,
                    int min_width, int max_width, int gamma, int max_new_tokens, uint64_t seed,
                    RunStats * stats) {
    Rng rng(seed);
    // duplicated prefixes merge into one unit-weight particle group, so
    // seeding with min_width copies leaves the sampling law unchanged
    std::vector<std::vector<Token>> inputs(size_t(std::max(min_width, 1)), prefix.tokens);
    const size_t target_len = prefix.tokens.size() + size_t(max_new_tokens);

    while (inputs.front().size() < target_len) {
        inputs = sbd_step(q_lm, p_lm, inputs, min_width, max_width, gamma, rng, stats);
    }

    // best sequence by raw target joint likelihood, smallest tokens on ties
    const std::vector<Token> * best = nullptr;
    double best_score = 0.0;
    for (const auto & seq : inputs) {
        const double score =
            joint_logprob(p_lm, prefix.tokens, std::span<const Token>(seq).subspan(prefix.tokens.size()));
        if (best == nullptr || score > best_score || (score == best_score && seq < *best)) {
            best       = &seq;
            best_score = score;
        }
    }

    TokenSeq out{*best, int(prefix.tokens.size())};
    if (out.tokens.size() > target_len) out.tokens.resize(target_len);
    if (stats != nullptr) stats->tokens_emitted = out.generated_count();
    return out;
}

} // namespace specdec
