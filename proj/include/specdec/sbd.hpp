#pragma once

#include <functional>
#include <span>
#include <vector>

#include "specdec/cost_model.hpp"
#include "specdec/lm.hpp"
#include "specdec/rng.hpp"

namespace specdec {

// Distribution over (parent, next-token) pairs, stored parent-major as a
// flat index map pair(k, v) -> probs[k * vocab + v]. Parents carrying a
// zero beam score contribute zero mass to all their extensions.
struct ProductDist {
    int parents = 0;
    int vocab   = 0;
    std::vector<double> probs;

    int index(int parent, int token) const { return parent * vocab + token; }
    double at(int parent, int token) const { return probs[size_t(index(parent, token))]; }
    int sample(Rng & rng) const { return rng.categorical(probs); }
};

// P_beam over one tree layer: mass of (parent k, token v) proportional to
// scores[k] * rows[k][v]. Throws AllRejectedError when every score is 0.
ProductDist layer_beam_distribution(std::span<const Distribution * const> rows,
                                    std::span<const double> scores);

// One node of the beam sampling tree. q_prob is the probability the
// small-model layer distribution assigned to this draw; it is the q that
// verification divides by.
struct DraftNode {
    Token token = 0;
    int parent  = 0;
    double q_prob = 0.0;
    std::vector<Token> seq; // materialized full sequence
};

struct DraftLayer {
    std::vector<DraftNode> nodes; // exactly M2, duplicates permitted
    ProductDist small_dist;       // the distribution the nodes were drawn from
};

// Beam sampling tree: layer 0 is the m' input sequences, layers 1..gamma
// hold M2 stochastically sampled extensions each.
struct DraftTree {
    std::vector<std::vector<Token>> roots;
    std::vector<DraftLayer> layers;
};

// Stochastic beam sampling with the small model: each layer draws M2
// i.i.d. (parent, token) pairs from the layer beam distribution. Input
// sequences enter with unit weights; deeper layers weight each node by
// its own sampling probability.
DraftTree build_draft_tree(const TabularLM & q_lm, const std::vector<std::vector<Token>> & inputs,
                           int max_width, int gamma, Rng & rng, RunStats * stats = nullptr);

// Verification outcome for one layer. `accepted` holds the surviving
// sequences in verification order; when terminate is true it was padded
// with residual draws to exactly M2 entries. `scores` carries the updated
// per-node beam scores (target beam probability for accepted nodes, 0 for
// rejected ones).
struct LayerVerdict {
    std::vector<std::vector<Token>> accepted;
    bool terminate = false;
    std::vector<double> scores;
    int accept_count = 0;
};

// Rejection-sampling verification of one layer: node j survives when
// u < p(s_j) / q(s_j) where p starts as the target layer distribution, is
// replaced by norm(max(0, p - q)) after each rejection and reset to the
// target distribution after each acceptance. If fewer than min_width
// nodes survive, the verdict terminates and pads with draws from the
// current p (reset to the target distribution after every draw) up to
// max_width.
LayerVerdict verify_layer(const ProductDist & target_dist, const ProductDist & small_dist,
                          std::span<const DraftNode> nodes,
                          std::span<const std::vector<Token>> parent_seqs, int min_width,
                          int max_width, Rng & rng);

// One sampling iteration: build the draft tree, evaluate the target model
// once over all tree contexts, verify layers in order and return the
// terminating layer's sequences; after a fully accepted tree, M2 fresh
// samples from the target's next-layer beam distribution.
std::vector<std::vector<Token>> sbd_step(const TabularLM & q_lm, const TabularLM & p_lm,
                                         const std::vector<std::vector<Token>> & inputs, int min_width,
                                         int max_width, int gamma, Rng & rng,
                                         RunStats * stats = nullptr);

using WidthLaw = std::function<int(Rng &)>;

WidthLaw uniform_width_law(int min_width, int max_width);

// Direct random-width beam sampler with the target model only: each step
// draws a width m from width_law and samples m sequences from the layer
// beam distribution. This is the semantic baseline sbd_step accelerates.
std::vector<std::vector<Token>> rwbd_reference(const TabularLM & p_lm,
                                               const std::vector<std::vector<Token>> & inputs,
                                               int min_width, int max_width, const WidthLaw & width_law,
                                               int steps, Rng & rng, RunStats * stats = nullptr);

// Iterates sbd_step from max(min_width, 1) copies of the prefix until the
// best sequence carries max_new_tokens generated tokens, then returns the
// candidate with the highest target joint likelihood, truncated.
TokenSeq sbd_decode(const TabularLM & q_lm, const TabularLM & p_lm, const TokenSeq & prefix,
                    int min_width, int max_width, int gamma, int max_new_tokens, uint64_t seed,
                    RunStats * stats = nullptr);

} // namespace specdec
