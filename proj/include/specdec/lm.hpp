#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "specdec/errors.hpp"

namespace specdec {

using Token = int32_t;

// Token vocabulary: ids are 0..size-1. Glyphs are optional display strings
// (used by the char-level demo corpus helper).
struct Vocab {
    int size = 0;
    std::vector<std::string> glyphs;

    bool contains(Token t) const { return t >= 0 && t < size; }
};

// Normalized probability vector over a vocabulary (or any finite index
// space). Entries are >= 0 and sum to 1 within kSumTol; construction
// normalizes, queries may assert.
class Distribution {
  public:
    static constexpr double kSumTol = 1e-12;

    // divide by the total mass (total must be > 0)
    static Distribution normalized(std::vector<double> probs);

    // accept as-is, asserting the mass is already 1 within kSumTol
    static Distribution checked(std::vector<double> probs);

    int size() const { return int(probs_.size()); }
    double at(int i) const { return probs_[size_t(i)]; }
    const std::vector<double> & probs() const { return probs_; }

  private:
    explicit Distribution(std::vector<double> probs) : probs_(std::move(probs)) {}
    std::vector<double> probs_;
};

// total variation distance between two equally sized probability vectors
double tv_distance(std::span<const double> a, std::span<const double> b);

// Warping pipeline applied to a distribution before sampling. The stages
// run in a fixed order: top-k, then nucleus, then argmax.
//  - top_k      keeps the k most probable entries and renormalizes
//  - nucleus_p  keeps the smallest descending-order head whose cumulative
//               probability is strictly greater than nucleus_p
//  - argmax     collapses to a one-hot at the most probable entry
// All ties resolve toward the smallest index.
struct WarpSpec {
    std::optional<int> top_k;
    std::optional<double> nucleus_p;
    bool argmax = false;

    bool is_identity() const { return !top_k && !nucleus_p && !argmax; }
};

// In-place warp over a raw weight vector; renormalizes. Shared by every
// sampling path so equal inputs give bit-equal outputs.
void warp_in_place(std::vector<double> & probs, const WarpSpec & warp);

Distribution apply_warp(const Distribution & dist, const WarpSpec & warp);

// A token sequence plus the boundary between the seed prefix and
// generated tokens.
struct TokenSeq {
    std::vector<Token> tokens;
    int prefix_len = 0;

    int generated_count() const { return int(tokens.size()) - prefix_len; }
    std::span<const Token> prefix() const {
        return std::span<const Token>(tokens.data(), size_t(prefix_len));
    }
    std::span<const Token> generated() const {
        return std::span<const Token>(tokens.data() + prefix_len, tokens.size() - size_t(prefix_len));
    }
};

enum class ModelRole { target, draft };

// Exact conditional next-token model keyed by bounded trailing context.
// Contexts shorter than `order` (near the sequence start) are distinct
// keys; there is no padding token. The table is immutable after
// construction and safe for concurrent reads.
class TabularLM {
  public:
    using Table = std::map<std::vector<Token>, Distribution>;

    TabularLM(Vocab vocab, int order, ModelRole role, Table table);

    const Vocab & vocab() const { return vocab_; }
    int vocab_size() const { return vocab_.size; }
    int order() const { return order_; }
    ModelRole role() const { return role_; }
    const Table & table() const { return table_; }

    // trailing min(order, len) tokens of `context`
    std::vector<Token> context_key(std::span<const Token> context) const;

    // stored row for the context; throws MissingContextError if absent
    const Distribution & next_dist(std::span<const Token> context) const;

    // Closed-world check: every token with positive probability in any row
    // must lead to a context that is itself in the table. Throws
    // ModelLoadError naming the offending row.
    void check_closed() const;

  private:
    Vocab vocab_;
    int order_;
    ModelRole role_;
    Table table_;
};

// Chain-rule log-likelihood of `continuation` after `prefix`, optionally
// with each per-step row warped first. Returns -infinity as soon as a
// factor is zero (later contexts are not queried).
double joint_logprob(const TabularLM & lm, std::span<const Token> prefix,
                     std::span<const Token> continuation, const WarpSpec * warp = nullptr);

// exp(-joint_logprob / N) over the generated tokens of `seq`, scored with
// the unwarped model. Returns +infinity for a zero-probability sequence.
double perplexity(const TabularLM & lm, const TokenSeq & seq);

// Deterministic fixture generator. Produces a (target, draft) pair over
// every context of length 0..order. Draft rows are the convex mixture
// (1-divergence_knob)*target_row + divergence_knob*noise_row; knob 0
// makes the draft an exact copy of the target.
std::pair<TabularLM, TabularLM> make_random_lm_pair(int vocab_size, int order,
                                                    double divergence_knob, uint64_t seed);

// Deterministic chain model: every context maps one-hot to
// (last_token + 1) % vocab_size; the empty context maps to token 0.
TabularLM make_chain_lm(int vocab_size, ModelRole role = ModelRole::target);

// Model file format: JSON {vocab_size, order, rows:[{context, probs}]}.
// Rows must sum to 1 within 1e-9 at load or the load fails; loaded rows
// are renormalized and the closed-world check runs.
TabularLM load_model_file(const std::string & path, ModelRole role);
void save_model_file(const TabularLM & lm, const std::string & path);

// Char-level demo corpus: maps each distinct character to a token id in
// order of first appearance; one sequence per input line.
struct TextCorpus {
    Vocab vocab;
    std::vector<std::vector<Token>> sequences;
};
TextCorpus corpus_from_text(const std::string & text);

} // namespace specdec
