#include "specdec/lm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>

#include "json.hpp"

#include "specdec/rng.hpp"

namespace specdec {

static std::string key_to_string(std::span<const Token> key) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < key.size(); ++i) {
        if (i) os << ",";
        os << key[i];
    }
    os << "]";
    return os.str();
}

Distribution Distribution::normalized(std::vector<double> probs) {
    double total = 0.0;
    for (double p : probs) {
        if (p < 0.0 || !std::isfinite(p)) {
            throw std::invalid_argument("Distribution: negative or non-finite entry");
        }
        total += p;
    }
    if (!(total > 0.0)) {
        throw std::invalid_argument("Distribution: zero total mass");
    }
    for (double & p : probs) p /= total;
    return Distribution(std::move(probs));
}

Distribution Distribution::checked(std::vector<double> probs) {
    double total = 0.0;
    for (double p : probs) {
        if (p < 0.0 || !std::isfinite(p)) {
            throw std::invalid_argument("Distribution: negative or non-finite entry");
        }
        total += p;
    }
    if (std::abs(total - 1.0) > kSumTol) {
        throw std::invalid_argument("Distribution: mass " + std::to_string(total) + " outside tolerance");
    }
    return Distribution(std::move(probs));
}

double tv_distance(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i) acc += std::abs(a[i] - b[i]);
    return 0.5 * acc;
}

// indices sorted by probability descending, smallest index first on ties
static std::vector<int> descending_order(const std::vector<double> & probs) {
    std::vector<int> idx(probs.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int a, int b) {
        if (probs[size_t(a)] != probs[size_t(b)]) return probs[size_t(a)] > probs[size_t(b)];
        return a < b;
    });
    return idx;
}

static void renormalize(std::vector<double> & probs) {
    double total = 0.0;
    for (double p : probs) total += p;
    for (double & p : probs) p /= total;
}

void warp_in_place(std::vector<double> & probs, const WarpSpec & warp) {
    const int n = int(probs.size());

    if (warp.top_k && *warp.top_k < n) {
        const auto order = descending_order(probs);
        std::vector<char> keep(size_t(n), 0);
        for (int i = 0; i < *warp.top_k; ++i) keep[size_t(order[size_t(i)])] = 1;
        for (int i = 0; i < n; ++i) {
            if (!keep[size_t(i)]) probs[size_t(i)] = 0.0;
        }
        renormalize(probs);
    }

    if (warp.nucleus_p) {
        const auto order = descending_order(probs);
        // smallest head whose cumulative mass strictly exceeds nucleus_p;
        // if none does (nucleus_p = 1), the whole support is kept
        double cum  = 0.0;
        int    head = n;
        for (int i = 0; i < n; ++i) {
            cum += probs[size_t(order[size_t(i)])];
            if (cum > *warp.nucleus_p) {
                head = i + 1;
                break;
            }
        }
        std::vector<char> keep(size_t(n), 0);
        for (int i = 0; i < head; ++i) keep[size_t(order[size_t(i)])] = 1;
        for (int i = 0; i < n; ++i) {
            if (!keep[size_t(i)]) probs[size_t(i)] = 0.0;
        }
        renormalize(probs);
    }

    if (warp.argmax) {
        int best = 0;
        for (int i = 1; i < n; ++i) {
            if (probs[size_t(i)] > probs[size_t(best)]) best = i;
        }
        std::fill(probs.begin(), probs.end(), 0.0);
        probs[size_t(best)] = 1.0;
    }
}

Distribution apply_warp(const Distribution & dist, const WarpSpec & warp) {
    std::vector<double> probs = dist.probs();
    warp_in_place(probs, warp);
    return Distribution::normalized(std::move(probs));
}

TabularLM::TabularLM(Vocab vocab, int order, ModelRole role, Table table)
    : vocab_(std::move(vocab)), order_(order), role_(role), table_(std::move(table)) {
    if (vocab_.size < 2) throw std::invalid_argument("TabularLM: vocab size must be >= 2");
    if (order_ < 0) throw std::invalid_argument("TabularLM: order must be >= 0");
    for (const auto & [key, dist] : table_) {
        if (int(key.size()) > order_) {
            throw std::invalid_argument("TabularLM: context " + key_to_string(key) + " longer than order");
        }
        if (dist.size() != vocab_.size) {
            throw std::invalid_argument("TabularLM: row " + key_to_string(key) + " has wrong width");
        }
        for (Token t : key) {
            if (!vocab_.contains(t)) {
                throw std::invalid_argument("TabularLM: context " + key_to_string(key) + " has out-of-range token");
            }
        }
    }
}

std::vector<Token> TabularLM::context_key(std::span<const Token> context) const {
    const size_t keep = std::min(size_t(order_), context.size());
    return std::vector<Token>(context.end() - ptrdiff_t(keep), context.end());
}

const Distribution & TabularLM::next_dist(std::span<const Token> context) const {
    const auto key = context_key(context);
    const auto it  = table_.find(key);
    if (it == table_.end()) {
        throw MissingContextError("missing context " + key_to_string(key) +
                                  (role_ == ModelRole::draft ? " in draft model" : " in target model"));
    }
    return it->second;
}

void TabularLM::check_closed() const {
    for (const auto & [key, dist] : table_) {
        for (Token t = 0; t < vocab_.size; ++t) {
            if (dist.at(t) <= 0.0) continue;
            std::vector<Token> next(key);
            next.push_back(t);
            const auto succ = context_key(next);
            if (!table_.contains(succ)) {
                throw ModelLoadError("table not closed: context " + key_to_string(key) + " reaches missing context " +
                                     key_to_string(succ) + " via token " + std::to_string(t));
            }
        }
    }
}

double joint_logprob(const TabularLM & lm, std::span<const Token> prefix,
                     std::span<const Token> continuation, const WarpSpec * warp) {
    if (continuation.empty()) return 0.0;
    std::vector<Token> context(prefix.begin(), prefix.end());
    double acc = 0.0;
    for (Token t : continuation) {
        if (!lm.vocab().contains(t)) throw std::invalid_argument("joint_logprob: token out of range");
        double p;
        if (warp != nullptr && !warp->is_identity()) {
            std::vector<double> row = lm.next_dist(context).probs();
            warp_in_place(row, *warp);
            p = row[size_t(t)];
        } else {
            p = lm.next_dist(context).at(t);
        }
        if (p <= 0.0) return -std::numeric_limits<double>::infinity();
        acc += std::log(p);
        context.push_back(t);
    }
    return acc;
}

double perplexity(const TabularLM & lm, const TokenSeq & seq) {
    const int n = seq.generated_count();
    if (n < 1) throw std::invalid_argument("perplexity: sequence has no generated tokens");
    const double jl = joint_logprob(lm, seq.prefix(), seq.generated());
    if (std::isinf(jl)) return std::numeric_limits<double>::infinity();
    return std::exp(-jl / double(n));
}

// every context tuple of length 0..order, in (length, lexicographic) order
static void enumerate_contexts(int vocab_size, int order,
                               const std::function<void(const std::vector<Token> &)> & fn) {
    for (int len = 0; len <= order; ++len) {
        std::vector<Token> ctx(size_t(len), 0);
        while (true) {
            fn(ctx);
            int pos = len - 1;
            while (pos >= 0 && ctx[size_t(pos)] == vocab_size - 1) {
                ctx[size_t(pos)] = 0;
                --pos;
            }
            if (pos < 0) break;
            ++ctx[size_t(pos)];
        }
    }
}

std::pair<TabularLM, TabularLM> make_random_lm_pair(int vocab_size, int order,
                                                    double divergence_knob, uint64_t seed) {
    if (vocab_size < 2) throw std::invalid_argument("make_random_lm_pair: vocab_size must be >= 2");
    if (order < 0) throw std::invalid_argument("make_random_lm_pair: order must be >= 0");
    if (divergence_knob < 0.0 || divergence_knob > 1.0) {
        throw std::invalid_argument("make_random_lm_pair: divergence_knob must be in [0,1]");
    }

    Rng rng(seed);
    const auto random_simplex = [&]() {
        // exponential weights normalized; uniform_open keeps entries
        // strictly positive so generated rows have full support
        auto row = std::vector<double>(size_t(vocab_size));
        for (double & w : row) w = -std::log(rng.uniform_open());
        renormalize(row);
        return row;
    };

    TabularLM::Table target_table;
    TabularLM::Table draft_table;
    enumerate_contexts(vocab_size, order, [&](const std::vector<Token> & ctx) {
        std::vector<double> t_row = random_simplex();
        std::vector<double> noise = random_simplex();
        std::vector<double> d_row;
        if (divergence_knob == 0.0) {
            d_row = t_row;
        } else {
            d_row.resize(size_t(vocab_size));
            for (int i = 0; i < vocab_size; ++i) {
                d_row[size_t(i)] = (1.0 - divergence_knob) * t_row[size_t(i)] + divergence_knob * noise[size_t(i)];
            }
            renormalize(d_row);
        }
        target_table.emplace(ctx, Distribution::normalized(std::move(t_row)));
        draft_table.emplace(ctx, Distribution::normalized(std::move(d_row)));
    });

    Vocab vocab{vocab_size, {}};
    return {TabularLM(vocab, order, ModelRole::target, std::move(target_table)),
            TabularLM(vocab, order, ModelRole::draft, std::move(draft_table))};
}

TabularLM make_chain_lm(int vocab_size, ModelRole role) {
    TabularLM::Table table;
    const auto one_hot = [&](Token t) {
        std::vector<double> row(size_t(vocab_size), 0.0);
        row[size_t(t)] = 1.0;
        return Distribution::checked(std::move(row));
    };
    table.emplace(std::vector<Token>{}, one_hot(0));
    for (Token t = 0; t < vocab_size; ++t) {
        table.emplace(std::vector<Token>{t}, one_hot((t + 1) % vocab_size));
    }
    return TabularLM(Vocab{vocab_size, {}}, 1, role, std::move(table));
}

TabularLM load_model_file(const std::string & path, ModelRole role) {
    std::ifstream in(path);
    if (!in) throw ModelLoadError("cannot open model file " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception & e) {
        throw ModelLoadError(path + ": " + e.what());
    }
    if (!doc.contains("vocab_size") || !doc.contains("order") || !doc.contains("rows")) {
        throw ModelLoadError(path + ": expected fields vocab_size, order, rows");
    }
    const int vocab_size = doc["vocab_size"].get<int>();
    const int order      = doc["order"].get<int>();

    TabularLM::Table table;
    size_t row_idx = 0;
    for (const auto & row : doc["rows"]) {
        ++row_idx;
        if (!row.contains("context") || !row.contains("probs")) {
            throw ModelLoadError(path + ": row " + std::to_string(row_idx) + " missing context or probs");
        }
        std::vector<Token>  ctx   = row["context"].get<std::vector<Token>>();
        std::vector<double> probs = row["probs"].get<std::vector<double>>();
        if (int(probs.size()) != vocab_size) {
            throw ModelLoadError(path + ": row " + std::to_string(row_idx) + " has " +
                                 std::to_string(probs.size()) + " probs, expected " + std::to_string(vocab_size));
        }
        double total = 0.0;
        for (double p : probs) {
            if (p < 0.0) {
                throw ModelLoadError(path + ": row " + std::to_string(row_idx) + " has a negative probability");
            }
            total += p;
        }
        if (std::abs(total - 1.0) > 1e-9) {
            throw ModelLoadError(path + ": row " + std::to_string(row_idx) + " (context " + key_to_string(ctx) +
                                 ") sums to " + std::to_string(total) + ", outside 1 +/- 1e-9");
        }
        // rows already normalized to full precision are kept bit-exact,
        // so a save/load round trip is the identity
        Distribution dist = std::abs(total - 1.0) <= Distribution::kSumTol
                                ? Distribution::checked(std::move(probs))
                                : Distribution::normalized(std::move(probs));
        if (!table.emplace(std::move(ctx), std::move(dist)).second) {
            throw ModelLoadError(path + ": row " + std::to_string(row_idx) + " duplicates an earlier context");
        }
    }

    TabularLM lm(Vocab{vocab_size, {}}, order, role, std::move(table));
    lm.check_closed();
    return lm;
}

void save_model_file(const TabularLM & lm, const std::string & path) {
    nlohmann::json doc;
    doc["vocab_size"] = lm.vocab_size();
    doc["order"]      = lm.order();
    nlohmann::json rows = nlohmann::json::array();
    for (const auto & [key, dist] : lm.table()) {
        nlohmann::json row;
        row["context"] = key;
        row["probs"]   = dist.probs();
        rows.push_back(std::move(row));
    }
    doc["rows"] = std::move(rows);
    std::ofstream out(path);
    if (!out) throw ModelLoadError("cannot write model file " + path);
    out << doc.dump(2) << "\n";
}

TextCorpus corpus_from_text(const std::string & text) {
    TextCorpus corpus;
    std::map<char, Token> ids;
    corpus.sequences.emplace_back();
    for (char c : text) {
        if (c == '\n') {
            corpus.sequences.emplace_back();
            continue;
        }
        auto it = ids.find(c);
        if (it == ids.end()) {
            it = ids.emplace(c, Token(corpus.vocab.glyphs.size())).first;
            corpus.vocab.glyphs.push_back(std::string(1, c));
        }
        corpus.sequences.back().push_back(it->second);
    }
    if (!corpus.sequences.empty() && corpus.sequences.back().empty()) corpus.sequences.pop_back();
    corpus.vocab.size = int(corpus.vocab.glyphs.size());
    return corpus;
}

} // namespace specdec
