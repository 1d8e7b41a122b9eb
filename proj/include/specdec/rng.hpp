#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace specdec {

// Seedable, portable random source for every stochastic operation in the lab.
//
// The engine is std::mt19937_64 (fully specified by the standard, so the
// stream is identical across platforms and compilers). Uniform doubles are
// built from the top 53 bits instead of std::uniform_real_distribution,
// whose output is implementation-defined.
//
// Stream splitting rule: substream(i) seeds a fresh engine with
// splitmix64(root_seed ^ (0x9e3779b97f4a7c15 * (i + 1))). Experiment code
// gives each trial index its own substream, so trial results do not depend
// on execution order.
inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// seed of substream `stream` under root seed `root`
inline uint64_t derive_seed(uint64_t root, uint64_t stream) {
    return splitmix64(root ^ (0x9e3779b97f4a7c15ull * (stream + 1)));
}

class Rng {
  public:
    explicit Rng(uint64_t seed) : seed_(seed), gen_(splitmix64(seed)) {}

    Rng substream(uint64_t stream) const { return Rng(derive_seed(seed_, stream)); }

    uint64_t next_u64() { return gen_(); }

    // uniform on [0, 1), 53-bit resolution
    double uniform() { return double(gen_() >> 11) * 0x1.0p-53; }

    // uniform on the open interval (0, 1); never returns an exact endpoint
    double uniform_open() { return (double(gen_() >> 11) + 0.5) * 0x1.0p-53; }

    // Inverse-CDF draw over an (approximately normalized) weight vector.
    // Accumulation is strictly left to right so results are reproducible.
    // Returns the last positive index if rounding pushes the target past
    // the total mass.
    int categorical(std::span<const double> probs) {
        double total = 0.0;
        for (double p : probs) total += p;
        const double target = uniform() * total;
        double acc  = 0.0;
        int    last = -1;
        for (size_t i = 0; i < probs.size(); ++i) {
            if (probs[i] <= 0.0) continue;
            acc += probs[i];
            last = int(i);
            if (target < acc) return int(i);
        }
        return last;
    }

  private:
    uint64_t seed_;
    std::mt19937_64 gen_;
};

} // namespace specdec
