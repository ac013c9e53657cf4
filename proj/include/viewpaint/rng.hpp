#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace viewpaint {

// Deterministic random source. The engine is std::mt19937_64 (its sequence
// is pinned by the standard); the derived draws (uniform doubles, bounded
// ints, Box-Muller normals) are implemented here rather than with
// std::*_distribution so results do not depend on the standard library
// implementation. State round-trips through a string for checkpointing.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    /// Uniform double in [0, 1).
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [lo, hi] inclusive, unbiased via rejection.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

    /// Standard normal via Box-Muller (second value cached).
    double normal();

    std::string serialize() const;
    /// Restore state captured by serialize(), replacing the current state.
    void deserialize(const std::string& s);

private:
    std::mt19937_64 gen_;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

/// Derive an independent child seed from a base seed and an index
/// (splitmix64 finalizer over the combination).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

}  // namespace viewpaint
