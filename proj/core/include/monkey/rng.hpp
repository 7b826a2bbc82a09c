// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

namespace monkey {

/// Counter-based splitmix64: output k of stream `seed` is
/// finalize(seed + (k+1)*golden). Random access, platform-independent.
std::uint64_t splitmix64_at(std::uint64_t seed, std::uint64_t counter);

/// Uniform double in (0,1): ((x >> 11) + 0.5) / 2^53.
double u64_to_open_unit(std::uint64_t x);

/// Sequential deterministic RNG over the splitmix64 stream. Used by the
/// trainer and the synthetic dataset; the sampler draws its initial noise
/// through the same stream so seeds mean the same thing everywhere.
class DetRng {
public:
    explicit DetRng(std::uint64_t seed) : seed_(seed) {}

    std::uint64_t next_u64() { return splitmix64_at(seed_, counter_++); }

    /// Uniform in [0,1).
    double next_unit() { return (next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n).
    std::uint64_t next_below(std::uint64_t n);

    /// Uniform in [lo, hi).
    double next_range(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

    /// Standard normal via Box-Muller (consumes two outputs per pair).
    double next_gauss();

    std::uint64_t seed() const { return seed_; }

private:
    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

/// Derives an independent stream seed from a base seed and a label, for
/// per-cell / per-sample reproducibility.
std::uint64_t mix_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

}  // namespace monkey
