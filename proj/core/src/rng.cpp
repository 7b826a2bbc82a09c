// SPDX-License-Identifier: Apache-2.0
#include "monkey/rng.hpp"

#include <cmath>

namespace monkey {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

std::uint64_t finalize(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ull;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBull;
    z ^= z >> 31;
    return z;
}
}  // namespace

std::uint64_t splitmix64_at(std::uint64_t seed, std::uint64_t counter) {
    return finalize(seed + (counter + 1) * kGolden);
}

double u64_to_open_unit(std::uint64_t x) { return ((x >> 11) + 0.5) * 0x1.0p-53; }

std::uint64_t DetRng::next_below(std::uint64_t n) {
    // Modulo bias is irrelevant at the sizes used here (n << 2^64).
    return n == 0 ? 0 : next_u64() % n;
}

double DetRng::next_gauss() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    const double u1 = u64_to_open_unit(next_u64());
    const double u2 = (next_u64() >> 11) * 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
}

std::uint64_t mix_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
    std::uint64_t h = finalize(base + kGolden);
    h = finalize(h ^ (a + kGolden));
    h = finalize(h ^ (b + 0x2545F4914F6CDD1Dull));
    return h;
}

}  // namespace monkey
