#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace vitkit {

// SplitMix64 stream (Vigna's reference constants). Chosen over std::mt19937
// so that shuffles and weight draws are reproducible from any language that
// implements the same three-line generator.
class SplitMix64 {
   public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1) with 53 bits of entropy.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, bound). Plain modulo: the tiny bias is
    // irrelevant here and the mapping stays portable.
    std::uint64_t next_below(std::uint64_t bound) { return next_u64() % bound; }

    // Standard normal via Box-Muller (deterministic, no cached spare).
    double next_normal() {
        double u1 = next_double();
        while (u1 <= 0.0) u1 = next_double();
        const double u2 = next_double();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
    }

    // Normal(0, std) truncated to +-2 std, the usual transformer init draw.
    double next_trunc_normal(double std_dev) {
        double z = next_normal();
        while (z < -2.0 || z > 2.0) z = next_normal();
        return z * std_dev;
    }

   private:
    std::uint64_t state_;
};

// In-place Fisher-Yates, descending index, j = next_u64() % (i+1).
template <typename T>
void fisher_yates_shuffle(std::vector<T> &items, SplitMix64 &rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.next_below(i));
        std::swap(items[i - 1], items[j]);
    }
}

}  // namespace vitkit
