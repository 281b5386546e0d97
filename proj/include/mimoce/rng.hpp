// SPDX-FileCopyrightText: The mimoce authors
// SPDX-License-Identifier: Apache-2.0
//
// Seeded, splittable random source. Every stochastic quantity in the project
// flows through this type so that a (seed, stream) pair plus call order fully
// determines the output.
//
// Algorithm (documented contract, stable across releases):
//   * stream derivation: the xoshiro256++ state is the first four outputs of
//     a SplitMix64 chain initialised with mix(seed) XOR mix(stream ^ tag),
//     where mix is the SplitMix64 finaliser; distinct streams therefore give
//     statistically independent substreams of one logical seed.
//   * core generator: xoshiro256++ (Blackman & Vigna).
//   * uniform doubles: 53 high bits mapped to [0, 1).
//   * gaussians: Box-Muller on uniform pairs, no cached state, so draw counts
//     are predictable from call sizes alone.
//   * bounded integers: rejection sampling on the high bits (no modulo bias).

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "mimoce/errors.hpp"

namespace mimoce {

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}
inline std::uint64_t mix64(std::uint64_t x) {
    return splitmix64(x); // finaliser applied to x + golden gamma
}
inline std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
}
} // namespace detail

class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed, std::uint64_t stream = 0)
        : seed_(seed), stream_(stream) {
        std::uint64_t sm = detail::mix64(seed) ^ detail::mix64(stream ^ 0x243F6A8885A308D3ULL);
        for (auto& s : state_) s = detail::splitmix64(sm);
        if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0) state_[0] = 1;
    }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }

    /// Independent substream of the same seed.
    SeededRng substream(std::uint64_t stream) const { return SeededRng(seed_, stream); }

    std::uint64_t next_u64() {
        const std::uint64_t result = detail::rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = detail::rotl(state_[3], 45);
        return result;
    }

    /// Uniform in [0, 1), 53-bit resolution.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, bound) without modulo bias.
    std::uint64_t next_below(std::uint64_t bound) {
        if (bound == 0) throw NumericError("next_below: zero bound");
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
        std::uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return x % bound;
    }

    double uniform(double lo, double hi) { return lo + next_double() * (hi - lo); }

    /// One standard-normal pair via Box-Muller.
    std::pair<double, double> normal_pair() {
        double u1 = next_double();
        while (u1 <= 0.0) u1 = next_double();
        const double u2 = next_double();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        return {r * std::cos(a), r * std::sin(a)};
    }

    std::vector<double> gaussian(std::size_t n, double mean = 0.0, double std_dev = 1.0) {
        if (std_dev < 0.0) throw NumericError("gaussian: negative std");
        std::vector<double> out(n);
        for (std::size_t i = 0; i < n; i += 2) {
            const auto [a, b] = normal_pair();
            out[i] = mean + std_dev * a;
            if (i + 1 < n) out[i + 1] = mean + std_dev * b;
        }
        return out;
    }

    std::vector<double> uniform_vec(std::size_t n, double lo, double hi) {
        if (!(lo < hi)) throw NumericError("uniform_vec: requires lo < hi");
        std::vector<double> out(n);
        for (auto& v : out) v = uniform(lo, hi);
        return out;
    }

    /// Seeded Fisher-Yates permutation of {0, ..., n-1}.
    std::vector<std::size_t> permutation(std::size_t n) {
        std::vector<std::size_t> p(n);
        for (std::size_t i = 0; i < n; ++i) p[i] = i;
        for (std::size_t i = n; i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(next_below(i));
            std::swap(p[i - 1], p[j]);
        }
        return p;
    }

private:
    std::uint64_t seed_ = 0, stream_ = 0;
    std::array<std::uint64_t, 4> state_{};
};

// Stream-id allocation used across the project. Data-generation records use
// their record index directly; everything else lives in the high half-space.
namespace streams {
inline constexpr std::uint64_t kSharedPilot = 0x8000000000000000ULL;
inline constexpr std::uint64_t kNetworkInit = 0x8000000000000001ULL;
inline constexpr std::uint64_t kShuffleBase = 0x9000000000000000ULL; // + epoch index
} // namespace streams

} // namespace mimoce
