#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "ebm/errors.hpp"

namespace ebm {

namespace detail {

// SplitMix64 finalizer; bijective on 64-bit words.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline std::uint64_t combine64(std::uint64_t a, std::uint64_t b) {
    return mix64(mix64(a) + 0x9e3779b97f4a7c15ull * (b + 1));
}

} // namespace detail

// Seeded random stream. The same (seed, stream_id) pair always produces the
// identical draw sequence; distinct stream_ids give statistically independent
// streams, so per-row work can be parallelized without sharing state.
//
// Draw accounting: uniform() consumes exactly one engine word, normal()
// exactly two, poisson() a rate-dependent number. Nothing is cached, so a
// second stream constructed from the same identity can replay a computation
// draw for draw.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0)
        : seed_(seed),
          stream_id_(stream_id),
          engine_(detail::combine64(seed, stream_id)) {}

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream_id() const { return stream_id_; }
    std::uint64_t draw_count() const { return draws_; }

    // New independent stream derived from this stream's identity (not from
    // its current state), so derivation commutes with drawing.
    RngStream substream(std::uint64_t tag) const {
        return RngStream(seed_, detail::combine64(stream_id_, tag));
    }

    std::uint64_t next_u64() {
        ++draws_;
        return engine_();
    }

    // Uniform on [0, 1) with 53 random bits.
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Unbiased integer in [0, bound) via rejection.
    std::uint64_t uniform_below(std::uint64_t bound) {
        if (bound == 0) throw ValidationError("uniform_below: bound must be positive");
        const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
        std::uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return x % bound;
    }

    // One Bernoulli trial. The comparison rule is u <= prob with u ~ U[0,1);
    // a uniform is consumed even when the outcome is forced, keeping the
    // per-unit draw count constant.
    bool bernoulli(double prob) {
        const double u = uniform();
        return prob > 0.0 && u <= prob;
    }

    // Standard normal via Box-Muller (two engine words, no caching).
    double normal() {
        double u1 = uniform();
        const double u2 = uniform();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        constexpr double two_pi = 6.283185307179586476925286766559;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
    }

    // Poisson draw. Knuth's product method for small rates; larger rates are
    // split into chunks (a Poisson sum is Poisson in the summed rate).
    long long poisson(double rate) {
        if (!(rate >= 0.0)) throw ValidationError("poisson: rate must be non-negative");
        if (rate < 1e-300) return 0;
        long long total = 0;
        while (rate > 30.0) {
            total += poisson_knuth(30.0);
            rate -= 30.0;
        }
        return total + poisson_knuth(rate);
    }

private:
    long long poisson_knuth(double rate) {
        const double threshold = std::exp(-rate);
        long long k = 0;
        double prod = 1.0;
        do {
            ++k;
            prod *= uniform();
        } while (prod > threshold);
        return k - 1;
    }

    std::uint64_t seed_;
    std::uint64_t stream_id_;
    std::uint64_t draws_ = 0;
    std::mt19937_64 engine_;
};

// Stream-id tags reserved by the trainers so that the different random roles
// never alias each other.
namespace stream_tag {
inline constexpr std::uint64_t init = 0x01;
inline constexpr std::uint64_t shuffle = 0x02;
inline constexpr std::uint64_t chain = 0x03;
inline constexpr std::uint64_t clamped = 0x04;
inline constexpr std::uint64_t generate = 0x05;
} // namespace stream_tag

} // namespace ebm
