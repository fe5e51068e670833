// rng.hpp -- seeded, splittable random streams.
//
// Every stochastic component draws from an RngStream derived by hashing a
// key tuple (trial, episode, planning step, candidate, ...). Streams are
// pure functions of their key, so parallel evaluation order can never
// change results.
#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace mctscem {

// SplitMix64, used for key mixing and seeding.
struct SplitMix64 {
    std::uint64_t state;
    explicit SplitMix64(std::uint64_t seed) : state(seed) {}
    std::uint64_t next() {
        std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }
};

// xoshiro256** engine.
struct Xoshiro256ss {
    std::array<std::uint64_t, 4> s{0, 0, 0, 0};

    Xoshiro256ss() = default;
    explicit Xoshiro256ss(std::uint64_t seed) { seed_with_u64(seed); }

    void seed_with_u64(std::uint64_t seed) {
        SplitMix64 sm(seed);
        for (int i = 0; i < 4; ++i) s[i] = sm.next();
        if ((s[0] | s[1] | s[2] | s[3]) == 0) s[0] = 1;
    }

    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(s[1] * 5ULL, 7) * 9ULL;
        const std::uint64_t t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = rotl(s[3], 45);
        return result;
    }
};

class RngStream {
public:
    RngStream() : RngStream(0) {}
    explicit RngStream(std::uint64_t key) : key_(key), gen_(mix(key, 0x6d637473ULL)) {}

    // Derives an independent stream from this stream's key and up to three
    // tag values. Does not consume or depend on this stream's position.
    RngStream child(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) const {
        std::uint64_t k = mix(key_, a);
        k = mix(k, b);
        k = mix(k, c);
        return RngStream(k);
    }

    std::uint64_t key() const { return key_; }

    std::uint64_t next_u64() { return gen_.next_u64(); }

    // 53-bit uniform in [0, 1).
    double uniform01() { return (gen_.next_u64() >> 11) * (1.0 / 9007199254740992.0); }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Unbiased integer in [0, n).
    std::uint64_t uniform_u64(std::uint64_t n) {
        std::uint64_t x, m = (-n) % n;
        do { x = gen_.next_u64(); } while (x < m);
        return x % n;
    }

    int uniform_int(int n) { return static_cast<int>(uniform_u64(static_cast<std::uint64_t>(n))); }

    // Standard normal via Box-Muller, caching the second draw.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1;
        do { u1 = uniform01(); } while (u1 <= 0.0);
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double t = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(t);
        has_spare_ = true;
        return r * std::cos(t);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

private:
    // Hash-combine, then scramble through SplitMix64.
    static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
        SplitMix64 sm(a ^ (b + 0x9E3779B97F4A7C15ULL + (a << 6) + (a >> 2)));
        return sm.next();
    }

    std::uint64_t key_;
    Xoshiro256ss gen_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace mctscem
