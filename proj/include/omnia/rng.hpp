#pragma once

// Deterministic PRNG used across the project. splitmix64 is bit-stable on
// every platform, unlike std::uniform_* distributions, so seeded runs stay
// byte-reproducible. Manifests record the algorithm name via kRngAlgorithm.

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

namespace omnia {

inline constexpr const char* kRngAlgorithm = "splitmix64";

// splitmix64 finalizer; also used as a standalone integer mixer.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// Independent stream for (seed, stream) pairs, e.g. per repeat index.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    return mix64(seed ^ mix64(stream + 0x632BE59BD9B4E019ull));
}

class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // Unbiased integer in [0, n). n must be nonzero.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t threshold = -n % n;  // 2^64 mod n
        for (;;) {
            std::uint64_t r = next();
            if (r >= threshold) return r % n;
        }
    }

    // Double in [0, 1) with 53 bits of precision.
    double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double range(double lo, double hi) { return lo + (hi - lo) * unit(); }

    bool coin() { return (next() & 1ull) != 0; }

    // Standard normal via Box-Muller; deterministic, no library distribution.
    double gaussian() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        double u1 = 0.0;
        do {
            u1 = unit();
        } while (u1 <= 0.0);
        const double u2 = unit();
        const double mag = std::sqrt(-2.0 * std::log(u1));
        const double two_pi = 6.283185307179586476925286766559;
        cached_ = mag * std::sin(two_pi * u2);
        have_cached_ = true;
        return mag * std::cos(two_pi * u2);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // Moves a uniformly chosen k-subset into v[0..k). Order of the prefix is
    // itself deterministic for a given seed.
    template <typename T>
    void partial_shuffle(std::vector<T>& v, std::size_t k) {
        if (k > v.size()) k = v.size();
        for (std::size_t i = 0; i < k; ++i) {
            std::size_t j = i + static_cast<std::size_t>(below(v.size() - i));
            std::swap(v[i], v[j]);
        }
    }

private:
    std::uint64_t state_;
    double cached_ = 0.0;
    bool have_cached_ = false;
};

}  // namespace omnia
