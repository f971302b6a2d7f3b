// SPDX-License-Identifier: MIT
#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace riskstop {

/// What a substream is used for. Streams with different purposes never
/// overlap even for equal path indices, which is what keeps the nested
/// simulations in the dual estimator independent of the outer paths.
enum class StreamPurpose : std::uint64_t {
    Generic = 0,
    Training = 1,
    Testing = 2,
    Inner = 3,
    FinalEval = 4,
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t mix_key(std::uint64_t seed, std::uint64_t purpose,
                             std::uint64_t a, std::uint64_t b) {
    std::uint64_t k = splitmix64(seed);
    k = splitmix64(k ^ splitmix64(purpose + 0x71c67d9a1f3e5b07ULL));
    k = splitmix64(k ^ splitmix64(a + 0x2545f4914f6cdd1dULL));
    k = splitmix64(k ^ splitmix64(b + 0x9e6c63d0876a9a47ULL));
    return k;
}

}  // namespace detail

/// Deterministic per-path random stream. The stream is a pure function of
/// (seed, purpose, a, b); by convention `a` is the path index and `b` a
/// date index for nested branches. Path i therefore never depends on how
/// many paths are simulated or on the thread schedule.
///
/// Normals come from the Marsaglia polar transform on top of the raw
/// mt19937_64 bits rather than std::normal_distribution, whose output
/// sequence is implementation-defined.
class SubstreamRng {
public:
    SubstreamRng(std::uint64_t seed, StreamPurpose purpose,
                 std::uint64_t a = 0, std::uint64_t b = 0)
        : gen_(detail::mix_key(seed, static_cast<std::uint64_t>(purpose), a, b)) {}

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    /// Uniform on (-1, 1), never exactly 0 misses only a null set; fine
    /// for the polar rejection below.
    double uniform_signed() {
        return 2.0 * uniform() - 1.0;
    }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = uniform_signed();
            v = uniform_signed();
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double m = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * m;
        has_spare_ = true;
        return u * m;
    }

    std::uint64_t raw() { return gen_(); }

private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace riskstop
