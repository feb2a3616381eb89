#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace nsforge {

// Raised for malformed input data (corrupt records, bad files, invalid
// annotations). The CLI maps this to exit code 2.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Deterministic random source. Wraps std::mt19937 (whose output sequence is
// pinned by the standard) but hand-rolls the distributions, since the
// standard library's distribution implementations vary across toolchains.
class Rng {
public:
    explicit Rng(uint64_t seed) {
        std::seed_seq seq{static_cast<uint32_t>(seed),
                          static_cast<uint32_t>(seed >> 32)};
        gen_.seed(seq);
    }

    uint32_t next_u32() { return gen_(); }

    // 53-bit uniform in [0, 1).
    double uniform() {
        uint64_t hi = gen_();
        uint64_t lo = gen_();
        return static_cast<double>(((hi << 32) | lo) >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Unbiased integer in [0, n).
    uint64_t uniform_int(uint64_t n) {
        if (n == 0) throw std::invalid_argument("uniform_int: n must be > 0");
        uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        for (;;) {
            uint64_t hi = gen_();
            uint64_t lo = gen_();
            uint64_t v = (hi << 32) | lo;
            if (v < limit) return v % n;
        }
    }

    // Box-Muller, cosine branch only.
    double normal() {
        double u1 = 1.0 - uniform();
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * 3.14159265358979323846 * u2);
    }

private:
    std::mt19937 gen_;
};

// Stable 64-bit mix for deriving per-item seeds from a master seed.
inline uint64_t mix_seed(uint64_t a, uint64_t b) {
    uint64_t x = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
    x ^= x >> 33;
    x *= 0xff51afd7ed558ccdULL;
    x ^= x >> 33;
    x *= 0xc4ceb9fe1a85ec53ULL;
    x ^= x >> 33;
    return x;
}

constexpr double kPi = 3.14159265358979323846;

inline double midi_to_hz(int pitch) {
    return 440.0 * std::pow(2.0, (pitch - 69) / 12.0);
}

}  // namespace nsforge
