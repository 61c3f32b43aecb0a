#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace san {

// Seedable random source. Wraps std::mt19937_64 (whose bit stream is fixed by
// the standard) and maps to doubles with explicit formulas, so identical seeds
// reproduce identical streams on any platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    void seed(std::uint64_t s) { engine_.seed(s); }

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53 bits of precision.
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller; consumes two uniforms per call, no cached second value.
    double normal(double mean, double stddev) {
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        double z = std::sqrt(-2.0 * std::log(u1)) *
                   std::cos(2.0 * 3.14159265358979323846 * u2);
        return mean + stddev * z;
    }

    bool bernoulli(double p) { return uniform() < p; }

    std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : engine_() % n; }

    // Fisher-Yates.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

// Derives a named sub-seed from a master seed so the init / shuffle / dropout
// / data streams can be varied independently. FNV-1a over the stream name,
// mixed with the master seed through a splitmix64 finalizer.
std::uint64_t derive_seed(std::uint64_t master, std::string_view stream);
std::uint64_t derive_seed(std::uint64_t master, std::string_view stream,
                          std::uint64_t index);

// Stable 64-bit string hash (FNV-1a); used where a platform-independent token
// hash is needed.
std::uint64_t stable_hash(std::string_view s);

}  // namespace san
