#ifndef WATTSERVE_RNG_HPP
#define WATTSERVE_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

// Deterministic random streams. The engine (mt19937_64) is fully specified
// by the standard and all distribution sampling is done by hand, so output
// is bit-identical across platforms and toolchains.

namespace wattserve {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    // Derive an independent substream, e.g. per node or per grid point.
    static Rng substream(std::uint64_t seed, std::uint64_t stream_id) {
        return Rng(splitmix64(splitmix64(seed) ^ stream_id));
    }

    std::uint64_t next_u64() { return eng_(); }

    double uniform01() {
        // 53-bit mantissa in [0, 1)
        return (eng_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    int uniform_int(int lo, int hi) {  // inclusive bounds
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<int>(eng_() % span);
    }

    double gaussian(double mean = 0.0, double stddev = 1.0) {
        if (have_spare_) {
            have_spare_ = false;
            return mean + stddev * spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform01() - 1.0;
            v = 2.0 * uniform01() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double m = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * m;
        have_spare_ = true;
        return mean + stddev * u * m;
    }

    double lognormal(double log_mean, double log_sigma) {
        return std::exp(gaussian(log_mean, log_sigma));
    }

    int poisson(double lambda) {
        if (lambda <= 0.0) return 0;
        if (lambda < 50.0) {  // Knuth's method, exact
            const double limit = std::exp(-lambda);
            int k = 0;
            double p = 1.0;
            do {
                ++k;
                p *= uniform01();
            } while (p > limit);
            return k - 1;
        }
        // normal approximation for large rates, still deterministic
        const double x = gaussian(lambda, std::sqrt(lambda));
        return x < 0.0 ? 0 : static_cast<int>(std::lround(x));
    }

private:
    std::mt19937_64 eng_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace wattserve

#endif
