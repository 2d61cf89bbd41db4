#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace svit {

// Deterministic 64-bit generator (splitmix64). Self-contained so that every
// experiment replays bit-identically from (seed, stream tag) on any platform;
// std::mt19937 + std::normal_distribution would tie results to one libstdc++.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n). Modulo bias is negligible for the small n
    // used here (shuffles, placement grids).
    std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

    // Standard normal via Box-Muller; the cached spare keeps cost down.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Fisher-Yates.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(below(i));
            T tmp = v[i - 1];
            v[i - 1] = v[j];
            v[j] = tmp;
        }
    }

private:
    std::uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// Derives an independent stream from (seed, tag) so that consumers such as
// data generation, parameter init, and shuffling never share a sequence.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
    Rng r(seed ^ (0xd1342543de82ef95ull * (tag + 0x632be59bd9b4e019ull)));
    return r.next_u64();
}

// Well-known stream tags.
namespace stream {
constexpr std::uint64_t kData = 1;
constexpr std::uint64_t kTestData = 2;
constexpr std::uint64_t kInit = 3;
constexpr std::uint64_t kShuffle = 4;
constexpr std::uint64_t kLanczos = 5;
constexpr std::uint64_t kAudit = 6;
constexpr std::uint64_t kDemo = 7;
}  // namespace stream

}  // namespace svit
