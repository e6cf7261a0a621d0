#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace vser {

// splitmix64; used both as a stream generator and to mix seeds.
inline uint64_t splitmix64(uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Deterministic generator with identical output on every platform and
// standard library. std::normal_distribution is implementation-defined,
// so the distributions are hand-rolled.
class Rng {
  public:
    explicit Rng(uint64_t seed) : state_(seed) {
        // decorrelate trivially related seeds
        next_u64();
        next_u64();
    }

    uint64_t next_u64() { return splitmix64(state_); }

    // uniform in [0, 1)
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [0, n)
    uint64_t below(uint64_t n) { return next_u64() % n; }

    // standard normal via Box-Muller
    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        while (u1 == 0.0) u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    // normal truncated to [-2*sigma, 2*sigma], rejection sampled
    double truncated_normal(double sigma) {
        double z;
        do {
            z = gaussian();
        } while (z < -2.0 || z > 2.0);
        return z * sigma;
    }

    template <typename It>
    void shuffle(It first, It last) {
        auto n = static_cast<uint64_t>(last - first);
        for (uint64_t i = n; i > 1; --i) {
            uint64_t j = below(i);
            std::swap(first[i - 1], first[j]);
        }
    }

  private:
    uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

// FNV-1a over a string, for stable per-clip seeds and file hashes.
inline uint64_t fnv1a64(std::string_view s, uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Per-clip stream: identical for (global_seed, clip_id, stream_tag) no
// matter how work is scheduled across threads.
inline uint64_t derive_seed(uint64_t global_seed, std::string_view clip_id,
                            std::string_view stream_tag) {
    uint64_t h = fnv1a64(clip_id);
    h = fnv1a64(stream_tag, h);
    uint64_t s = global_seed ^ h;
    return splitmix64(s);
}

}  // namespace vser
