#pragma once

#include <cmath>
#include <cstdint>
#include <string>

namespace t2v {

// splitmix64, used to expand seeds into xoshiro256** state.
inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// xoshiro256** seeded via splitmix64. All draws are pure integer/IEEE
// arithmetic so streams are byte-identical across platforms.
class Rng {
public:
    explicit Rng(uint64_t seed) {
        uint64_t sm = seed;
        for (auto& w : s_) w = splitmix64(sm);
    }

    // Derives an independent stream from a parent seed and a named stage,
    // optionally indexed (e.g. per identity / per instance).
    static Rng stream(uint64_t seed, const std::string& name,
                      uint64_t a = 0, uint64_t b = 0) {
        uint64_t h = seed;
        for (unsigned char c : name) {
            h ^= c;
            splitmix64(h);
        }
        h ^= 0x6a09e667f3bcc908ULL * (a + 1);
        splitmix64(h);
        h ^= 0xbb67ae8584caa73bULL * (b + 1);
        splitmix64(h);
        return Rng(h);
    }

    uint64_t next_u64() {
        const uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform in [0,1) with 53 bits of mantissa.
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // size_t in [0, n)
    uint64_t below(uint64_t n) {
        // modulo bias is irrelevant at our n << 2^64 scales
        return n ? next_u64() % n : 0;
    }

    // Standard normal via Box-Muller; second value cached.
    double gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        double m = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * m;
        has_spare_ = true;
        return u * m;
    }

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    uint64_t s_[4];
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace t2v
