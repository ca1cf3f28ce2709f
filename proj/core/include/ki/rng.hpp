#ifndef KI_RNG_HPP
#define KI_RNG_HPP

#include <cmath>
#include <cstdint>

namespace ki {

// splitmix64 finalizer. Used both as the generator step and to derive
// independent streams from (seed, tag) pairs. Bit-exact on every platform,
// unlike the std:: distributions.
inline uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline uint64_t derive_seed(uint64_t seed, uint64_t tag) { return mix64(seed ^ mix64(tag)); }
inline uint64_t derive_seed(uint64_t seed, uint64_t tag, uint64_t tag2) {
    return mix64(derive_seed(seed, tag) ^ mix64(tag2 + 0x632be59bd9b4e019ULL));
}

class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        uint64_t x = state_;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    // uniform in [0, 1), 53-bit resolution
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    // uniform integer in [0, n); Lemire's multiply-shift with rejection
    uint64_t below(uint64_t n) {
        __uint128_t m = __uint128_t(next_u64()) * n;
        auto lo = uint64_t(m);
        if (lo < n) {
            uint64_t threshold = (0 - n) % n;
            while (lo < threshold) {
                m = __uint128_t(next_u64()) * n;
                lo = uint64_t(m);
            }
        }
        return uint64_t(m >> 64);
    }

    double normal();
    double truncated_normal(double stddev, double cutoff_sigmas = 2.0);

private:
    static constexpr double kPi = 3.14159265358979323846;
    uint64_t state_;
};

// Fisher-Yates; deterministic for a given rng state.
template <typename Vec>
void shuffle(Vec& v, Rng& rng) {
    for (size_t i = v.size(); i > 1; --i) {
        size_t j = size_t(rng.below(i));
        std::swap(v[i - 1], v[j]);
    }
}

}  // namespace ki

#endif
