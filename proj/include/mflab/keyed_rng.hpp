#ifndef MFLAB_KEYED_RNG_HPP
#define MFLAB_KEYED_RNG_HPP

#include <cstdint>
#include <cmath>

namespace mflab {

// Counter-based random streams. A stream is keyed by a tuple of integers and
// yields the same sequence no matter how many other streams were drawn, which
// is what makes initialization tables consistent across resolutions.

inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t mix_key(std::uint64_t a, std::uint64_t b, std::uint64_t c,
                             std::uint64_t d, std::uint64_t e) {
    std::uint64_t s = a;
    std::uint64_t h = splitmix64(s);
    s ^= b + 0x632be59bd9b4e019ULL;
    h ^= splitmix64(s);
    s ^= c + 0x9e3779b97f4a7c15ULL;
    h ^= splitmix64(s);
    s ^= d + 0xd1b54a32d192ed03ULL;
    h ^= splitmix64(s);
    s ^= e + 0x8cb92ba72f3d8dd7ULL;
    h ^= splitmix64(s);
    return h;
}

class KeyedStream {
public:
    KeyedStream(std::uint64_t seed, std::uint64_t tag, std::uint64_t layer,
                std::uint64_t j, std::uint64_t k)
        : state_(mix_key(seed, tag, layer, j, k)) {}

    explicit KeyedStream(std::uint64_t seed) : state_(mix_key(seed, 0, 0, 0, 0)) {}

    std::uint64_t next_u64() { return splitmix64(state_); }

    // uniform in [0,1) with 53 random bits
    double next_unit() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double next_uniform(double a, double b) { return a + (b - a) * next_unit(); }

    // Box-Muller; one value per call, no caching so draw counts stay keyed
    double next_gaussian() {
        double u1 = next_unit();
        double u2 = next_unit();
        while (u1 <= 0x1.0p-60) u1 = next_unit();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    // index in [0,n) via 128-bit multiply, bias-free enough for n << 2^64
    std::uint64_t next_index(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

private:
    std::uint64_t state_;
};

} // namespace mflab

#endif
