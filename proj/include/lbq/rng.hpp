#ifndef LBQ_RNG_HPP
#define LBQ_RNG_HPP

#include <cmath>
#include <cstdint>

namespace lbq {

// splitmix64 step, used to derive independent stream states from a key.
inline std::uint64_t splitmix64(std::uint64_t &x) {
    std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// xoshiro256++ generator. Self-contained so that streams are identical
// across standard libraries; distributions below are hand transforms for
// the same reason.
class Rng {
public:
    Rng() : Rng(0, 0, 0, 0) {}

    // Stream keyed by (seed, point, replica, purpose); distinct keys give
    // independent streams.
    Rng(std::uint64_t seed, std::uint64_t point, std::uint64_t replica,
        std::uint64_t purpose) {
        std::uint64_t key = seed;
        key = splitmix64(key) ^ (point * 0x9e3779b97f4a7c15ULL);
        key = splitmix64(key) ^ (replica * 0xd1b54a32d192ed03ULL);
        key = splitmix64(key) ^ (purpose * 0x2545f4914f6cdd1dULL);
        for (auto &w : state_) w = splitmix64(key);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Exponential with the given rate.
    double exponential(double rate) {
        // uniform01 can return 0; 1 - u is in (0, 1].
        return -std::log1p(-uniform01()) / rate;
    }

    // Uniform integer in [0, n), unbiased via rejection.
    std::uint64_t uniform_below(std::uint64_t n) {
        const std::uint64_t threshold = (0 - n) % n;
        for (;;) {
            std::uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }
    std::uint64_t state_[4];
};

} // namespace lbq

#endif
