#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace dcs {

/// Purpose tags for substream derivation. Every consumer of randomness gets
/// its own stream keyed by (master seed, tag, index), so regenerating one
/// component never shifts the draws of another.
enum class StreamTag : std::uint64_t {
    Signal = 1,
    Matrix = 2,
    Noise = 3,
    Topology = 4,
    Minibatch = 5,
    Run = 6,
    Trial = 7,
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline std::uint64_t mix_key(std::uint64_t master, std::uint64_t tag, std::uint64_t index) {
    std::uint64_t s = master;
    std::uint64_t k = splitmix64(s);
    s ^= tag * 0xd1342543de82ef95ull;
    k ^= splitmix64(s);
    s ^= index * 0xaf251af3b0f025b5ull;
    k ^= splitmix64(s);
    return k;
}

} // namespace detail

/// Counter-keyed deterministic generator (xoshiro256++ core, splitmix64
/// seeding). All sampling is implemented explicitly so that streams are
/// bit-reproducible across standard libraries and platforms.
class SplitRng {
public:
    explicit SplitRng(std::uint64_t seed) : key_(seed) {
        std::uint64_t s = seed;
        for (auto& word : state_) word = detail::splitmix64(s);
    }

    /// Derive an independent stream from this stream's original key.
    [[nodiscard]] SplitRng substream(StreamTag tag, std::uint64_t index = 0) const {
        return SplitRng(detail::mix_key(key_, static_cast<std::uint64_t>(tag), index));
    }

    [[nodiscard]] std::uint64_t key() const { return key_; }

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

    /// Uniform double in [0, 1), 53-bit resolution.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform double in [a, b).
    double uniform(double a, double b) { return a + (b - a) * uniform01(); }

    /// Standard normal via Box-Muller; consumes exactly two uniforms per call.
    double normal() {
        const double u1 = 1.0 - uniform01(); // (0, 1]
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    /// Uniform integer in [0, n), rejection-sampled to avoid modulo bias.
    std::uint64_t uniform_int(std::uint64_t n) {
        const std::uint64_t threshold = (0 - n) % n;
        for (;;) {
            const std::uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::uint64_t key_;
    std::array<std::uint64_t, 4> state_;
};

} // namespace dcs
