#ifndef RELPCANET_RANDOM_HPP
#define RELPCANET_RANDOM_HPP

#include <cstdint>
#include <random>

namespace relpcanet {

// splitmix64 output for stream index `i` of a base seed. Used to derive
// independent child seeds so that stream k never depends on how many other
// streams were spawned (prefix property for restart schedules).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    std::uint64_t z = base + (stream + 1) * 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Seedable deterministic generator: mt19937_64 with an explicit uniform
// double mapping, so streams are identical across standard library
// implementations for a given seed.
class RandomSource {
public:
    explicit RandomSource(std::uint64_t seed) : seed_(seed), engine_(seed) {}

    std::uint64_t seed() const noexcept { return seed_; }

    std::uint64_t next_u64() { return engine_(); }

    // uniform in [0, 1), 53-bit resolution
    double next_double() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    // uniform in [lo, hi)
    double next_double(double lo, double hi) {
        return lo + (hi - lo) * next_double();
    }

    // uniform in [0, n), unbiased via rejection
    std::uint64_t next_below(std::uint64_t n) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x = engine_();
        while (x >= limit) x = engine_();
        return x % n;
    }

    // child stream independent of this source's position
    RandomSource spawn(std::uint64_t stream) const {
        return RandomSource(derive_seed(seed_, stream));
    }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

}  // namespace relpcanet

#endif  // RELPCANET_RANDOM_HPP
