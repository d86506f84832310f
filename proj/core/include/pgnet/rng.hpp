#pragma once

#include <cstdint>
#include <vector>

namespace pgnet {

// Deterministic 64-bit generator (xorshift-multiply core seeded via
// splitmix64). Unlike std::uniform_*_distribution, every draw here is
// fully specified, so seeds reproduce across compilers and standard
// libraries, not just across runs.
class Rng {
public:
    explicit Rng(std::uint64_t seed) { state_ = splitmix64(seed + 0x9E3779B97F4A7C15ULL); }

    std::uint64_t next_u64() {
        // splitmix64 stream: equidistributed enough for initialization,
        // shuffling, and test fuzzing.
        state_ += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0,1) with 53-bit resolution.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // Uniform integer in [0, n), n > 0. Rejection sampling keeps the
    // distribution exact and the draw count deterministic per seed.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t threshold = (0 - n) % n;
        for (;;) {
            const std::uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

    static std::uint64_t splitmix64(std::uint64_t x) {
        x += 0x9E3779B97F4A7C15ULL;
        x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
        x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
        return x ^ (x >> 31);
    }

private:
    std::uint64_t state_;
};

}  // namespace pgnet
