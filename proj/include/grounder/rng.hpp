#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace grounder {

// Seeded generator whose derived draws are bit-identical across standard
// libraries. std::mt19937_64 itself is fully specified; the std::*_distribution
// templates are not, so uniform draws and shuffles are done by hand here.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, bound). Rejection sampling removes modulo bias.
    std::size_t below(std::size_t bound) {
        if (bound <= 1) return 0;
        const std::uint64_t b = bound;
        const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % b);
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return static_cast<std::size_t>(x % b);
    }

    template <class T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::swap(items[i - 1], items[below(i)]);
        }
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace grounder
