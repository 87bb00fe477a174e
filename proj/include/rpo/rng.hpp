#pragma once

#include <cstdint>
#include <vector>

namespace rpo {

// splitmix64: the single source of randomness in the project. Every run is a
// pure function of explicit seeds, so identical seeds give bit-identical
// outputs on any platform with IEEE-754 doubles.
class SplitMix64 {
  public:
    explicit SplitMix64(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ull;
        uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1), 53-bit resolution.
    double next_unit() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double next_uniform(double lo, double hi) {
        return lo + (hi - lo) * next_unit();
    }

    // Uniform integer in [0, n). Lemire multiply-shift; n must be > 0.
    uint64_t next_below(uint64_t n) {
        return static_cast<uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(next_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

  private:
    uint64_t state_;
};

// Stable per-item substream seed, e.g. one retrieval stream per question.
inline uint64_t derive_seed(uint64_t master, uint64_t index) {
    SplitMix64 rng(master ^ (0xA0761D6478BD642Full * (index + 1)));
    return rng.next_u64();
}

} // namespace rpo
