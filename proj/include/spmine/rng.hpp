#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace spmine {

// Deterministic random source. Wraps mt19937_64 (whose output sequence is fixed by
// the standard) and does its own range reduction, so draws are identical across
// standard libraries. std::uniform_*_distribution and std::shuffle are not.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, bound). bound must be > 0.
    std::uint64_t below(std::uint64_t bound);

    template <typename RandomIt>
    void shuffle(RandomIt first, RandomIt last) {
        const auto n = static_cast<std::uint64_t>(last - first);
        for (std::uint64_t i = n; i > 1; --i) {
            const auto j = below(i);
            std::swap(first[i - 1], first[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

// Child seed for one purpose ("split", "crc-order", ...) derived from a root seed,
// so independent consumers do not share a stream.
std::uint64_t derive_seed(std::uint64_t root, std::string_view purpose);

}  // namespace spmine
