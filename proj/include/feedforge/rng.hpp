#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace feedforge {

/// Seeded random stream used by every sampling step.
///
/// Algorithm "mt19937_64/v1": the engine is std::mt19937_64, whose output
/// sequence is fixed by the C++ standard. Bounded integers use bitmask
/// rejection and reals take the top 53 bits, so results do not depend on the
/// standard library's distribution implementations.
class Rng {
public:
    static constexpr std::string_view kAlgorithm = "mt19937_64/v1";

    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    // Uniform integer in [0, bound). bound must be positive.
    std::uint64_t below(std::uint64_t bound);

    // Uniform real in [0, 1).
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    bool coin() { return (engine_() >> 63) != 0; }

    // Standard normal via Box-Muller on uniform01.
    double normal();

    // k distinct indices from [0, n) in draw order (partial Fisher-Yates).
    std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k);

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

// Independent stream seed for a named sub-stream (source tag, instruction id, ...).
std::uint64_t derive_seed(std::uint64_t seed, std::string_view salt);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt);

} // namespace feedforge
