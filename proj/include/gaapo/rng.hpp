#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace gaapo {

/// Seeded generator with platform-independent draws.
///
/// std::mt19937_64 output is fully specified by the standard but the
/// distributions in <random> are not, so every draw used for splits,
/// sampling and mock outcomes goes through the helpers below.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform integer in [0, bound). bound must be > 0.
    std::uint64_t uniform_index(std::uint64_t bound);

    /// Uniform real in [0, 1) with 53 bits of resolution.
    double uniform01();

    bool bernoulli(double p) { return uniform01() < p; }

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(uniform_index(i));
            using std::swap;
            swap(items[i - 1], items[j]);
        }
    }

    /// k distinct indices from [0, n), in draw order.
    std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k);

private:
    std::mt19937_64 engine_;
};

/// SplitMix64 finalizer; used to derive independent stream seeds.
std::uint64_t mix_seed(std::uint64_t value) noexcept;

/// Seed for a named sub-stream, e.g. derive_seed(run_seed, generation, "mutator").
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index, std::string_view stream) noexcept;

}  // namespace gaapo
