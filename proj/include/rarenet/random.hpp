#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace rarenet {

// mt19937_64's output sequence is fixed by the standard; the helpers below
// replace std distributions (whose algorithms are implementation-defined) so
// that every random draw is reproducible across standard libraries.
using Rng = std::mt19937_64;

/// Derives an independent stream seed from a base seed, a label and up to two
/// integer coordinates (e.g. epoch and patient index).
std::uint64_t derive_seed(std::uint64_t base, std::string_view label,
                          std::uint64_t a = 0, std::uint64_t b = 0);

inline Rng make_rng(std::uint64_t base, std::string_view label,
                    std::uint64_t a = 0, std::uint64_t b = 0) {
  return Rng(derive_seed(base, label, a, b));
}

/// Uniform double in [0, 1) with 53 random bits.
double uniform01(Rng& rng);

inline double uniform(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

double normal(Rng& rng, double mean, double stddev);

/// Uniform integer in [0, n). n must be positive.
std::size_t uniform_index(Rng& rng, std::size_t n);

template <typename T>
void shuffle(Rng& rng, std::vector<T>& values) {
  for (std::size_t i = values.size(); i > 1; --i) {
    std::swap(values[i - 1], values[uniform_index(rng, i)]);
  }
}

/// k distinct indices from [0, n), in draw order.
std::vector<std::size_t> sample_without_replacement(Rng& rng, std::size_t n,
                                                    std::size_t k);

}  // namespace rarenet
