#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace extrinsiq {

using Rng = std::mt19937_64;

/// Independent stream for (seed, tags...). Used so that per-observation and
/// per-trial randomness does not depend on evaluation order.
Rng derive_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> tags);

double uniform(Rng& rng, double lo, double hi);
double gaussian(Rng& rng, double sigma);
/// Uniform index in [0, n).
std::size_t uniform_index(Rng& rng, std::size_t n);

}  // namespace extrinsiq
