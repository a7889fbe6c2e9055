#pragma once

#include <cstdint>
#include <vector>

#include "gpmu/numerics/tensor.hpp"
#include "gpmu/rng.hpp"

namespace gpmu::cluster {

// Squared-distance-weighted seeding. Returns k rows drawn from x.
Tensor kmeanspp_init(const Tensor& x, int k, rng::Stream& g);

// Lloyd iterations from k-means++ seeds, 10 restarts, best inertia wins
// (ties: lowest restart index). Deterministic per seed.
std::vector<int> kmeans_baseline(const Tensor& x, int k, std::uint64_t seed);

}  // namespace gpmu::cluster
