#pragma once

#include <cstdint>
#include <vector>

#include "gpmu/numerics/tensor.hpp"

namespace gpmu::cluster {

struct GmmConfig {
  int restarts = 10;
  int max_iter = 300;
  double tol = 1e-6;  // relative log-likelihood change per iteration
  std::uint64_t seed = 1;
};

// Diagonal-covariance Gaussian mixture. Row k of means/vars describes
// component k; vars entries are floored at kVarFloor during fitting.
struct GmmModel {
  Tensor means;             // K x d
  Tensor vars;              // K x d
  Eigen::VectorXd weights;  // K, positive, sums to 1
  std::vector<double> ll_trace;  // winning restart, one entry per iteration
  int restarts_run = 0;
};

constexpr double kVarFloor = 1e-6;

// Expectation-maximization, k-means++ initial means, best of
// config.restarts runs by final log-likelihood (ties: lowest restart index).
GmmModel gmm_fit(const Tensor& x, int k, const GmmConfig& cfg);

// Posterior component probabilities, one row per point, rows sum to 1.
Tensor gmm_responsibilities(const GmmModel& m, const Tensor& x);

// Most probable component per point; ties resolved to the lowest index.
std::vector<int> gmm_assign(const GmmModel& m, const Tensor& x);

}  // namespace gpmu::cluster
