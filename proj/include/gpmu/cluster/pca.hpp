#pragma once

#include "gpmu/numerics/tensor.hpp"

namespace gpmu::cluster {

struct PcaResult {
  Tensor projected;          // n x dims
  Tensor basis;              // d x dims, orthonormal columns
  Eigen::VectorXd mean;      // d
  Eigen::VectorXd explained; // dims, descending variances
};

// Mean-centered projection onto the top principal directions. Component
// signs are canonicalized (largest-magnitude entry positive) so the output
// is deterministic.
PcaResult pca_project(const Tensor& x, int dims);

}  // namespace gpmu::cluster
