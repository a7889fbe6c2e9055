#include "gpmu/cluster/kmeans.hpp"

#include <limits>

#include "gpmu/errors.hpp"

namespace gpmu::cluster {

Tensor kmeanspp_init(const Tensor& x, int k, rng::Stream& g) {
  const Index n = x.rows();
  if (k < 1) throw ContractError("k must be >= 1");
  if (n < k) {
    throw ContractError("cannot seed " + std::to_string(k) +
                        " centers from " + std::to_string(n) + " points");
  }
  Tensor centers(k, x.cols());
  centers.row(0) = x.row(static_cast<Index>(g.below(static_cast<std::uint64_t>(n))));
  Eigen::VectorXd d2 =
      (x.rowwise() - centers.row(0)).rowwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    double total = d2.sum();
    Index pick = 0;
    if (total > 0.0) {
      double r = g.uniform() * total;
      double acc = 0.0;
      pick = n - 1;
      for (Index i = 0; i < n; ++i) {
        acc += d2(i);
        if (acc > r) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<Index>(g.below(static_cast<std::uint64_t>(n)));
    }
    centers.row(c) = x.row(pick);
    d2 = d2.cwiseMin(
        (x.rowwise() - centers.row(c)).rowwise().squaredNorm());
  }
  return centers;
}

namespace {

struct LloydRun {
  std::vector<int> assign;
  double inertia = std::numeric_limits<double>::infinity();
};

LloydRun lloyd(const Tensor& x, int k, rng::Stream g) {
  const Index n = x.rows();
  Tensor centers = kmeanspp_init(x, k, g);
  LloydRun run;
  run.assign.assign(static_cast<std::size_t>(n), -1);
  for (int it = 0; it < 100; ++it) {
    bool changed = false;
    double inertia = 0.0;
    for (Index i = 0; i < n; ++i) {
      int arg = 0;
      double best = (x.row(i) - centers.row(0)).squaredNorm();
      for (int c = 1; c < k; ++c) {
        double d = (x.row(i) - centers.row(c)).squaredNorm();
        if (d < best) {
          best = d;
          arg = c;
        }
      }
      inertia += best;
      if (run.assign[static_cast<std::size_t>(i)] != arg) {
        run.assign[static_cast<std::size_t>(i)] = arg;
        changed = true;
      }
    }
    run.inertia = inertia;
    if (!changed) break;
    Tensor sums = Tensor::Zero(k, x.cols());
    std::vector<Index> counts(static_cast<std::size_t>(k), 0);
    for (Index i = 0; i < n; ++i) {
      int c = run.assign[static_cast<std::size_t>(i)];
      sums.row(c) += x.row(i);
      counts[static_cast<std::size_t>(c)]++;
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        centers.row(c) =
            sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
      }  // empty clusters keep their previous center
    }
  }
  return run;
}

}  // namespace

std::vector<int> kmeans_baseline(const Tensor& x, int k, std::uint64_t seed) {
  if (x.rows() < k) {
    throw ContractError("cannot fit " + std::to_string(k) + " clusters to " +
                        std::to_string(x.rows()) + " points");
  }
  if (!all_finite(x)) throw ContractError("k-means input has non-finite values");
  rng::Stream root(seed, "kmeans");
  LloydRun best;
  for (int r = 0; r < 10; ++r) {
    LloydRun run = lloyd(x, k, root.fork(static_cast<std::uint64_t>(r)));
    if (run.inertia < best.inertia) best = std::move(run);
  }
  return best.assign;
}

}  // namespace gpmu::cluster
