#include "gpmu/graphenc/graph.hpp"

#include <cmath>
#include <set>
#include <string>

#include "gpmu/errors.hpp"

namespace gpmu::graphenc {

Tensor normalize_adjacency(const Tensor& a) {
  const Index n = a.rows();
  if (n == 0 || a.cols() != n) {
    throw ContractError("adjacency must be square and non-empty, got " +
                        shape_str(a));
  }
  if (!a.allFinite()) throw ContractError("adjacency has non-finite entries");
  for (Index i = 0; i < n; ++i) {
    if (a(i, i) != 0.0) {
      throw ContractError("adjacency diagonal must be zero; self-loops are "
                          "added during normalization");
    }
    for (Index j = i + 1; j < n; ++j) {
      if (a(i, j) != a(j, i)) {
        throw ContractError("adjacency is not symmetric at (" +
                            std::to_string(i) + ", " + std::to_string(j) + ")");
      }
      if (a(i, j) < 0.0) throw ContractError("adjacency has negative entries");
    }
  }
  Tensor at = a;
  at.diagonal().setOnes();
  Eigen::VectorXd dinv = at.rowwise().sum().cwiseSqrt().cwiseInverse();
  return dinv.asDiagonal() * at.matrix() * dinv.asDiagonal();
}

std::vector<std::pair<int, int>> prufer_decode(const std::vector<int>& seq,
                                               int n) {
  if (n < 2) throw ContractError("a tree needs at least 2 nodes");
  if (static_cast<int>(seq.size()) != n - 2) {
    throw ContractError("Pruefer sequence for " + std::to_string(n) +
                        " nodes must have length " + std::to_string(n - 2));
  }
  std::vector<int> degree(static_cast<std::size_t>(n), 1);
  for (int s : seq) {
    if (s < 0 || s >= n) {
      throw ContractError("Pruefer entry " + std::to_string(s) +
                          " out of range");
    }
    ++degree[static_cast<std::size_t>(s)];
  }
  std::set<int> leaves;
  for (int i = 0; i < n; ++i) {
    if (degree[static_cast<std::size_t>(i)] == 1) leaves.insert(i);
  }
  std::vector<std::pair<int, int>> edges;
  edges.reserve(static_cast<std::size_t>(n - 1));
  for (int s : seq) {
    int leaf = *leaves.begin();
    leaves.erase(leaves.begin());
    edges.emplace_back(leaf, s);
    if (--degree[static_cast<std::size_t>(s)] == 1) leaves.insert(s);
  }
  int u = *leaves.begin();
  int v = *std::next(leaves.begin());
  edges.emplace_back(u, v);
  return edges;
}

Tensor sample_negative_tree(int n, rng::Stream& g) {
  if (n < 2) throw ContractError("negative tree needs at least 2 nodes");
  std::vector<int> seq(static_cast<std::size_t>(n - 2));
  for (int& s : seq) s = static_cast<int>(g.below(static_cast<std::uint64_t>(n)));
  Tensor a = Tensor::Zero(n, n);
  for (auto [u, v] : prufer_decode(seq, n)) {
    a(u, v) = 1.0;
    a(v, u) = 1.0;
  }
  return a;
}

}  // namespace gpmu::graphenc
