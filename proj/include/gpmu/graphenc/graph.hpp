#pragma once

#include <vector>

#include "gpmu/numerics/tensor.hpp"
#include "gpmu/rng.hpp"

namespace gpmu::graphenc {

enum class Polarity { kPositive, kNegative };

// One event's worth of graph-structured data: a bus adjacency (the real
// feeder for positives, a random tree for negatives) and one feature
// vector per bus.
struct EventGraph {
  Tensor adjacency;  // N x N, symmetric 0/1, zero diagonal
  Tensor features;   // N x F
  Polarity polarity = Polarity::kPositive;
  int event_id = 0;
};

// D^{-1/2} (A + I) D^{-1/2} with D the degree matrix of A + I. The input
// must be square and symmetric with a zero diagonal; self-loops are added
// here and nowhere else.
Tensor normalize_adjacency(const Tensor& a);

// Standard Pruefer decoding: seq has length n-2 with entries in [0, n).
// Returns the n-1 tree edges.
std::vector<std::pair<int, int>> prufer_decode(const std::vector<int>& seq,
                                               int n);

// Uniformly random labeled tree on n >= 2 nodes, as a 0/1 adjacency.
Tensor sample_negative_tree(int n, rng::Stream& g);

}  // namespace gpmu::graphenc
