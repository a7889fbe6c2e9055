#pragma once

#include <vector>

namespace gpmu::cluster {

// Hubert-Arabie adjusted Rand index from the contingency table:
// (Index - Expected) / (Max - Expected). Can be negative; identical
// partitions (including the degenerate ones) score 1.
double ari(const std::vector<int>& labels_a, const std::vector<int>& labels_b);

}  // namespace gpmu::cluster
