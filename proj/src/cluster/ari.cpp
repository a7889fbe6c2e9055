#include "gpmu/cluster/ari.hpp"

#include <cmath>
#include <unordered_map>

#include "gpmu/errors.hpp"

namespace gpmu::cluster {

namespace {

std::vector<int> compact(const std::vector<int>& labels, int& k) {
  std::unordered_map<int, int> ids;
  std::vector<int> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto [it, fresh] = ids.emplace(labels[i], static_cast<int>(ids.size()));
    (void)fresh;
    out[i] = it->second;
  }
  k = static_cast<int>(ids.size());
  return out;
}

double choose2(double n) { return 0.5 * n * (n - 1.0); }

}  // namespace

double ari(const std::vector<int>& labels_a,
           const std::vector<int>& labels_b) {
  if (labels_a.size() != labels_b.size()) {
    throw ContractError("label vectors have different lengths: " +
                        std::to_string(labels_a.size()) + " and " +
                        std::to_string(labels_b.size()));
  }
  if (labels_a.size() < 2) {
    throw ContractError("adjusted Rand index needs at least 2 points");
  }
  int ka = 0, kb = 0;
  std::vector<int> a = compact(labels_a, ka);
  std::vector<int> b = compact(labels_b, kb);

  std::vector<double> table(static_cast<std::size_t>(ka) *
                                static_cast<std::size_t>(kb),
                            0.0);
  std::vector<double> rows(static_cast<std::size_t>(ka), 0.0);
  std::vector<double> cols(static_cast<std::size_t>(kb), 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    table[static_cast<std::size_t>(a[i]) * static_cast<std::size_t>(kb) +
          static_cast<std::size_t>(b[i])] += 1.0;
    rows[static_cast<std::size_t>(a[i])] += 1.0;
    cols[static_cast<std::size_t>(b[i])] += 1.0;
  }

  double index = 0.0;
  for (double nij : table) index += choose2(nij);
  double sum_a = 0.0, sum_b = 0.0;
  for (double ni : rows) sum_a += choose2(ni);
  for (double nj : cols) sum_b += choose2(nj);
  double pairs = choose2(static_cast<double>(a.size()));
  double expected = sum_a * sum_b / pairs;
  double max_index = 0.5 * (sum_a + sum_b);
  double denom = max_index - expected;
  if (std::abs(denom) < 1e-12) return 1.0;  // both partitions degenerate-equal
  return (index - expected) / denom;
}

}  // namespace gpmu::cluster
