#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "gpmu/numerics/tensor.hpp"

namespace gpmu::feeder {

struct Edge {
  int a = -1;
  int b = -1;
  double r = 0.0;
  double x = 0.0;
};

struct BusLoad {
  double p = 0.0;
  double q = 0.0;
};

// Radial distribution feeder: a tree of buses with per-edge impedance,
// per-bus load, and a designated sensor subset. Bus 0 (the first bus named
// in the source file) is the source.
class FeederTopology {
 public:
  FeederTopology(std::vector<std::string> bus_ids, std::vector<Edge> edges,
                 std::vector<int> sensors, std::vector<BusLoad> loads);

  int n_buses() const { return static_cast<int>(bus_ids_.size()); }
  const std::string& bus_id(int i) const { return bus_ids_[static_cast<std::size_t>(i)]; }
  int index_of(const std::string& label) const;  // throws on unknown label
  bool has_bus(const std::string& label) const;

  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<int>& sensors() const { return sensors_; }
  const BusLoad& load(int i) const { return loads_[static_cast<std::size_t>(i)]; }
  bool is_sensor(int i) const;

  int root() const { return 0; }
  int parent(int i) const { return parents_[static_cast<std::size_t>(i)]; }
  const Edge& parent_edge(int i) const;  // edge joining i to parent(i)
  const std::vector<int>& children(int i) const {
    return children_[static_cast<std::size_t>(i)];
  }
  // Bus indices in a root-first order where parents precede children.
  const std::vector<int>& bfs_order() const { return bfs_order_; }

  int hops(int i, int j) const {
    return hops_(static_cast<Index>(i), static_cast<Index>(j)) >= 0
               ? static_cast<int>(hops_(i, j))
               : -1;
  }

  Tensor adjacency() const;  // N x N, symmetric 0/1, zero diagonal

  // Same feeder with a different sensor subset (labels must exist).
  FeederTopology with_sensors(const std::vector<std::string>& labels) const;

  // Canonical text rendering used for content hashing; independent of
  // incidental formatting in the source file.
  std::string canonical_string() const;
  std::string hash_hex() const;

 private:
  std::vector<std::string> bus_ids_;
  std::vector<Edge> edges_;
  std::vector<int> sensors_;
  std::vector<BusLoad> loads_;
  std::vector<int> parents_;
  std::vector<int> parent_edge_;
  std::vector<std::vector<int>> children_;
  std::vector<int> bfs_order_;
  Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic> hops_;
};

FeederTopology load_topology(const std::filesystem::path& path);

}  // namespace gpmu::feeder
