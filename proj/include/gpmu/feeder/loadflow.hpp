#pragma once

#include <Eigen/Dense>

#include "gpmu/feeder/topology.hpp"

namespace gpmu::feeder {

// Balanced per-bus steady state: voltage magnitude (pu), current magnitude
// through the bus's supply path (pu), and power factor of that flow.
struct OperatingPoint {
  Eigen::VectorXd vmag;
  Eigen::VectorXd imag;
  Eigen::VectorXd pf;
};

// Linearized branch-flow solution on the tree: |V_child|^2 =
// |V_parent|^2 - 2 (r P + x Q) with downstream-accumulated flows and the
// source held at 1 pu. Loads may optionally be scaled per bus.
OperatingPoint nominal_load_flow(const FeederTopology& topo);
OperatingPoint load_flow(const FeederTopology& topo,
                         const Eigen::VectorXd& load_scale);

}  // namespace gpmu::feeder
