#include "gpmu/feeder/loadflow.hpp"

#include <cmath>

#include "gpmu/errors.hpp"

namespace gpmu::feeder {

OperatingPoint load_flow(const FeederTopology& topo,
                         const Eigen::VectorXd& load_scale) {
  const int n = topo.n_buses();
  if (load_scale.size() != n) {
    throw ShapeError("load_flow: scale vector has " +
                     std::to_string(load_scale.size()) + " entries for " +
                     std::to_string(n) + " buses");
  }

  Eigen::VectorXd pdown(n), qdown(n);
  for (int i = 0; i < n; ++i) {
    pdown(i) = topo.load(i).p * load_scale(i);
    qdown(i) = topo.load(i).q * load_scale(i);
  }
  const auto& order = topo.bfs_order();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    int u = *it;
    if (u == topo.root()) continue;
    pdown(topo.parent(u)) += pdown(u);
    qdown(topo.parent(u)) += qdown(u);
  }

  Eigen::VectorXd v2(n);
  v2(topo.root()) = 1.0;
  for (int u : order) {
    if (u == topo.root()) continue;
    const Edge& e = topo.parent_edge(u);
    v2(u) = v2(topo.parent(u)) - 2.0 * (e.r * pdown(u) + e.x * qdown(u));
    if (!(v2(u) > 0.0)) {
      throw NumericError("voltage collapse at bus " + topo.bus_id(u) +
                         " (squared magnitude " + std::to_string(v2(u)) + ")");
    }
  }

  OperatingPoint op;
  op.vmag = v2.cwiseSqrt();
  op.imag.resize(n);
  op.pf.resize(n);
  for (int i = 0; i < n; ++i) {
    double s = std::hypot(pdown(i), qdown(i));
    op.imag(i) = s / op.vmag(i);
    op.pf(i) = s > 0.0 ? pdown(i) / s : 1.0;
  }
  return op;
}

OperatingPoint nominal_load_flow(const FeederTopology& topo) {
  return load_flow(topo, Eigen::VectorXd::Ones(topo.n_buses()));
}

}  // namespace gpmu::feeder
