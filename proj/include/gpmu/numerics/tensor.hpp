#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>

namespace gpmu {

using Index = Eigen::Index;

// Dense 2-D value type used everywhere: row-major so serialized bytes match
// the documented layouts directly. Row vectors are 1xN, scalars 1x1.
template <class S>
using TensorT = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Tensor = TensorT<double>;

inline std::string shape_str(Index rows, Index cols) {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

template <class D>
std::string shape_str(const Eigen::MatrixBase<D>& m) {
  return shape_str(m.rows(), m.cols());
}

template <class D>
bool all_finite(const Eigen::MatrixBase<D>& m) {
  return m.allFinite();
}

}  // namespace gpmu
