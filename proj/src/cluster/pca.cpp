#include "gpmu/cluster/pca.hpp"

#include <Eigen/Eigenvalues>

#include "gpmu/errors.hpp"

namespace gpmu::cluster {

PcaResult pca_project(const Tensor& x, int dims) {
  const Index n = x.rows(), d = x.cols();
  if (n < 1) throw ContractError("projection needs at least one point");
  if (dims < 1 || static_cast<Index>(dims) > d) {
    throw ContractError("cannot project " + std::to_string(d) +
                        "-dimensional data onto " + std::to_string(dims) +
                        " directions");
  }
  PcaResult out;
  out.mean = x.colwise().mean().transpose();
  Tensor centered = x.rowwise() - out.mean.transpose();
  // column-major symmetric covariance so the solver sees its native layout
  Eigen::MatrixXd cov =
      (centered.transpose() * centered) / static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  if (es.info() != Eigen::Success) {
    throw NumericError("eigendecomposition failed in projection");
  }
  out.basis.resize(d, dims);
  out.explained.resize(dims);
  // eigenvalues ascend; take the top `dims` in descending order
  for (int j = 0; j < dims; ++j) {
    Index src = d - 1 - j;
    Eigen::VectorXd v = es.eigenvectors().col(src);
    Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0.0) v = -v;
    out.basis.col(j) = v;
    out.explained(j) = es.eigenvalues()(src);
  }
  out.projected = centered * out.basis;
  return out;
}

}  // namespace gpmu::cluster
