#include "gpmu/cluster/gmm.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "gpmu/cluster/kmeans.hpp"
#include "gpmu/errors.hpp"
#include "gpmu/rng.hpp"

namespace gpmu::cluster {

namespace {

// log density of every point under every component, n x K
Tensor log_densities(const Tensor& means, const Tensor& vars,
                     const Eigen::VectorXd& weights, const Tensor& x) {
  const Index n = x.rows(), k = means.rows(), d = x.cols();
  Tensor lp(n, k);
  for (Index c = 0; c < k; ++c) {
    double base = std::log(weights(c));
    for (Index j = 0; j < d; ++j) {
      base -= 0.5 * std::log(2.0 * std::numbers::pi * vars(c, j));
    }
    Tensor sq = (x.rowwise() - means.row(c)).array().square().matrix();
    Eigen::VectorXd inv = vars.row(c).cwiseInverse().transpose();
    lp.col(c) = -0.5 * (sq * inv);
    lp.col(c).array() += base;
  }
  return lp;
}

struct EStep {
  Tensor resp;  // n x K
  double ll = 0.0;
};

EStep e_step(const Tensor& means, const Tensor& vars,
             const Eigen::VectorXd& weights, const Tensor& x) {
  Tensor lp = log_densities(means, vars, weights, x);
  EStep out;
  out.resp.resize(lp.rows(), lp.cols());
  for (Index i = 0; i < lp.rows(); ++i) {
    double mx = lp.row(i).maxCoeff();
    double sum = (lp.row(i).array() - mx).exp().sum();
    double lse = mx + std::log(sum);
    out.resp.row(i) = (lp.row(i).array() - lse).exp();
    out.ll += lse;
  }
  return out;
}

struct FitRun {
  GmmModel model;
  double final_ll = -std::numeric_limits<double>::infinity();
};

FitRun run_em(const Tensor& x, int k, const GmmConfig& cfg, rng::Stream g) {
  const Index n = x.rows(), d = x.cols();
  FitRun run;
  GmmModel& m = run.model;
  m.means = kmeanspp_init(x, k, g);
  Eigen::RowVectorXd gmean = x.colwise().mean();
  Eigen::RowVectorXd gvar =
      ((x.rowwise() - gmean).array().square().colwise().sum() /
       static_cast<double>(n))
          .matrix()
          .cwiseMax(kVarFloor);
  m.vars = gvar.replicate(k, 1);
  m.weights = Eigen::VectorXd::Constant(k, 1.0 / static_cast<double>(k));

  double prev = -std::numeric_limits<double>::infinity();
  for (int it = 0; it < cfg.max_iter; ++it) {
    EStep e = e_step(m.means, m.vars, m.weights, x);
    if (!std::isfinite(e.ll)) {
      throw NumericError("mixture fit produced a non-finite log-likelihood");
    }
    m.ll_trace.push_back(e.ll);
    run.final_ll = e.ll;

    Eigen::RowVectorXd nk = e.resp.colwise().sum();
    for (Index c = 0; c < k; ++c) {
      double mass = nk(c);
      if (mass < 1e-12) continue;  // dead component keeps its parameters
      m.means.row(c) = (e.resp.col(c).transpose() * x) / mass;
      Tensor sq = (x.rowwise() - m.means.row(c)).array().square().matrix();
      m.vars.row(c) = (e.resp.col(c).transpose() * sq) / mass;
    }
    m.vars = m.vars.cwiseMax(kVarFloor);
    m.weights = (nk.transpose() / static_cast<double>(n)).cwiseMax(1e-12);
    m.weights /= m.weights.sum();

    if (it > 0 && std::abs(e.ll - prev) <= cfg.tol * (1.0 + std::abs(e.ll))) {
      break;
    }
    prev = e.ll;
  }
  (void)d;
  return run;
}

}  // namespace

GmmModel gmm_fit(const Tensor& x, int k, const GmmConfig& cfg) {
  if (k < 1) throw ContractError("mixture needs at least one component");
  if (x.rows() < k) {
    throw ContractError("cannot fit " + std::to_string(k) +
                        " components to " + std::to_string(x.rows()) +
                        " points");
  }
  if (cfg.restarts < 1) throw ContractError("restarts must be >= 1");
  if (!all_finite(x)) throw ContractError("mixture input has non-finite values");

  rng::Stream root(cfg.seed, "gmm");
  FitRun best;
  for (int r = 0; r < cfg.restarts; ++r) {
    FitRun run = run_em(x, k, cfg, root.fork(static_cast<std::uint64_t>(r)));
    if (run.final_ll > best.final_ll) best = std::move(run);
  }
  best.model.restarts_run = cfg.restarts;
  return best.model;
}

Tensor gmm_responsibilities(const GmmModel& m, const Tensor& x) {
  if (x.cols() != m.means.cols()) {
    throw ShapeError("mixture is " + std::to_string(m.means.cols()) +
                     "-dimensional, points have " + std::to_string(x.cols()) +
                     " columns");
  }
  return e_step(m.means, m.vars, m.weights, x).resp;
}

std::vector<int> gmm_assign(const GmmModel& m, const Tensor& x) {
  Tensor resp = gmm_responsibilities(m, x);
  std::vector<int> out(static_cast<std::size_t>(x.rows()));
  for (Index i = 0; i < resp.rows(); ++i) {
    int arg = 0;
    double best = resp(i, 0);
    for (Index c = 1; c < resp.cols(); ++c) {
      if (resp(i, c) > best) {
        best = resp(i, c);
        arg = static_cast<int>(c);
      }
    }
    out[static_cast<std::size_t>(i)] = arg;
  }
  return out;
}

}  // namespace gpmu::cluster
