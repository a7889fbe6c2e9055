#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "gpmu/cluster/ari.hpp"
#include "gpmu/cluster/gmm.hpp"
#include "gpmu/cluster/kmeans.hpp"
#include "gpmu/cluster/pca.hpp"
#include "gpmu/cluster/report.hpp"
#include "gpmu/errors.hpp"
#include "gpmu/rng.hpp"

using namespace gpmu;
using namespace gpmu::cluster;

namespace {

// `per` points around each center, returned with their blob memberships
std::pair<Tensor, std::vector<int>> blobs(const Tensor& centers, int per,
                                          double sigma, std::uint64_t seed) {
  rng::Stream g(seed, "blobs");
  Tensor x(centers.rows() * per, centers.cols());
  std::vector<int> member;
  for (Index c = 0; c < centers.rows(); ++c) {
    for (int i = 0; i < per; ++i) {
      Index row = c * per + i;
      for (Index j = 0; j < centers.cols(); ++j) {
        x(row, j) = centers(c, j) + sigma * g.normal();
      }
      member.push_back(static_cast<int>(c));
    }
  }
  return {x, member};
}

}  // namespace

TEST_CASE("single-component fit recovers mean and variance analytically") {
  rng::Stream g(3, "one");
  Tensor x(400, 3);
  for (Index i = 0; i < x.rows(); ++i) {
    x(i, 0) = 2.0 + 0.5 * g.normal();
    x(i, 1) = -1.0 + 2.0 * g.normal();
    x(i, 2) = 0.1 * g.normal();
  }
  GmmConfig cfg;
  cfg.restarts = 2;
  GmmModel m = gmm_fit(x, 1, cfg);

  Eigen::RowVectorXd mean = x.colwise().mean();
  Eigen::RowVectorXd var =
      (x.rowwise() - mean).array().square().colwise().sum().matrix() /
      static_cast<double>(x.rows());
  CHECK((m.means.row(0) - mean).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((m.vars.row(0) - var).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(m.weights(0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("two separated blobs are recovered with tight means") {
  Tensor centers(2, 1);
  centers << -5.0, 5.0;
  auto [x, member] = blobs(centers, 200, 0.5, 11);
  GmmConfig cfg;
  GmmModel m = gmm_fit(x, 2, cfg);

  // blob sample means, ordered to match fitted components
  double m0 = x.topRows(200).mean();
  double m1 = x.bottomRows(200).mean();
  double f0 = m.means(0, 0), f1 = m.means(1, 0);
  if (f0 > f1) std::swap(f0, f1);
  CHECK(std::abs(f0 - m0) < 0.2);
  CHECK(std::abs(f1 - m1) < 0.2);

  std::vector<int> assign = gmm_assign(m, x);
  CHECK(ari(member, assign) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("log-likelihood trace never decreases during any fit") {
  rng::Stream g(29, "mono");
  for (int trial = 0; trial < 6; ++trial) {
    Tensor x(90, 4);
    for (Index i = 0; i < x.rows(); ++i) {
      for (Index j = 0; j < x.cols(); ++j) {
        x(i, j) = g.normal() + (i % 3) * 1.5;
      }
    }
    GmmConfig cfg;
    cfg.restarts = 3;
    cfg.seed = static_cast<std::uint64_t>(trial);
    GmmModel m = gmm_fit(x, 3, cfg);
    REQUIRE(m.ll_trace.size() >= 2);
    for (std::size_t t = 1; t < m.ll_trace.size(); ++t) {
      CHECK(m.ll_trace[t] >= m.ll_trace[t - 1] - 1e-8);
    }
  }
}

TEST_CASE("responsibilities are a proper distribution per point") {
  Tensor centers(3, 2);
  centers << 0, 0, 4, 0, 0, 4;
  auto [x, member] = blobs(centers, 60, 0.7, 5);
  (void)member;
  GmmModel m = gmm_fit(x, 3, GmmConfig{});
  Tensor resp = gmm_responsibilities(m, x);
  for (Index i = 0; i < resp.rows(); ++i) {
    CHECK(resp.row(i).sum() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(resp.row(i).minCoeff() >= 0.0);
  }
  CHECK(m.weights.sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(m.weights.minCoeff() > 0.0);
  CHECK((m.vars.array() >= kVarFloor).all());
}

TEST_CASE("assignment ties go to the lowest component index") {
  GmmModel m;
  m.means = Tensor(2, 1);
  m.means << -1.0, 1.0;
  m.vars = Tensor::Constant(2, 1, 0.5);
  m.weights = Eigen::VectorXd::Constant(2, 0.5);
  Tensor x(1, 1);
  x << 0.0;  // exactly between two identical components
  std::vector<int> a = gmm_assign(m, x);
  CHECK(a[0] == 0);

  Tensor at_mean(1, 1);
  at_mean << 1.0;
  CHECK(gmm_assign(m, at_mean)[0] == 1);
}

TEST_CASE("mixture fit validates its inputs") {
  Tensor x(3, 2);
  x << 0, 0, 1, 1, 2, 2;
  CHECK_THROWS_AS(gmm_fit(x, 4, GmmConfig{}), ContractError);
  CHECK_THROWS_AS(gmm_fit(x, 0, GmmConfig{}), ContractError);
  GmmModel m = gmm_fit(x, 2, GmmConfig{});
  Tensor wrong(1, 3);
  wrong << 1, 2, 3;
  CHECK_THROWS_AS(gmm_assign(m, wrong), ShapeError);
}

TEST_CASE("fits and assignments are deterministic per seed") {
  Tensor centers(3, 4);
  centers.setZero();
  centers(1, 0) = 3.0;
  centers(2, 2) = -3.0;
  auto [x, member] = blobs(centers, 40, 1.0, 13);
  (void)member;
  GmmConfig cfg;
  cfg.seed = 77;
  GmmModel a = gmm_fit(x, 3, cfg);
  GmmModel b = gmm_fit(x, 3, cfg);
  CHECK((a.means - b.means).isZero(0.0));
  CHECK((a.vars - b.vars).isZero(0.0));
  CHECK(gmm_assign(a, x) == gmm_assign(b, x));
  CHECK(kmeans_baseline(x, 3, 5) == kmeans_baseline(x, 3, 5));
}

TEST_CASE("adjusted Rand index oracle values") {
  CHECK(ari({0, 0, 1, 1}, {0, 0, 1, 1}) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ari({0, 0, 1, 1}, {1, 1, 0, 0}) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ari({0, 0, 1, 1}, {0, 1, 0, 1}) ==
        doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(ari({3, 3, 9, 9, 9}, {1, 1, 2, 2, 2}) ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(ari({0, 1}, {0, 1, 2}), ContractError);
  CHECK_THROWS_AS(ari({0}, {0}), ContractError);
}

TEST_CASE("adjusted Rand index is symmetric and relabel-invariant") {
  rng::Stream g(41, "ari");
  std::vector<int> a, b;
  for (int i = 0; i < 300; ++i) {
    a.push_back(static_cast<int>(g.below(5)));
    b.push_back(static_cast<int>(g.below(4)));
  }
  CHECK(ari(a, b) == doctest::Approx(ari(b, a)).epsilon(1e-12));
  // arbitrary bijective relabeling of a
  std::vector<int> relabeled = a;
  int map[5] = {42, -7, 0, 99, 3};
  for (int& v : relabeled) v = map[v];
  CHECK(ari(relabeled, b) == doctest::Approx(ari(a, b)).epsilon(1e-12));
}

TEST_CASE("independent random labelings score near zero") {
  rng::Stream g(53, "rand");
  double total = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<int> a, b;
    for (int i = 0; i < 1000; ++i) {
      a.push_back(static_cast<int>(g.below(9)));
      b.push_back(static_cast<int>(g.below(9)));
    }
    total += ari(a, b);
  }
  CHECK(std::abs(total / 20.0) < 0.05);
}

TEST_CASE("k-means recovers separated blobs and handles K=1") {
  Tensor centers(3, 2);
  centers << 0, 0, 8, 0, 0, 8;
  auto [x, member] = blobs(centers, 50, 0.6, 19);
  std::vector<int> assign = kmeans_baseline(x, 3, 1);
  CHECK(ari(member, assign) == doctest::Approx(1.0).epsilon(1e-12));

  std::vector<int> one = kmeans_baseline(x, 1, 1);
  CHECK(std::all_of(one.begin(), one.end(), [](int v) { return v == 0; }));

  CHECK_THROWS_AS(kmeans_baseline(Tensor::Zero(2, 2), 3, 1), ContractError);
}

TEST_CASE("planar data keeps its pairwise distances under projection") {
  rng::Stream g(7, "plane");
  // points in a 2-D plane embedded in 10-D via a fixed rotation
  Tensor basis(10, 2);
  for (Index i = 0; i < 10; ++i) {
    basis(i, 0) = g.normal();
    basis(i, 1) = g.normal();
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(basis);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(10, 2);
  Tensor coords(40, 2);
  for (Index i = 0; i < 40; ++i) {
    coords(i, 0) = g.uniform(-3, 3);
    coords(i, 1) = g.uniform(-3, 3);
  }
  Tensor x = coords * q.transpose();
  x.array() += 0.5;  // offset so centering matters

  PcaResult p = pca_project(x, 2);
  for (Index i = 0; i < x.rows(); ++i) {
    for (Index j = i + 1; j < x.rows(); ++j) {
      double orig = (x.row(i) - x.row(j)).norm();
      double proj = (p.projected.row(i) - p.projected.row(j)).norm();
      CHECK(std::abs(orig - proj) < 1e-6);
    }
  }
}

TEST_CASE("projection basis is orthonormal and full basis reconstructs") {
  rng::Stream g(15, "basis");
  Tensor x(60, 6);
  for (Index i = 0; i < x.rows(); ++i) {
    for (Index j = 0; j < x.cols(); ++j) x(i, j) = g.normal() * (1.0 + j);
  }
  PcaResult p = pca_project(x, 6);
  Eigen::MatrixXd gram = p.basis.transpose() * p.basis;
  CHECK((gram - Eigen::MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff() < 1e-9);
  for (int j = 1; j < 6; ++j) CHECK(p.explained(j) <= p.explained(j - 1) + 1e-12);

  Tensor rebuilt =
      (p.projected * p.basis.transpose()).rowwise() + p.mean.transpose();
  CHECK((rebuilt - x).cwiseAbs().maxCoeff() < 1e-8);

  CHECK_THROWS_AS(pca_project(x, 7), ContractError);
  CHECK_THROWS_AS(pca_project(x, 0), ContractError);

  PcaResult again = pca_project(x, 3);
  PcaResult same = pca_project(x, 3);
  CHECK((again.basis - same.basis).isZero(0.0));
}

TEST_CASE("report renders the documented comma-separated layout") {
  ClusterReport r;
  r.event_ids = {10, 11};
  r.true_classes = {1, 2};
  r.assignments = {0, 1};
  r.variant = "graphpmu";
  r.ari_score = 0.72031;
  r.seed = 4;
  r.config_lines = {"k = 9"};
  std::string text = render_report(r);
  CHECK(text ==
        "# k = 9\n"
        "event_id,true_class,assignment\n"
        "10,1,0\n"
        "11,2,1\n"
        "variant,ari,seed\n"
        "graphpmu,0.720310,4\n");
  r.assignments.pop_back();
  CHECK_THROWS_AS(render_report(r), ContractError);
}
