// Acceptance gate: one verdict line per criterion, exit code = number of
// failures. Criteria 1-4 are in-process property checks on the numeric
// kernels; 5-8 drive the pipeline on the shipped configs the way a user
// would; 9 re-runs every command through the installed binary and insists
// on byte-identical artifacts.
//
// The benchmark criteria retrain real models on one core, so a full run
// takes hours. `--only 1,2,3,4,8,9` covers everything that finishes in
// minutes; `--work DIR` moves the scratch space.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "gpmu/cluster/ari.hpp"
#include "gpmu/cluster/gmm.hpp"
#include "gpmu/errors.hpp"
#include "gpmu/feeder/topology.hpp"
#include "gpmu/graphenc/encoder.hpp"
#include "gpmu/graphenc/graph.hpp"
#include "gpmu/numerics/params.hpp"
#include "gpmu/numerics/tape.hpp"
#include "gpmu/numerics/tensor.hpp"
#include "gpmu/pipeline/config.hpp"
#include "gpmu/pipeline/pipeline.hpp"
#include "gpmu/rng.hpp"
#include "gpmu/temporal/aed.hpp"
#include "support/gradcheck.hpp"
#include "support/jacobi.hpp"

namespace fs = std::filesystem;
using gpmu::Index;
using gpmu::ParamSet;
using gpmu::Tensor;
using testsupport::grad_check;
using testsupport::random_tensor;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string fmt(const char* spec, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, x);
  return buf;
}

// Shared context: directories, the pipeline log, and the event to print
// progress lines through while a slow criterion grinds along.
struct Gate {
  fs::path data = GPMU_DATA_DIR;
  fs::path configs = GPMU_CONFIG_DIR;
  fs::path cli = GPMU_CLI_PATH;
  fs::path work;
  std::ofstream log_file;

  std::ostream& log() { return log_file; }

  void progress(const std::string& line) {
    std::cout << "# " << line << std::endl;
  }

  gpmu::pipeline::RunConfig load_cfg(const char* name) const {
    auto c = gpmu::pipeline::parse_config_file(configs / name);
    c.topology = data / "ieee34.topo";
    return c;
  }

  void cli_run(const std::string& args) {
    std::string cmd = cli.string() + " " + args + " >> " +
                      (work / "gate.log").string() + " 2>&1";
    int rc = std::system(cmd.c_str());
    if (rc == -1 || !WIFEXITED(rc) || WEXITSTATUS(rc) != 0) {
      throw std::runtime_error("command failed: gpmu " + args);
    }
  }
};

struct Verdict {
  bool pass = false;
  std::string detail;
};

// ---------------------------------------------------------------- C1

Verdict gradient_correctness(Gate&) {
  using namespace gpmu::ad;
  auto t0 = std::chrono::steady_clock::now();
  gpmu::rng::Stream g(17, "gate-gradcheck");

  double worst_elem = 0.0;
  double worst_struct = 0.0;
  auto elem = [&](testsupport::LossFn fn, ParamSet ps) {
    worst_elem = std::max(worst_elem, grad_check(fn, std::move(ps)));
  };
  auto structural = [&](testsupport::LossFn fn, ParamSet ps) {
    worst_struct = std::max(worst_struct, grad_check(fn, std::move(ps)));
  };

  {
    ParamSet ps;
    ps.add("a", random_tensor(2, 3, g));
    ps.add("b", random_tensor(3, 4, g));
    structural([](Tape& t, const ParamSet& p) {
      return sum(matmul(t.param("a", p.at("a")), t.param("b", p.at("b"))));
    }, ps);
  }
  {
    ParamSet ps;
    ps.add("a", random_tensor(3, 3, g));
    ps.add("b", random_tensor(3, 3, g));
    elem([](Tape& t, const ParamSet& p) {
      auto a = t.param("a", p.at("a"));
      auto b = t.param("b", p.at("b"));
      return sum(mul(sub(a, b), add(a, b)));
    }, ps);
  }
  {
    ParamSet ps;
    ps.add("a", random_tensor(2, 5, g));
    elem([](Tape& t, const ParamSet& p) {
      return sum(neg(scale(t.param("a", p.at("a")), 0.37)));
    }, ps);
  }
  {
    ParamSet ps;
    ps.add("m", random_tensor(4, 3, g));
    ps.add("v", random_tensor(1, 3, g));
    structural([](Tape& t, const ParamSet& p) {
      return sum(add_rowvec(t.param("m", p.at("m")), t.param("v", p.at("v"))));
    }, ps);
  }
  {
    ParamSet ps;
    ps.add("x", random_tensor(3, 4, g, -2.0, 2.0));
    elem([](Tape& t, const ParamSet& p) {
      return sum(leaky_relu(t.param("x", p.at("x")), 0.2));
    }, ps);
    elem([](Tape& t, const ParamSet& p) {
      return sum(sigmoid(t.param("x", p.at("x"))));
    }, ps);
    elem([](Tape& t, const ParamSet& p) {
      return sum(tanh_op(t.param("x", p.at("x"))));
    }, ps);
    elem([](Tape& t, const ParamSet& p) {
      return sum(softplus(t.param("x", p.at("x"))));
    }, ps);
  }
  {
    ParamSet ps;
    ps.add("a", random_tensor(3, 2, g));
    ps.add("b", random_tensor(3, 4, g));
    structural([](Tape& t, const ParamSet& p) {
      auto cat = concat_cols(t.param("a", p.at("a")), t.param("b", p.at("b")));
      return sum(mul(cat, cat));
    }, ps);
  }
  {
    ParamSet ps;
    ps.add("a", random_tensor(3, 6, g));
    structural([](Tape& t, const ParamSet& p) {
      auto s = slice_cols(t.param("a", p.at("a")), 2, 3);
      return sum(mul(s, s));
    }, ps);
  }
  {
    ParamSet ps;
    ps.add("a", random_tensor(5, 3, g));
    structural([](Tape& t, const ParamSet& p) {
      auto m = mean_rows(t.param("a", p.at("a")));
      return sum(mul(m, m));
    }, ps);
  }
  {
    ParamSet ps;
    ps.add("v", random_tensor(1, 4, g));
    ps.add("m", random_tensor(5, 4, g));
    structural([](Tape& t, const ParamSet& p) {
      auto tiles = tile_rows(t.param("v", p.at("v")), 5);
      return sum(mul(tiles, t.param("m", p.at("m"))));
    }, ps);
  }
  {
    ParamSet ps;
    ps.add("a", random_tensor(4, 3, g));
    ps.add("b", random_tensor(4, 3, g));
    structural([](Tape& t, const ParamSet& p) {
      return mse(t.param("a", p.at("a")), t.param("b", p.at("b")));
    }, ps);
  }
  {
    ParamSet ps;
    ps.add("a", random_tensor(2, 5, g));
    structural([](Tape& t, const ParamSet& p) {
      auto at = transpose(t.param("a", p.at("a")));
      return sum(matmul(at, t.param("a", p.at("a"))));
    }, ps);
  }

  // Composed auto-encoder on a tiny architecture and batch.
  gpmu::temporal::AedConfig ac;
  ac.seq_len = 6;
  ac.channels = 2;
  ac.units1 = 3;
  ac.units2 = 4;
  ac.embed = 2;
  gpmu::temporal::AedParams ap = gpmu::temporal::init_aed(ac, 11);
  std::vector<Tensor> batch = {random_tensor(6, 2, g), random_tensor(6, 2, g)};
  double aed_err = grad_check(
      [&](Tape& t, const ParamSet& ps) {
        gpmu::temporal::AedParams q{ac, ps};
        return gpmu::temporal::loss_graph(t, q, batch);
      },
      ap.params);

  // Composed graph encoder + discriminator on a 3-node toy, both fusion
  // modes. The positive graph is the path through node 1, the negative
  // the path through node 0.
  Tensor pos = Tensor::Zero(3, 3);
  pos(0, 1) = pos(1, 0) = 1.0;
  pos(1, 2) = pos(2, 1) = 1.0;
  Tensor negt = Tensor::Zero(3, 3);
  negt(0, 1) = negt(1, 0) = 1.0;
  negt(0, 2) = negt(2, 0) = 1.0;
  Tensor feats = random_tensor(3, 2, g);
  double gcn_err[2] = {0.0, 0.0};
  for (int m = 0; m < 2; ++m) {
    gpmu::graphenc::GraphEncConfig gc;
    gc.in_dim = 2;
    gc.hidden1 = 4;
    gc.hidden2 = 3;
    gc.disc_hidden = 2;
    gc.fusion = m == 0 ? gpmu::graphenc::DiscFusion::kProduct
                       : gpmu::graphenc::DiscFusion::kBilinear;
    auto enc = gpmu::graphenc::init_graph_encoder(gc, 17 + m);
    auto fn = [&](Tape& t, const ParamSet& ps) {
      gpmu::graphenc::GraphEncoder e{gc, ps};
      auto p = gpmu::graphenc::encode_graph(
          t, e, gpmu::graphenc::normalize_adjacency(pos), feats);
      auto q = gpmu::graphenc::encode_graph(
          t, e, gpmu::graphenc::normalize_adjacency(negt), feats);
      auto ps_ = gpmu::graphenc::discriminator_scores(e, p.nodes, p.graph);
      auto ns_ = gpmu::graphenc::discriminator_scores(e, q.nodes, p.graph);
      return neg(gpmu::graphenc::js_mi_loss(ps_, ns_));
    };
    gcn_err[m] = grad_check(fn, enc.params);
  }

  double secs = seconds_since(t0);
  bool pass = worst_elem < 1e-4 && worst_struct < 1e-3 && aed_err < 1e-3 &&
              gcn_err[0] < 1e-3 && gcn_err[1] < 1e-3 && secs < 60.0;
  std::ostringstream d;
  d << "ops " << fmt("%.1e", worst_elem) << " elementwise / "
    << fmt("%.1e", worst_struct) << " structural; composed aed "
    << fmt("%.1e", aed_err) << ", gcn+disc " << fmt("%.1e", gcn_err[0])
    << "/" << fmt("%.1e", gcn_err[1]) << "; " << fmt("%.1f", secs) << " s";
  return {pass, d.str()};
}

// ---------------------------------------------------------------- C2

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(static_cast<std::size_t>(n)) {
    for (int i = 0; i < n; ++i) parent[static_cast<std::size_t>(i)] = i;
  }
  int find(int x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      x = parent[static_cast<std::size_t>(x)] =
          parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
    }
    return x;
  }
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[static_cast<std::size_t>(a)] = b;
    return true;
  }
};

Verdict structural_invariants(Gate&) {
  auto t0 = std::chrono::steady_clock::now();
  gpmu::rng::Stream g(29, "gate-structure");

  // Readout invariance under a consistent node relabeling.
  gpmu::graphenc::GraphEncConfig gc;
  gc.in_dim = 5;
  gc.hidden1 = 4;
  gc.hidden2 = 3;
  gc.disc_hidden = 2;
  auto enc = gpmu::graphenc::init_graph_encoder(gc, 3);
  const int n = 7;
  Tensor a = Tensor::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (g.uniform() < 0.5) a(i, j) = a(j, i) = 1.0;
    }
  }
  Tensor x = random_tensor(n, 5, g);
  auto [nodes, graph] = gpmu::graphenc::gcn_encode(
      enc, {a, x, gpmu::graphenc::Polarity::kPositive, 0});
  std::vector<int> perm = {3, 0, 6, 1, 5, 2, 4};
  Tensor pa = Tensor::Zero(n, n);
  Tensor px(n, 5);
  for (int i = 0; i < n; ++i) {
    px.row(perm[static_cast<std::size_t>(i)]) = x.row(i);
    for (int j = 0; j < n; ++j) {
      pa(perm[static_cast<std::size_t>(i)],
         perm[static_cast<std::size_t>(j)]) = a(i, j);
    }
  }
  auto [pnodes, pgraph] = gpmu::graphenc::gcn_encode(
      enc, {pa, px, gpmu::graphenc::Polarity::kPositive, 0});
  double perm_err = 0.0;
  for (Index k = 0; k < graph.cols(); ++k) {
    perm_err = std::max(perm_err, std::abs(graph(0, k) - pgraph(0, k)));
  }
  for (int i = 0; i < n; ++i) {
    for (Index k = 0; k < nodes.cols(); ++k) {
      perm_err = std::max(
          perm_err, std::abs(nodes(i, k) -
                             pnodes(perm[static_cast<std::size_t>(i)], k)));
    }
  }

  // Normalized adjacency: symmetry and spectral radius at most 1,
  // eigenvalues from an independent Jacobi solver.
  double sym_err = 0.0;
  double worst_radius = 0.0;
  int graphs_checked = 0;
  for (int nn = 2; nn <= 8; ++nn) {
    for (int rep = 0; rep < 10; ++rep) {
      Tensor adj = Tensor::Zero(nn, nn);
      if (rep == 8) {  // path
        for (int i = 0; i + 1 < nn; ++i) adj(i, i + 1) = adj(i + 1, i) = 1.0;
      } else if (rep == 9) {  // complete
        adj.setOnes();
        adj.diagonal().setZero();
      } else {
        for (int i = 0; i < nn; ++i) {
          for (int j = i + 1; j < nn; ++j) {
            if (g.uniform() < 0.4) adj(i, j) = adj(j, i) = 1.0;
          }
        }
      }
      Tensor norm = gpmu::graphenc::normalize_adjacency(adj);
      sym_err = std::max(sym_err, (norm - norm.transpose()).cwiseAbs().maxCoeff());
      double radius = 0.0;
      for (double ev : testsupport::jacobi_eigenvalues(norm)) {
        radius = std::max(radius, std::abs(ev));
      }
      worst_radius = std::max(worst_radius, radius);
      ++graphs_checked;
    }
  }

  // Sampled negative trees are trees; at N=4 the 16 labeled trees come
  // out near-uniform.
  int valid_trees = 0;
  for (int rep = 0; rep < 1000; ++rep) {
    int tn = 2 + static_cast<int>(g.below(32));
    Tensor adj = gpmu::graphenc::sample_negative_tree(tn, g);
    bool ok = adj.rows() == tn && adj.cols() == tn;
    int edges = 0;
    UnionFind uf(tn);
    for (int i = 0; ok && i < tn; ++i) {
      if (adj(i, i) != 0.0) ok = false;
      for (int j = i + 1; j < tn; ++j) {
        if (adj(i, j) != adj(j, i)) ok = false;
        if (adj(i, j) != 0.0 && adj(i, j) != 1.0) ok = false;
        if (adj(i, j) == 1.0) {
          ++edges;
          uf.unite(i, j);
        }
      }
    }
    int roots = 0;
    for (int i = 0; i < tn; ++i) {
      if (uf.find(i) == i) ++roots;
    }
    if (ok && edges == tn - 1 && roots == 1) ++valid_trees;
  }

  std::map<unsigned, int> tree_counts;
  for (int rep = 0; rep < 10000; ++rep) {
    Tensor adj = gpmu::graphenc::sample_negative_tree(4, g);
    unsigned mask = 0;
    unsigned bit = 0;
    for (int i = 0; i < 4; ++i) {
      for (int j = i + 1; j < 4; ++j, ++bit) {
        if (adj(i, j) == 1.0) mask |= 1u << bit;
      }
    }
    ++tree_counts[mask];
  }
  int min_count = 10000, max_count = 0;
  for (auto& [mask, cnt] : tree_counts) {
    min_count = std::min(min_count, cnt);
    max_count = std::max(max_count, cnt);
  }
  double lo = 10000.0 / 16.0 * 0.7, hi = 10000.0 / 16.0 * 1.3;
  bool uniform_ok = tree_counts.size() == 16 && min_count >= lo &&
                    max_count <= hi;

  double secs = seconds_since(t0);
  bool pass = perm_err <= 1e-9 && sym_err <= 1e-12 &&
              worst_radius <= 1.0 + 1e-9 && valid_trees == 1000 &&
              uniform_ok && secs < 60.0;
  std::ostringstream d;
  d << "perm " << fmt("%.1e", perm_err) << "; " << graphs_checked
    << " adjacencies sym " << fmt("%.1e", sym_err) << " radius "
    << fmt("%.9f", worst_radius) << "; trees " << valid_trees
    << "/1000 valid, n=4 counts " << min_count << ".." << max_count
    << " of [" << static_cast<int>(lo) << "," << static_cast<int>(hi)
    << "] over " << tree_counts.size() << " shapes; " << fmt("%.1f", secs)
    << " s";
  return {pass, d.str()};
}

// ---------------------------------------------------------------- C3

Verdict estimator_analytics(Gate&) {
  using namespace gpmu::ad;
  gpmu::rng::Stream g(31, "gate-estimator");

  Tape tz;
  double at_zero = gpmu::graphenc::js_mi_loss(tz.constant(Tensor::Zero(2, 3)),
                                              tz.constant(Tensor::Zero(2, 3)))
                       .value()(0, 0);
  double zero_err = std::abs(at_zero + std::log(2.0));

  int negative_draws = 0;
  const int draws = 200;
  for (int rep = 0; rep < draws; ++rep) {
    Tape t;
    int rows = 1 + static_cast<int>(g.below(3));
    int cols = 1 + static_cast<int>(g.below(8));
    Var p = t.constant(random_tensor(rows, cols, g, -6.0, 6.0));
    Var q = t.constant(random_tensor(rows, cols, g, -6.0, 6.0));
    if (gpmu::graphenc::js_mi_loss(p, q).value()(0, 0) < 0.0) {
      ++negative_draws;
    }
  }

  // Score gradients: higher positive scores and lower negative scores
  // should both increase the estimate, so with the loss written as a
  // maximization target the positive gradients are positive and the
  // negative ones negative. Finite differences must agree in sign.
  ParamSet ps;
  ps.add("pos", random_tensor(2, 4, g, -3.0, 3.0));
  ps.add("neg", random_tensor(2, 4, g, -3.0, 3.0));
  auto fn = [](Tape& t, const ParamSet& p) {
    return gpmu::graphenc::js_mi_loss(t.param("pos", p.at("pos")),
                                      t.param("neg", p.at("neg")));
  };
  Tape t;
  auto loss = fn(t, ps);
  auto grads = t.backward(loss);
  int sign_ok = 0, sign_total = 0;
  const double h = 1e-6;
  for (const char* name : {"pos", "neg"}) {
    Tensor& val = ps.at(name);
    const Tensor& analytic = grads.at(name);
    for (Index i = 0; i < val.rows(); ++i) {
      for (Index j = 0; j < val.cols(); ++j) {
        double keep = val(i, j);
        val(i, j) = keep + h;
        double up = testsupport::eval_loss(fn, ps);
        val(i, j) = keep - h;
        double down = testsupport::eval_loss(fn, ps);
        val(i, j) = keep;
        double fd = (up - down) / (2.0 * h);
        bool analytic_sign = std::string(name) == "pos" ? analytic(i, j) > 0.0
                                                        : analytic(i, j) < 0.0;
        if (analytic_sign && fd * analytic(i, j) > 0.0) ++sign_ok;
        ++sign_total;
      }
    }
  }

  bool pass = zero_err <= 1e-12 && negative_draws == draws &&
              sign_ok == sign_total;
  std::ostringstream d;
  d << "zero point err " << fmt("%.1e", zero_err) << "; " << negative_draws
    << "/" << draws << " random draws negative; score-gradient signs "
    << sign_ok << "/" << sign_total;
  return {pass, d.str()};
}

// ---------------------------------------------------------------- C4

Verdict clustering_kernel(Gate&) {
  gpmu::rng::Stream g(37, "gate-cluster");

  auto blobs = [&](int per, const std::vector<std::vector<double>>& centers,
                   double sigma, std::vector<int>* labels) {
    int d = static_cast<int>(centers.front().size());
    Tensor x(per * static_cast<int>(centers.size()), d);
    int row = 0;
    for (std::size_t c = 0; c < centers.size(); ++c) {
      for (int i = 0; i < per; ++i, ++row) {
        for (int j = 0; j < d; ++j) {
          x(row, j) = centers[c][static_cast<std::size_t>(j)] +
                      sigma * g.normal();
        }
        if (labels) labels->push_back(static_cast<int>(c));
      }
    }
    return x;
  };

  // Log-likelihood must never decrease on any model the gate fits.
  double worst_dip = 0.0;
  int fits = 0;
  auto check_trace = [&](const gpmu::cluster::GmmModel& m) {
    for (std::size_t i = 1; i < m.ll_trace.size(); ++i) {
      worst_dip = std::max(worst_dip, m.ll_trace[i - 1] - m.ll_trace[i]);
    }
    ++fits;
  };
  gpmu::cluster::GmmConfig gc;
  gc.seed = 5;
  {
    std::vector<int> truth;
    Tensor x = blobs(80, {{0, 0, 0}, {6, 6, 6}, {-6, 6, -6}}, 0.3, &truth);
    check_trace(gpmu::cluster::gmm_fit(x, 3, gc));
  }
  {
    Tensor x = random_tensor(200, 4, g, -1.0, 1.0);
    check_trace(gpmu::cluster::gmm_fit(x, 3, gc));
  }
  {
    Tensor x(200, 2);
    for (int i = 0; i < 200; ++i) {
      double t = g.normal();
      x(i, 0) = 3.0 * t + 0.1 * g.normal();
      x(i, 1) = -t + 0.1 * g.normal();
    }
    check_trace(gpmu::cluster::gmm_fit(x, 2, gc));
  }
  {
    std::vector<int> truth;
    Tensor x = blobs(50, {{0, 0}, {5, 0}, {0, 5}, {5, 5}}, 0.25, &truth);
    check_trace(gpmu::cluster::gmm_fit(x, 4, gc));
  }

  // Index oracles.
  std::vector<int> labels(300);
  for (auto& v : labels) v = static_cast<int>(g.below(4));
  double perfect = gpmu::cluster::ari(labels, labels);
  std::vector<int> permuted;
  permuted.reserve(labels.size());
  for (int v : labels) permuted.push_back((v + 2) % 4);
  double renamed = gpmu::cluster::ari(labels, permuted);
  double hand = gpmu::cluster::ari({0, 0, 1, 1}, {0, 1, 0, 1});
  std::vector<int> ra(1000), rb(1000);
  for (auto& v : ra) v = static_cast<int>(g.below(5));
  for (auto& v : rb) v = static_cast<int>(g.below(5));
  double random_ari = gpmu::cluster::ari(ra, rb);

  // Separated blobs must be recovered through fit + assign.
  std::vector<int> truth;
  Tensor x = blobs(100, {{0, 0, 0}, {7, 7, 0}, {-7, 0, 7}}, 0.3, &truth);
  auto model = gpmu::cluster::gmm_fit(x, 3, gc);
  check_trace(model);
  double blob_ari = gpmu::cluster::ari(gpmu::cluster::gmm_assign(model, x),
                                       truth);

  bool pass = worst_dip <= 1e-8 && perfect == 1.0 && renamed == 1.0 &&
              std::abs(hand + 0.5) <= 1e-12 && std::abs(random_ari) < 0.05 &&
              blob_ari >= 0.999;
  std::ostringstream d;
  d << fits << " fits, worst ll dip " << fmt("%.1e", worst_dip)
    << "; ari perfect " << fmt("%.3f", perfect) << " renamed "
    << fmt("%.3f", renamed) << " hand " << fmt("%.3f", hand) << " random "
    << fmt("%.3f", random_ari) << "; blobs " << fmt("%.3f", blob_ari);
  return {pass, d.str()};
}

// ------------------------------------------------------- C5 and C6

// When a run directory already holds a report whose embedded config
// snapshot matches what the gate is about to run, the recorded index is
// trusted instead of retraining: the reproducibility criterion is exactly
// the statement that a re-run would reproduce those bytes. Lets a
// many-hour gate resume after an interruption; wipe the work directory
// to force everything fresh.
std::optional<double> reuse_report(const fs::path& report,
                                   const gpmu::pipeline::RunConfig& c) {
  std::ifstream in(report);
  if (!in) return std::nullopt;
  std::vector<std::string> snapshot;
  std::string line, last;
  while (std::getline(in, line)) {
    if (line.rfind("# ", 0) == 0) snapshot.push_back(line.substr(2));
    if (!line.empty()) last = line;
  }
  if (snapshot != gpmu::pipeline::render_config(c)) return std::nullopt;
  std::size_t c1 = last.find(',');
  std::size_t c2 = last.rfind(',');
  if (c1 == std::string::npos || c2 <= c1) return std::nullopt;
  if (last.substr(0, c1) != gpmu::pipeline::variant_name(c.variant)) {
    return std::nullopt;
  }
  return std::stod(last.substr(c1 + 1, c2 - c1 - 1));
}

double read_minutes(const fs::path& p) {
  std::ifstream in(p);
  double m = -1.0;
  in >> m;
  return in ? m : -1.0;
}

// One shared benchmark pass feeds both ordering criteria: five seeds,
// the dataset and auto-encoders trained once per seed, then the graph
// variant (fundamental and harmonic) and the plain embedding baseline
// clustered from the same artifacts.
struct BenchOutcome {
  std::vector<double> gp, aedv, harm;
  double fund_minutes = 0.0;
};

const BenchOutcome& bench(Gate& g) {
  static std::optional<BenchOutcome> cached;
  static std::exception_ptr failed;
  if (failed) std::rethrow_exception(failed);
  if (cached) return *cached;
  try {
    BenchOutcome out;
    for (std::uint64_t s = 1; s <= 5; ++s) {
      fs::path base = g.work / "bench" / ("seed" + std::to_string(s));
      auto shared = g.load_cfg("benchmark.cfg");
      shared.out_dir = base;
      shared.seed = s;
      auto fund = shared;
      fund.out_dir = base / "fund";
      fund.inputs_dir = base;
      auto av = shared;
      av.out_dir = base / "aedv";
      av.inputs_dir = base;
      av.variant = gpmu::pipeline::Variant::kAed;
      auto harm = fund;
      harm.out_dir = base / "harm";
      harm.orders = {1, 3, 5};

      auto gp_r = reuse_report(fund.out_dir / "clusters.csv", fund);
      auto aed_r = reuse_report(av.out_dir / "clusters.csv", av);
      auto harm_r = reuse_report(harm.out_dir / "clusters.csv", harm);
      double fund_min = read_minutes(base / "fund_minutes.txt");
      double gp, aedv, hp;
      bool reused = gp_r && aed_r && harm_r && fund_min >= 0.0;
      if (reused) {
        gp = *gp_r;
        aedv = *aed_r;
        hp = *harm_r;
      } else {
        auto t0 = std::chrono::steady_clock::now();
        gpmu::pipeline::cmd_generate(shared, g.log());
        gpmu::pipeline::cmd_train_aed(shared, 1, g.log());
        gpmu::pipeline::cmd_train_graph(fund, g.log());
        gp = gpmu::pipeline::cmd_cluster(fund, g.log()).ari_score;
        fund_min = seconds_since(t0) / 60.0;
        std::ofstream(base / "fund_minutes.txt") << fmt("%.3f", fund_min)
                                                 << "\n";
        aedv = gpmu::pipeline::cmd_cluster(av, g.log()).ari_score;
        gpmu::pipeline::cmd_train_aed(shared, 3, g.log());
        gpmu::pipeline::cmd_train_aed(shared, 5, g.log());
        gpmu::pipeline::cmd_train_graph(harm, g.log());
        hp = gpmu::pipeline::cmd_cluster(harm, g.log()).ari_score;
        fs::remove(base / "dataset.gpmu");  // regenerable, ~0.6 GB per seed
      }

      out.fund_minutes = std::max(out.fund_minutes, fund_min);
      out.gp.push_back(gp);
      out.aedv.push_back(aedv);
      out.harm.push_back(hp);
      std::ostringstream line;
      line << "benchmark seed " << s << ": graphpmu " << fmt("%.3f", gp)
           << " aed " << fmt("%.3f", aedv) << " harmonics " << fmt("%.3f", hp)
           << (reused ? " (reused artifacts)"
                      : " (fundamental chain " + fmt("%.1f", fund_min) +
                            " min)");
      g.progress(line.str());
    }
    cached = std::move(out);
  } catch (...) {
    failed = std::current_exception();
    throw;
  }
  return *cached;
}

Verdict benchmark_ordering(Gate& g) {
  const BenchOutcome& b = bench(g);
  double med_gp = median(b.gp);
  double med_aed = median(b.aedv);
  bool pass = med_gp >= med_aed + 0.05 - 1e-12 && b.fund_minutes < 30.0;
  std::ostringstream d;
  d << "median graphpmu " << fmt("%.3f", med_gp) << " vs aed "
    << fmt("%.3f", med_aed) << " (margin " << fmt("%+.3f", med_gp - med_aed)
    << ", need +0.050); fundamental pipeline " << fmt("%.1f", b.fund_minutes)
    << " min (cap 30)";
  return {pass, d.str()};
}

Verdict harmonics_gain(Gate& g) {
  const BenchOutcome& b = bench(g);
  double med_f = median(b.gp);
  double med_h = median(b.harm);
  bool pass = med_h >= med_f + 0.03 - 1e-12;
  std::ostringstream d;
  d << "median harmonics " << fmt("%.3f", med_h) << " vs fundamental "
    << fmt("%.3f", med_f) << " (margin " << fmt("%+.3f", med_h - med_f)
    << ", need +0.030)";
  return {pass, d.str()};
}

// ---------------------------------------------------------------- C7

Verdict sensor_trend(Gate& g) {
  auto topo = gpmu::feeder::load_topology(g.data / "ieee34.topo");
  std::vector<int> counts = {2, 4, 8};
  std::vector<double> med;
  for (int count : counts) {
    auto labels = gpmu::pipeline::place_sensors(topo, count, 1);
    std::vector<double> aris;
    for (std::uint64_t s = 1; s <= 3; ++s) {
      auto c = g.load_cfg("sweep.cfg");
      c.sensor_buses = labels;
      c.seed = s;
      c.out_dir = g.work / "sweep" / ("s" + std::to_string(count)) /
                  ("seed" + std::to_string(s));
      auto gc = c;
      gc.out_dir = c.out_dir / "fund";
      gc.inputs_dir = c.out_dir;
      if (auto r = reuse_report(gc.out_dir / "clusters.csv", gc)) {
        aris.push_back(*r);
        continue;
      }
      gpmu::pipeline::cmd_generate(c, g.log());
      gpmu::pipeline::cmd_train_aed(c, 1, g.log());
      gpmu::pipeline::cmd_train_graph(gc, g.log());
      aris.push_back(gpmu::pipeline::cmd_cluster(gc, g.log()).ari_score);
      fs::remove(c.out_dir / "dataset.gpmu");
    }
    med.push_back(median(aris));
    std::ostringstream line;
    line << "sweep " << count << " sensors (";
    for (std::size_t i = 0; i < labels.size(); ++i) {
      line << (i ? " " : "") << labels[i];
    }
    line << "): median " << fmt("%.3f", med.back());
    g.progress(line.str());
  }

  int inversions = 0;
  double worst_drop = 0.0;
  for (std::size_t i = 1; i < med.size(); ++i) {
    double drop = med[i - 1] - med[i];
    if (drop > 1e-12) {
      ++inversions;
      worst_drop = std::max(worst_drop, drop);
    }
  }
  bool pass = inversions == 0 || (inversions == 1 && worst_drop <= 0.02);
  std::ostringstream d;
  d << "medians";
  for (std::size_t i = 0; i < med.size(); ++i) {
    d << " s" << counts[i] << " " << fmt("%.3f", med[i]);
  }
  d << "; " << inversions << " inversion(s), worst drop "
    << fmt("%.3f", worst_drop) << " (allow one at 0.020)";
  return {pass, d.str()};
}

// ---------------------------------------------------------------- C8

Verdict aed_quality(Gate& g) {
  auto c = g.load_cfg("aed_quality.cfg");
  c.out_dir = g.work / "aedq";
  c.seed = 7;
  gpmu::pipeline::cmd_generate(c, g.log());
  gpmu::pipeline::cmd_train_aed(c, 1, g.log());

  std::ifstream curve(c.out_dir / "aed_o1_loss.csv");
  if (!curve) throw std::runtime_error("missing aed_o1_loss.csv");
  std::string line;
  double best_eval = std::numeric_limits<double>::infinity();
  int best_epoch = 0, epochs = 0;
  while (std::getline(curve, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("epoch,", 0) == 0) {
      continue;
    }
    std::size_t c1 = line.find(','), c2 = line.find(',', c1 + 1);
    int epoch = std::stoi(line.substr(0, c1));
    double eval = std::stod(line.substr(c2 + 1));
    ++epochs;
    if (eval < best_eval) {
      best_eval = eval;
      best_epoch = epoch;
    }
  }
  bool pass = best_eval <= 0.10 && best_epoch <= 50;
  std::ostringstream d;
  d << "held-out mse " << fmt("%.4f", best_eval) << " at epoch " << best_epoch
    << " of " << epochs << " (caps 0.10 within 50)";
  return {pass, d.str()};
}

// ---------------------------------------------------------------- C9

std::map<std::string, std::string> snapshot_tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    std::ifstream in(entry.path(), std::ios::binary);
    std::ostringstream bytes;
    bytes << in.rdbuf();
    files[fs::relative(entry.path(), root).string()] = bytes.str();
  }
  return files;
}

Verdict reproducibility(Gate& g) {
  fs::path dir = g.work / "repro";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::string common = "--config " + (g.configs / "smoke.cfg").string() +
                       " --topology " + (g.data / "ieee34.topo").string() +
                       " --seed 11 --out " + dir.string();
  auto run_all = [&] {
    g.cli_run("generate " + common);
    g.cli_run("train-aed --order 1 " + common);
    g.cli_run("train-graph " + common);
    g.cli_run("cluster " + common);
    g.cli_run("project " + common);
    g.cli_run("ablate --variants aed,graphpmu --seeds 11 " + common);
    g.cli_run("sweep --sensors 2,3 --seeds 11 " + common);
  };
  run_all();
  auto first = snapshot_tree(dir);
  run_all();
  auto second = snapshot_tree(dir);

  std::string mismatch;
  if (first.size() != second.size()) {
    mismatch = "file set changed";
  } else {
    for (auto& [rel, bytes] : first) {
      auto it = second.find(rel);
      if (it == second.end() || it->second != bytes) {
        mismatch = rel;
        break;
      }
    }
  }
  bool pass = mismatch.empty();
  std::ostringstream d;
  if (pass) {
    d << first.size() << " artifacts byte-identical across a full re-run "
      << "of every command";
  } else {
    d << "re-run differs at " << mismatch;
  }
  return {pass, d.str()};
}

}  // namespace

int main(int argc, char** argv) {
  Gate gate;
  gate.work = fs::absolute("acceptance-work");
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    std::string arg = argv[i];
    if (arg == "--work" && i + 1 < argc) {
      gate.work = fs::absolute(argv[++i]);
    } else if (arg == "--only" && i + 1 < argc) {
      std::istringstream list(argv[++i]);
      std::string tok;
      while (std::getline(list, tok, ',')) only.insert(std::stoi(tok));
    } else {
      std::cerr << "usage: acceptance [--only 1,2,...] [--work DIR]\n";
      return 64;
    }
  }
  fs::create_directories(gate.work);
  gate.log_file.open(gate.work / "gate.log", std::ios::app);
  std::cout << "# acceptance gate; pipeline logs in "
            << (gate.work / "gate.log").string() << std::endl;

  struct Criterion {
    int id;
    const char* name;
    std::function<Verdict(Gate&)> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "gradient correctness", gradient_correctness},
      {2, "structural invariants", structural_invariants},
      {3, "mi estimator analytics", estimator_analytics},
      {4, "clustering kernel", clustering_kernel},
      {5, "benchmark ordering graphpmu vs aed", benchmark_ordering},
      {6, "harmonics gain", harmonics_gain},
      {7, "sensor count trend", sensor_trend},
      {8, "auto-encoder quality", aed_quality},
      {9, "reproducibility", reproducibility},
  };

  int failures = 0;
  int ran = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    Verdict v;
    try {
      v = c.run(gate);
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    ++ran;
    if (!v.pass) ++failures;
    std::cout << (v.pass ? "[PASS]" : "[FAIL]") << " " << c.id << " "
              << c.name << ": " << v.detail << std::endl;
  }
  std::cout << "acceptance: " << (ran - failures) << "/" << ran
            << " criteria passed" << std::endl;
  return failures;
}
