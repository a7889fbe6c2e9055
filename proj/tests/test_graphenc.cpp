#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "gpmu/errors.hpp"
#include "gpmu/feeder/dataset.hpp"
#include "gpmu/feeder/topology.hpp"
#include "gpmu/graphenc/encoder.hpp"
#include "gpmu/graphenc/graph.hpp"
#include "gpmu/io/model.hpp"
#include "support/gradcheck.hpp"
#include "support/jacobi.hpp"

using namespace gpmu;
using namespace gpmu::graphenc;

namespace {

std::filesystem::path data_file(const char* name) {
  return std::filesystem::path(GPMU_DATA_DIR) / name;
}

std::filesystem::path temp_file(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "gpmu_graphenc_tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

bool same_bits(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < a.cols(); ++j) {
      if (std::memcmp(&a(i, j), &b(i, j), sizeof(double)) != 0) return false;
    }
  }
  return true;
}

bool same_params(const ParamSet& a, const ParamSet& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.name(i) != b.name(i)) return false;
    if (!same_bits(a.value(i), b.value(i))) return false;
  }
  return true;
}

Tensor path_adjacency(int n) {
  Tensor a = Tensor::Zero(n, n);
  for (int i = 0; i + 1 < n; ++i) {
    a(i, i + 1) = 1.0;
    a(i + 1, i) = 1.0;
  }
  return a;
}

GraphEncConfig toy_config() {
  GraphEncConfig c;
  c.in_dim = 2;
  c.hidden1 = 4;
  c.hidden2 = 3;
  c.disc_hidden = 2;
  return c;
}

feeder::GenerateConfig tiny_gen(std::uint64_t seed = 13) {
  feeder::GenerateConfig cfg;
  cfg.seed = seed;
  cfg.train_per_class = 2;
  cfg.eval_per_class = 1;
  cfg.test_per_class = 1;
  cfg.synth.window_len = 40;
  cfg.shift_range = 4;
  cfg.aug_sigma = 0.003;
  return cfg;
}

// Disjoint-set connectivity check used to validate sampled trees.
struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(static_cast<std::size_t>(n)) {
    std::iota(parent.begin(), parent.end(), 0);
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

}  // namespace

TEST_CASE("normalized adjacency matches the hand-worked small cases") {
  Tensor one = normalize_adjacency(Tensor::Zero(1, 1));
  CHECK(one(0, 0) == doctest::Approx(1.0).epsilon(1e-15));

  Tensor two = normalize_adjacency(path_adjacency(2));
  for (Index i = 0; i < 2; ++i) {
    for (Index j = 0; j < 2; ++j) {
      CHECK(two(i, j) == doctest::Approx(0.5).epsilon(1e-15));
    }
  }

  Tensor three = normalize_adjacency(path_adjacency(3));
  CHECK(three(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(three(1, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(three(2, 2) == doctest::Approx(0.5).epsilon(1e-12));
  double offd = 1.0 / std::sqrt(6.0);
  CHECK(three(0, 1) == doctest::Approx(offd).epsilon(1e-12));
  CHECK(three(1, 2) == doctest::Approx(offd).epsilon(1e-12));
  CHECK(three(0, 2) == 0.0);
}

TEST_CASE("normalized adjacency rejects malformed inputs") {
  Tensor asym = Tensor::Zero(2, 2);
  asym(0, 1) = 1.0;
  CHECK_THROWS_AS(normalize_adjacency(asym), ContractError);

  Tensor selfloop = Tensor::Zero(2, 2);
  selfloop(0, 0) = 1.0;
  CHECK_THROWS_AS(normalize_adjacency(selfloop), ContractError);

  Tensor negd = Tensor::Zero(2, 2);
  negd(0, 1) = negd(1, 0) = -1.0;
  CHECK_THROWS_AS(normalize_adjacency(negd), ContractError);

  CHECK_THROWS_AS(normalize_adjacency(Tensor::Zero(2, 3)), ContractError);
}

TEST_CASE("normalized adjacency is symmetric with spectral radius at most 1") {
  rng::Stream g(23, "spectral");
  for (int n = 2; n <= 8; ++n) {
    for (int rep = 0; rep < 6; ++rep) {
      Tensor a = Tensor::Zero(n, n);
      for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
          if (g.uniform() < 0.4) a(i, j) = a(j, i) = 1.0;
        }
      }
      Tensor m = normalize_adjacency(a);
      for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < n; ++j) {
          CHECK(std::abs(m(i, j) - m(j, i)) < 1e-15);
        }
      }
      double radius = 0.0;
      for (double ev : testsupport::jacobi_eigenvalues(m)) {
        radius = std::max(radius, std::abs(ev));
      }
      CHECK(radius <= 1.0 + 1e-9);
    }
  }
}

TEST_CASE("Pruefer decoding matches the hand oracles") {
  auto star = prufer_decode({0, 0}, 4);
  REQUIRE(star.size() == 3);
  std::set<std::pair<int, int>> edges;
  for (auto [u, v] : star) edges.insert({std::min(u, v), std::max(u, v)});
  CHECK(edges == std::set<std::pair<int, int>>{{0, 1}, {0, 2}, {0, 3}});

  auto two = prufer_decode({}, 2);
  REQUIRE(two.size() == 1);
  CHECK(std::min(two[0].first, two[0].second) == 0);
  CHECK(std::max(two[0].first, two[0].second) == 1);

  CHECK_THROWS_AS(prufer_decode({0}, 4), ContractError);
  CHECK_THROWS_AS(prufer_decode({5, 0}, 4), ContractError);
  CHECK_THROWS_AS(prufer_decode({}, 1), ContractError);

  rng::Stream g(1, "neg");
  CHECK_THROWS_AS(sample_negative_tree(1, g), ContractError);
}

TEST_CASE("sampled negative trees are connected spanning trees") {
  rng::Stream g(31, "trees");
  for (int rep = 0; rep < 1000; ++rep) {
    Tensor a = sample_negative_tree(34, g);
    REQUIRE(a.rows() == 34);
    int edges = 0;
    UnionFind uf(34);
    bool acyclic = true;
    for (Index i = 0; i < 34; ++i) {
      CHECK(a(i, i) == 0.0);
      for (Index j = i + 1; j < 34; ++j) {
        CHECK(a(i, j) == a(j, i));
        if (a(i, j) != 0.0) {
          ++edges;
          acyclic = acyclic && uf.unite(static_cast<int>(i), static_cast<int>(j));
        }
      }
    }
    CHECK(edges == 33);
    CHECK(acyclic);  // 33 cycle-free edges on 34 nodes: connected
  }
}

TEST_CASE("negative tree sampling is uniform over the 16 labeled trees") {
  rng::Stream g(7, "uniform-trees");
  std::map<int, int> counts;
  const int kSamples = 10000;
  for (int rep = 0; rep < kSamples; ++rep) {
    Tensor a = sample_negative_tree(4, g);
    int key = 0;
    int bit = 0;
    for (Index i = 0; i < 4; ++i) {
      for (Index j = i + 1; j < 4; ++j) {
        if (a(i, j) != 0.0) key |= 1 << bit;
        ++bit;
      }
    }
    ++counts[key];
  }
  CHECK(counts.size() == 16);
  for (const auto& [key, c] : counts) {
    CHECK(c > kSamples / 16.0 * 0.7);
    CHECK(c < kSamples / 16.0 * 1.3);
  }
}

TEST_CASE("readout is invariant to a consistent node relabeling") {
  GraphEncConfig c = toy_config();
  c.in_dim = 5;
  GraphEncoder enc = init_graph_encoder(c, 3);
  rng::Stream g(17, "perm");
  const int n = 7;
  Tensor a = Tensor::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (g.uniform() < 0.5) a(i, j) = a(j, i) = 1.0;
    }
  }
  Tensor x = testsupport::random_tensor(n, 5, g);
  auto [nodes, graph] = gcn_encode(enc, {a, x, Polarity::kPositive, 0});

  std::vector<int> perm = {3, 0, 6, 1, 5, 2, 4};
  Tensor pa = Tensor::Zero(n, n);
  Tensor px(n, 5);
  for (int i = 0; i < n; ++i) {
    px.row(perm[static_cast<std::size_t>(i)]) = x.row(i);
    for (int j = 0; j < n; ++j) {
      pa(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]) =
          a(i, j);
    }
  }
  auto [pnodes, pgraph] = gcn_encode(enc, {pa, px, Polarity::kPositive, 0});
  for (Index k = 0; k < graph.cols(); ++k) {
    CHECK(std::abs(graph(0, k) - pgraph(0, k)) <= 1e-9);
  }
  for (int i = 0; i < n; ++i) {
    for (Index k = 0; k < nodes.cols(); ++k) {
      CHECK(std::abs(nodes(i, k) -
                     pnodes(perm[static_cast<std::size_t>(i)], k)) <= 1e-9);
    }
  }
}

TEST_CASE("degenerate graphs: single node and all-zero features") {
  GraphEncoder enc = init_graph_encoder(toy_config(), 5);
  Tensor x1 = Tensor::Ones(1, 2);
  auto [n1, g1] = gcn_encode(enc, {Tensor::Zero(1, 1), x1, Polarity::kPositive, 0});
  CHECK(same_bits(n1, g1));  // mean over one node is that node

  Tensor z = Tensor::Zero(3, 2);
  auto [nz, gz] = gcn_encode(enc, {path_adjacency(3), z, Polarity::kPositive, 0});
  CHECK(nz.isZero(0.0));  // no biases anywhere in the propagation
  CHECK(gz.isZero(0.0));

  Tensor bad = Tensor::Ones(3, 4);
  CHECK_THROWS_AS(gcn_encode(enc, {path_adjacency(3), bad, Polarity::kPositive, 0}),
                  ContractError);
}

TEST_CASE("a zero node vector reaches only the discriminator bias pathway") {
  GraphEncoder enc = init_graph_encoder(toy_config(), 9);
  enc.params.at("disc.b1").setConstant(0.3);
  enc.params.at("disc.b2").setConstant(-0.2);
  Tensor node = Tensor::Zero(1, 7);
  rng::Stream g(3, "disc");
  Tensor graph = testsupport::random_tensor(1, 7, g);

  // fused input is zero, so the score is leaky(b1) * w2 + b2 exactly
  Tensor h = enc.params.at("disc.b1");  // positive entries: leaky is identity
  double expected = (h * enc.params.at("disc.w2"))(0, 0) +
                    enc.params.at("disc.b2")(0, 0);
  double s = discriminator_score(enc, node, graph);
  CHECK(s == doctest::Approx(expected).epsilon(1e-14));

  Tensor graph2 = graph;  // same values, different object
  CHECK(discriminator_score(enc, node, graph2) == s);

  GraphEncConfig bc = toy_config();
  bc.fusion = DiscFusion::kBilinear;
  GraphEncoder benc = init_graph_encoder(bc, 9);
  CHECK(discriminator_score(benc, node, graph) == 0.0);

  CHECK_THROWS_AS(discriminator_score(enc, Tensor::Zero(1, 6), graph),
                  ContractError);
}

TEST_CASE("js estimator analytics: zero point, sign, and asymptote") {
  ad::Tape t;
  Var zp = t.constant(Tensor::Zero(2, 3));
  Var zn = t.constant(Tensor::Zero(2, 3));
  double at_zero = js_mi_loss(zp, zn).value()(0, 0);
  CHECK(std::abs(at_zero + std::log(2.0)) < 1e-12);

  rng::Stream g(6, "js");
  for (int rep = 0; rep < 10; ++rep) {
    ad::Tape tt;
    Var p = tt.constant(testsupport::random_tensor(1, 8, g, -5.0, 5.0));
    Var q = tt.constant(testsupport::random_tensor(1, 8, g, -5.0, 5.0));
    CHECK(js_mi_loss(p, q).value()(0, 0) < 0.0);
  }

  ad::Tape ta;
  Var sp = ta.constant(Tensor::Constant(1, 4, 40.0));
  Var sn = ta.constant(Tensor::Constant(1, 4, -40.0));
  double near_zero = js_mi_loss(sp, sn).value()(0, 0);
  CHECK(near_zero < 0.0);
  CHECK(near_zero > -1e-15);

  ad::Tape tb;
  CHECK_THROWS_AS(js_mi_loss(tb.constant(Tensor::Zero(1, 2)),
                             tb.constant(Tensor::Zero(1, 3))),
                  ContractError);
}

TEST_CASE("js estimator gradients push scores the documented way") {
  rng::Stream g(8, "js-grad");
  ParamSet ps;
  ps.add("pos", testsupport::random_tensor(2, 3, g, -2.0, 2.0));
  ps.add("neg", testsupport::random_tensor(2, 3, g, -2.0, 2.0));
  auto fn = [](ad::Tape& t, const ParamSet& p) {
    return js_mi_loss(t.param("pos", p.at("pos")),
                      t.param("neg", p.at("neg")));
  };
  CHECK(testsupport::grad_check(fn, ps) < 1e-4);

  ad::Tape t;
  auto mi = fn(t, ps);
  auto grads = t.backward(mi);
  const Tensor& gp = grads.at("pos");
  const Tensor& gn = grads.at("neg");
  for (Index i = 0; i < 2; ++i) {
    for (Index j = 0; j < 3; ++j) {
      CHECK(gp(i, j) > 0.0);
      CHECK(gn(i, j) < 0.0);
    }
  }
}

TEST_CASE("gcn plus discriminator pass a finite-difference check") {
  GraphEncConfig c = toy_config();
  Tensor pos_adj = path_adjacency(3);
  Tensor neg_adj = Tensor::Zero(3, 3);
  neg_adj(0, 1) = neg_adj(1, 0) = 1.0;
  neg_adj(0, 2) = neg_adj(2, 0) = 1.0;
  rng::Stream g(27, "toy");
  Tensor feats = testsupport::random_tensor(3, 2, g);

  auto make_fn = [&](const GraphEncConfig& cfg) {
    return [&, cfg](ad::Tape& t, const ParamSet& ps) {
      GraphEncoder e{cfg, ps};
      GraphVars p = encode_graph(t, e, normalize_adjacency(pos_adj), feats);
      GraphVars q = encode_graph(t, e, normalize_adjacency(neg_adj), feats);
      Var pos = transpose(discriminator_scores(e, p.nodes, p.graph));
      Var negs = transpose(discriminator_scores(e, q.nodes, p.graph));
      return ad::neg(js_mi_loss(pos, negs));
    };
  };
  GraphEncoder enc = init_graph_encoder(c, 17);
  CHECK(testsupport::grad_check(make_fn(c), enc.params) < 1e-3);

  GraphEncConfig bc = c;
  bc.fusion = DiscFusion::kBilinear;
  GraphEncoder benc = init_graph_encoder(bc, 18);
  CHECK(testsupport::grad_check(make_fn(bc), benc.params) < 1e-3);
}

TEST_CASE("training separates positive graphs from random trees") {
  auto topo = feeder::load_topology(data_file("ieee34.topo"));
  feeder::Dataset d = feeder::generate_dataset(topo, tiny_gen());
  const int n = topo.n_buses();

  // shared per-bus pattern plus a small per-record wiggle; negatives break
  // the topology, not the features, so this is learnable by structure alone
  rng::Stream fg(99, "graph-feats");
  Tensor base = testsupport::random_tensor(n, 6, fg);
  std::vector<Tensor> feats;
  for (int r = 0; r < d.n_records(); ++r) {
    rng::Stream rg = fg.fork(static_cast<std::uint64_t>(r));
    feats.push_back(base + 0.05 * testsupport::random_tensor(n, 6, rg));
  }

  TrainGraphConfig cfg;
  cfg.epochs = 25;
  cfg.batch = 8;
  cfg.lr = 3e-3;
  cfg.seed = 2;
  cfg.arch.hidden1 = 8;
  cfg.arch.hidden2 = 6;
  cfg.arch.disc_hidden = 4;
  GraphTrainResult res = train_graph_encoder(feats, d, topo, cfg);

  REQUIRE(res.train_mi.size() == res.eval_mi.size());
  REQUIRE(!res.train_mi.empty());
  for (double v : res.train_mi) {
    CHECK(std::isfinite(v));
    CHECK(v < 0.0);
  }
  CHECK(res.train_mi.back() > res.train_mi.front());
  double best = *std::max_element(res.eval_mi.begin(), res.eval_mi.end());
  CHECK(res.eval_mi[static_cast<std::size_t>(res.best_epoch)] == best);

  // held-out discrimination accuracy at threshold zero
  int hits = 0;
  int total = 0;
  rng::Stream ng(70, "acc-neg");
  for (int ri : d.split_indices(feeder::Split::kEval)) {
    auto [nodes, graph] = gcn_encode(
        res.enc, {topo.adjacency(), feats[static_cast<std::size_t>(ri)],
                  Polarity::kPositive, d.record(ri).event_id});
    rng::Stream s = ng.fork(static_cast<std::uint64_t>(d.record(ri).event_id));
    Tensor neg_adj = sample_negative_tree(n, s);
    auto [nn, ngr] = gcn_encode(
        res.enc, {neg_adj, feats[static_cast<std::size_t>(ri)],
                  Polarity::kNegative, d.record(ri).event_id});
    for (Index j = 0; j < nodes.rows(); ++j) {
      hits += discriminator_score(res.enc, nodes.row(j), graph) > 0.0;
      hits += discriminator_score(res.enc, nn.row(j), graph) < 0.0;
      total += 2;
    }
  }
  double acc = static_cast<double>(hits) / static_cast<double>(total);
  CHECK(acc > 0.6);

  GraphTrainResult rep = train_graph_encoder(feats, d, topo, cfg);
  CHECK(rep.train_mi == res.train_mi);
  CHECK(rep.eval_mi == res.eval_mi);
  CHECK(same_params(rep.enc.params, res.enc.params));

  cfg.fresh_negatives = false;
  cfg.epochs = 2;
  GraphTrainResult fixed = train_graph_encoder(feats, d, topo, cfg);
  CHECK(fixed.train_mi.size() == 2);

  std::vector<Tensor> short_feats(feats.begin(), feats.end() - 1);
  CHECK_THROWS_AS(train_graph_encoder(short_feats, d, topo, cfg),
                  ContractError);
  std::vector<Tensor> bad_rows(feats);
  bad_rows[0] = Tensor::Zero(n - 1, 6);
  CHECK_THROWS_AS(train_graph_encoder(bad_rows, d, topo, cfg), ContractError);
}

TEST_CASE("graph_only training scores whole graphs and guards its mode") {
  auto topo = feeder::load_topology(data_file("ieee34.topo"));
  feeder::Dataset d = feeder::generate_dataset(topo, tiny_gen(17));
  rng::Stream fg(41, "go-feats");
  std::vector<Tensor> feats;
  for (int r = 0; r < d.n_records(); ++r) {
    feats.push_back(testsupport::random_tensor(topo.n_buses(), 4, fg));
  }
  TrainGraphConfig cfg;
  cfg.epochs = 3;
  cfg.batch = 8;
  cfg.seed = 6;
  cfg.arch.hidden1 = 6;
  cfg.arch.hidden2 = 4;
  cfg.arch.disc_hidden = 3;
  cfg.arch.mode = EncodeMode::kGraphOnly;
  GraphTrainResult res = train_graph_encoder(feats, d, topo, cfg);
  CHECK(res.train_mi.size() == 3);
  for (double v : res.train_mi) CHECK(v < 0.0);

  Tensor reps = encode_events(res.enc, feats, topo, EncodeMode::kGraphOnly);
  CHECK(reps.rows() == d.n_records());
  CHECK(reps.cols() == 10);  // hidden1 + hidden2
  CHECK_THROWS_AS(encode_events(res.enc, feats, topo, EncodeMode::kNodeGraph),
                  ContractError);

  cfg.arch.fusion = DiscFusion::kBilinear;
  CHECK_THROWS_AS(init_graph_encoder(cfg.arch, 1), ContractError);
}

TEST_CASE("encoded events line up with records and repeat themselves") {
  auto topo = feeder::load_topology(data_file("ieee34.topo"));
  GraphEncConfig c = toy_config();
  c.in_dim = 3;
  GraphEncoder enc = init_graph_encoder(c, 12);
  rng::Stream g(5, "enc-events");
  std::vector<Tensor> feats;
  for (int r = 0; r < 4; ++r) {
    feats.push_back(testsupport::random_tensor(topo.n_buses(), 3, g));
  }
  feats.push_back(feats[1]);  // identical features → identical representation

  Tensor reps = encode_events(enc, feats, topo, EncodeMode::kNodeGraph);
  REQUIRE(reps.rows() == 5);
  REQUIRE(reps.cols() == 7);
  CHECK(same_bits(reps.row(1), reps.row(4)));
  Tensor again = encode_events(enc, feats, topo, EncodeMode::kNodeGraph);
  CHECK(same_bits(reps, again));
}

TEST_CASE("graph encoder checkpoints round trip and reject mismatches") {
  GraphEncoder enc = init_graph_encoder(toy_config(), 44);
  auto path = temp_file("genc.model");
  save_graph_encoder(enc, path);
  GraphEncoder back = load_graph_encoder(path);
  CHECK(back.cfg.in_dim == enc.cfg.in_dim);
  CHECK(back.cfg.mode == enc.cfg.mode);
  CHECK(back.cfg.fusion == enc.cfg.fusion);
  CHECK(same_params(back.params, enc.params));

  GraphEncConfig bc = toy_config();
  bc.fusion = DiscFusion::kBilinear;
  GraphEncoder benc = init_graph_encoder(bc, 45);
  auto bpath = temp_file("genc_bilin.model");
  save_graph_encoder(benc, bpath);
  GraphEncoder bback = load_graph_encoder(bpath);
  CHECK(bback.cfg.fusion == DiscFusion::kBilinear);
  CHECK(same_params(bback.params, benc.params));

  CHECK_THROWS_AS(load_graph_encoder(temp_file("absent.model")),
                  MissingArtifactError);

  io::ModelFile wrong;
  wrong.meta = {{"kind", "aed"}};
  auto wpath = temp_file("wrongkind.model");
  io::write_model(wrong, wpath);
  CHECK_THROWS_AS(load_graph_encoder(wpath), SchemaError);

  io::ModelFile m = io::read_model(path);
  m.meta[1] = {"mode", "sideways"};
  io::write_model(m, wpath);
  CHECK_THROWS_AS(load_graph_encoder(wpath), SchemaError);

  io::ModelFile shp = io::read_model(path);
  ParamSet mangled;
  for (std::size_t i = 0; i < shp.params.size(); ++i) {
    if (shp.params.name(i) == "gcn.w2") {
      mangled.add("gcn.w2", Tensor::Zero(2, 2));
    } else {
      mangled.add(shp.params.name(i), shp.params.value(i));
    }
  }
  shp.params = mangled;
  io::write_model(shp, wpath);
  CHECK_THROWS_AS(load_graph_encoder(wpath), SchemaError);
}
