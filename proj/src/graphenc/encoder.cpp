#include "gpmu/graphenc/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>

#include "gpmu/errors.hpp"
#include "gpmu/io/model.hpp"
#include "gpmu/numerics/adam.hpp"

namespace gpmu::graphenc {

namespace {

void check_config(const GraphEncConfig& c) {
  if (c.in_dim <= 0 || c.hidden1 <= 0 || c.hidden2 <= 0 || c.disc_hidden <= 0) {
    throw ContractError("graph encoder config has a non-positive dimension");
  }
  if (!(c.leak > 0.0) || !(c.leak < 1.0)) {
    throw ContractError("graph encoder leak slope must lie in (0, 1)");
  }
  if (c.mode == EncodeMode::kGraphOnly && c.fusion == DiscFusion::kBilinear) {
    throw ContractError(
        "bilinear fusion scores pairs only and cannot drive graph_only "
        "training");
  }
}

Index repr_dim(const GraphEncConfig& c) { return c.hidden1 + c.hidden2; }

// Positive and negative scores for the events of `idx`, concatenated as
// 1 x K rows on one tape. Negative adjacencies come from `neg_for`.
struct BatchScores {
  Var pos;
  Var neg;
};

template <class NegFn>
BatchScores batch_scores(Tape& t, const GraphEncoder& enc,
                         const Tensor& norm_pos,
                         const std::vector<Tensor>& features,
                         const feeder::Dataset& d,
                         const std::vector<int>& idx, std::size_t first,
                         std::size_t count, NegFn&& neg_for) {
  BatchScores out;
  bool started = false;
  for (std::size_t k = first; k < first + count; ++k) {
    int ri = idx[k];
    const Tensor& x = features[static_cast<std::size_t>(ri)];
    GraphVars p = encode_graph(t, enc, norm_pos, x);
    Tensor neg_adj = neg_for(d.record(ri).event_id);
    GraphVars q = encode_graph(t, enc, normalize_adjacency(neg_adj), x);
    Var ps, ns;
    if (enc.cfg.mode == EncodeMode::kNodeGraph) {
      ps = transpose(discriminator_scores(enc, p.nodes, p.graph));
      ns = transpose(discriminator_scores(enc, q.nodes, p.graph));
    } else {
      ps = vector_scores(enc, p.graph);
      ns = vector_scores(enc, q.graph);
    }
    if (!started) {
      out.pos = ps;
      out.neg = ns;
      started = true;
    } else {
      out.pos = concat_cols(out.pos, ps);
      out.neg = concat_cols(out.neg, ns);
    }
  }
  return out;
}

}  // namespace

const char* fusion_name(DiscFusion f) {
  return f == DiscFusion::kProduct ? "product" : "bilinear";
}

DiscFusion fusion_from_name(const std::string& name) {
  if (name == "product") return DiscFusion::kProduct;
  if (name == "bilinear") return DiscFusion::kBilinear;
  throw ParseError("unknown discriminator fusion: " + name);
}

const char* mode_name(EncodeMode m) {
  return m == EncodeMode::kNodeGraph ? "node_graph" : "graph_only";
}

EncodeMode mode_from_name(const std::string& name) {
  if (name == "node_graph") return EncodeMode::kNodeGraph;
  if (name == "graph_only") return EncodeMode::kGraphOnly;
  throw ParseError("unknown encode mode: " + name);
}

GraphEncoder init_graph_encoder(const GraphEncConfig& cfg, std::uint64_t seed) {
  check_config(cfg);
  rng::Stream g(seed, "graph-init");
  GraphEncoder enc;
  enc.cfg = cfg;
  Index d = repr_dim(cfg);
  rng::Stream s1 = g.fork("gcn.w1");
  enc.params.add("gcn.w1", glorot_uniform<double>(cfg.in_dim, cfg.hidden1, s1));
  rng::Stream s2 = g.fork("gcn.w2");
  enc.params.add("gcn.w2",
                 glorot_uniform<double>(cfg.hidden1, cfg.hidden2, s2));
  if (cfg.fusion == DiscFusion::kProduct) {
    rng::Stream d1 = g.fork("disc.w1");
    enc.params.add("disc.w1", glorot_uniform<double>(d, cfg.disc_hidden, d1));
    enc.params.add("disc.b1", Tensor::Zero(1, cfg.disc_hidden));
    rng::Stream d2 = g.fork("disc.w2");
    enc.params.add("disc.w2", glorot_uniform<double>(cfg.disc_hidden, 1, d2));
    enc.params.add("disc.b2", Tensor::Zero(1, 1));
  } else {
    rng::Stream db = g.fork("disc.bilin");
    enc.params.add("disc.bilin", glorot_uniform<double>(d, d, db));
  }
  return enc;
}

GraphVars encode_graph(Tape& t, const GraphEncoder& enc, const Tensor& norm_adj,
                       const Tensor& features) {
  check_config(enc.cfg);
  if (norm_adj.rows() != norm_adj.cols() ||
      features.rows() != norm_adj.rows()) {
    throw ContractError("adjacency " + shape_str(norm_adj) +
                        " and features " + shape_str(features) +
                        " disagree on the node count");
  }
  if (features.cols() != enc.cfg.in_dim) {
    throw ContractError("features are " + std::to_string(features.cols()) +
                        "-dimensional, encoder expects " +
                        std::to_string(enc.cfg.in_dim));
  }
  Var a = t.constant(norm_adj);
  Var x = t.constant(features);
  Var w1 = t.param("gcn.w1", enc.params.at("gcn.w1"));
  Var w2 = t.param("gcn.w2", enc.params.at("gcn.w2"));
  Var h1 = leaky_relu(matmul(matmul(a, x), w1), enc.cfg.leak);
  Var h2 = leaky_relu(matmul(matmul(a, h1), w2), enc.cfg.leak);
  Var nodes = concat_cols(h1, h2);
  return {nodes, mean_rows(nodes)};
}

Var discriminator_scores(const GraphEncoder& enc, Var nodes, Var graph) {
  Tape& t = *nodes.tape;
  Index d = repr_dim(enc.cfg);
  if (nodes.cols() != d || graph.rows() != 1 || graph.cols() != d) {
    throw ContractError("discriminator expects K x " + std::to_string(d) +
                        " nodes and a 1 x " + std::to_string(d) + " graph");
  }
  if (enc.cfg.fusion == DiscFusion::kBilinear) {
    Var b = t.param("disc.bilin", enc.params.at("disc.bilin"));
    return matmul(matmul(nodes, b), transpose(graph));
  }
  Var fused = mul(nodes, tile_rows(graph, nodes.rows()));
  return vector_scores(enc, fused);
}

Var vector_scores(const GraphEncoder& enc, Var vecs) {
  if (enc.cfg.fusion != DiscFusion::kProduct) {
    throw ContractError("single-vector scoring requires product fusion");
  }
  Tape& t = *vecs.tape;
  if (vecs.cols() != repr_dim(enc.cfg)) {
    throw ContractError("discriminator input must be " +
                        std::to_string(repr_dim(enc.cfg)) + " wide, got " +
                        std::to_string(vecs.cols()));
  }
  Var w1 = t.param("disc.w1", enc.params.at("disc.w1"));
  Var b1 = t.param("disc.b1", enc.params.at("disc.b1"));
  Var w2 = t.param("disc.w2", enc.params.at("disc.w2"));
  Var b2 = t.param("disc.b2", enc.params.at("disc.b2"));
  Var h = leaky_relu(add_rowvec(matmul(vecs, w1), b1), enc.cfg.leak);
  return add_rowvec(matmul(h, w2), b2);
}

Var js_mi_loss(Var pos, Var negs) {
  if (pos.rows() != negs.rows() || pos.cols() != negs.cols()) {
    throw ContractError("positive and negative score collections must pair "
                        "up one to one");
  }
  double k = static_cast<double>(pos.rows() * pos.cols());
  if (k == 0.0) throw ContractError("empty score collections");
  Var a = sum(softplus(neg(pos)));
  Var b = sum(softplus(negs));
  return scale(add(a, b), -1.0 / (2.0 * k));
}

std::pair<Tensor, Tensor> gcn_encode(const GraphEncoder& enc,
                                     const EventGraph& g) {
  Tape t;
  GraphVars v = encode_graph(t, enc, normalize_adjacency(g.adjacency),
                             g.features);
  return {v.nodes.value(), v.graph.value()};
}

double discriminator_score(const GraphEncoder& enc, const Tensor& node,
                           const Tensor& graph) {
  Tape t;
  Var s = discriminator_scores(enc, t.constant(node), t.constant(graph));
  return s.value()(0, 0);
}

GraphTrainResult train_graph_encoder(const std::vector<Tensor>& features,
                                     const feeder::Dataset& d,
                                     const feeder::FeederTopology& topo,
                                     const TrainGraphConfig& cfg) {
  if (cfg.epochs < 1 || cfg.batch < 1 || cfg.patience < 1 || !(cfg.lr > 0.0)) {
    throw ContractError("graph training config has a non-positive field");
  }
  if (features.size() != static_cast<std::size_t>(d.n_records())) {
    throw ContractError("feature count " + std::to_string(features.size()) +
                        " does not match the dataset's " +
                        std::to_string(d.n_records()) + " records");
  }
  const int n = topo.n_buses();
  for (const Tensor& x : features) {
    if (x.rows() != n) {
      throw ContractError("feature matrix covers " + std::to_string(x.rows()) +
                          " buses, feeder has " + std::to_string(n));
    }
    if (x.cols() != features[0].cols() || !x.allFinite()) {
      throw ContractError("feature matrices must share one finite width");
    }
  }
  GraphEncConfig arch = cfg.arch;
  arch.in_dim = static_cast<int>(features[0].cols());
  check_config(arch);

  const Tensor norm_pos = normalize_adjacency(topo.adjacency());
  const std::vector<int>& train_idx = d.split_indices(feeder::Split::kTrain);
  const std::vector<int>& eval_idx = d.split_indices(feeder::Split::kEval);

  GraphTrainResult res;
  res.enc = init_graph_encoder(arch, cfg.seed);
  AdamState opt;
  AdamConfig acfg;
  acfg.lr = cfg.lr;

  rng::Stream shuffle_root(cfg.seed, "graph-shuffle");
  rng::Stream neg_root(cfg.seed, "neg");
  rng::Stream eval_neg_root(cfg.seed, "eval-neg");

  ParamSet best = res.enc.params;
  double best_eval = -std::numeric_limits<double>::infinity();
  int bad_epochs = 0;
  std::set<int> consumed;

  std::vector<int> order(train_idx.begin(), train_idx.end());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng::Stream g = shuffle_root.fork(static_cast<std::uint64_t>(epoch));
    std::copy(train_idx.begin(), train_idx.end(), order.begin());
    for (std::size_t i = order.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(g.below(i));
      std::swap(order[i - 1], order[j]);
    }
    rng::Stream neg_epoch =
        neg_root.fork(cfg.fresh_negatives ? static_cast<std::uint64_t>(epoch)
                                          : std::uint64_t{0});
    auto neg_for = [&](int event_id) {
      rng::Stream s = neg_epoch.fork(static_cast<std::uint64_t>(event_id));
      return sample_negative_tree(n, s);
    };

    double mi_sum = 0.0;
    double k_sum = 0.0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch)) {
      std::size_t m =
          std::min(static_cast<std::size_t>(cfg.batch), order.size() - start);
      for (std::size_t k = 0; k < m; ++k) {
        consumed.insert(d.record(order[start + k]).event_id);
      }
      Tape t;
      BatchScores s = batch_scores(t, res.enc, norm_pos, features, d, order,
                                   start, m, neg_for);
      Var mi = js_mi_loss(s.pos, s.neg);
      Var loss = neg(mi);
      double lv = loss.value()(0, 0);
      if (!std::isfinite(lv)) {
        throw NumericError("graph training loss diverged at epoch " +
                           std::to_string(epoch));
      }
      double k = static_cast<double>(s.pos.cols());
      mi_sum += -lv * k;
      k_sum += k;
      ad::GradMap grads = t.backward(loss);
      opt.step(res.enc.params, grads, acfg);
    }
    res.train_mi.push_back(mi_sum / k_sum);

    auto eval_neg_for = [&](int event_id) {
      rng::Stream s = eval_neg_root.fork(static_cast<std::uint64_t>(event_id));
      return sample_negative_tree(n, s);
    };
    double emi_sum = 0.0;
    double ek_sum = 0.0;
    for (std::size_t start = 0; start < eval_idx.size();
         start += static_cast<std::size_t>(cfg.batch)) {
      std::size_t m =
          std::min(static_cast<std::size_t>(cfg.batch), eval_idx.size() - start);
      Tape t;
      BatchScores s = batch_scores(t, res.enc, norm_pos, features, d, eval_idx,
                                   start, m, eval_neg_for);
      Var mi = js_mi_loss(s.pos, s.neg);
      double k = static_cast<double>(s.pos.cols());
      emi_sum += mi.value()(0, 0) * k;
      ek_sum += k;
    }
    double emi = emi_sum / ek_sum;
    if (!std::isfinite(emi)) {
      throw NumericError("graph eval estimate is non-finite at epoch " +
                         std::to_string(epoch));
    }
    res.eval_mi.push_back(emi);
    if (emi > best_eval) {
      best_eval = emi;
      best = res.enc.params;
      res.best_epoch = epoch;
      bad_epochs = 0;
    } else if (++bad_epochs >= cfg.patience) {
      break;
    }
  }
  res.enc.params = std::move(best);
  res.train_event_ids.assign(consumed.begin(), consumed.end());
  return res;
}

Tensor encode_events(const GraphEncoder& enc,
                     const std::vector<Tensor>& features,
                     const feeder::FeederTopology& topo, EncodeMode mode) {
  check_config(enc.cfg);
  if (mode != enc.cfg.mode) {
    throw ContractError(std::string("encoder was trained in ") +
                        mode_name(enc.cfg.mode) + " mode, asked to encode in " +
                        mode_name(mode));
  }
  if (features.empty()) throw ContractError("no events to encode");
  const Tensor norm_pos = normalize_adjacency(topo.adjacency());
  Tensor out(static_cast<Index>(features.size()), repr_dim(enc.cfg));
  for (std::size_t i = 0; i < features.size(); ++i) {
    Tape t;
    GraphVars v = encode_graph(t, enc, norm_pos, features[i]);
    out.row(static_cast<Index>(i)) = v.graph.value();
  }
  if (!out.allFinite()) {
    throw NumericError("event encoding produced non-finite values");
  }
  return out;
}

void save_graph_encoder(const GraphEncoder& enc,
                        const std::filesystem::path& path) {
  check_config(enc.cfg);
  io::ModelFile m;
  char leak[32];
  std::snprintf(leak, sizeof leak, "%.17g", enc.cfg.leak);
  m.meta = {{"kind", "graph-encoder"},
            {"mode", mode_name(enc.cfg.mode)},
            {"fusion", fusion_name(enc.cfg.fusion)},
            {"in_dim", std::to_string(enc.cfg.in_dim)},
            {"hidden1", std::to_string(enc.cfg.hidden1)},
            {"hidden2", std::to_string(enc.cfg.hidden2)},
            {"disc_hidden", std::to_string(enc.cfg.disc_hidden)},
            {"leak", leak}};
  m.params = enc.params;
  io::write_model(m, path);
}

GraphEncoder load_graph_encoder(const std::filesystem::path& path) {
  io::ModelFile m = io::read_model(path);
  if (m.meta_value("kind") != "graph-encoder") {
    throw SchemaError("model kind is " + m.meta_value("kind") +
                      ", expected graph-encoder");
  }
  GraphEncoder enc;
  auto meta_int = [&](const char* key) {
    const std::string& s = m.meta_value(key);
    try {
      std::size_t used = 0;
      int v = std::stoi(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw SchemaError(std::string("model meta ") + key + "=" + s +
                        " is not an integer");
    }
  };
  try {
    enc.cfg.mode = mode_from_name(m.meta_value("mode"));
    enc.cfg.fusion = fusion_from_name(m.meta_value("fusion"));
  } catch (const ParseError& e) {
    throw SchemaError(e.what());
  }
  enc.cfg.in_dim = meta_int("in_dim");
  enc.cfg.hidden1 = meta_int("hidden1");
  enc.cfg.hidden2 = meta_int("hidden2");
  enc.cfg.disc_hidden = meta_int("disc_hidden");
  {
    const std::string& s = m.meta_value("leak");
    try {
      std::size_t used = 0;
      enc.cfg.leak = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
    } catch (const std::exception&) {
      throw SchemaError("model meta leak=" + s + " is not a number");
    }
  }
  try {
    check_config(enc.cfg);
  } catch (const ContractError& e) {
    throw SchemaError(std::string("model meta is inconsistent: ") + e.what());
  }

  std::vector<std::pair<std::string, std::pair<Index, Index>>> expect;
  Index dd = repr_dim(enc.cfg);
  Index dh = enc.cfg.disc_hidden;
  expect.push_back({"gcn.w1", {enc.cfg.in_dim, enc.cfg.hidden1}});
  expect.push_back({"gcn.w2", {enc.cfg.hidden1, enc.cfg.hidden2}});
  if (enc.cfg.fusion == DiscFusion::kProduct) {
    expect.push_back({"disc.w1", {dd, dh}});
    expect.push_back({"disc.b1", {1, dh}});
    expect.push_back({"disc.w2", {dh, 1}});
    expect.push_back({"disc.b2", {1, 1}});
  } else {
    expect.push_back({"disc.bilin", {dd, dd}});
  }
  if (m.params.size() != expect.size()) {
    throw SchemaError("model holds " + std::to_string(m.params.size()) +
                      " parameters, expected " + std::to_string(expect.size()));
  }
  for (const auto& [name, shape] : expect) {
    if (!m.params.has(name)) {
      throw SchemaError("model is missing parameter " + name);
    }
    const Tensor& v = m.params.at(name);
    if (v.rows() != shape.first || v.cols() != shape.second) {
      throw SchemaError("parameter " + name + " has shape " + shape_str(v) +
                        ", architecture implies " +
                        shape_str(shape.first, shape.second));
    }
  }
  enc.params = std::move(m.params);
  return enc;
}

}  // namespace gpmu::graphenc
