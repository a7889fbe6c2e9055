#include "gpmu/pipeline/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "gpmu/cluster/ari.hpp"
#include "gpmu/cluster/gmm.hpp"
#include "gpmu/cluster/pca.hpp"
#include "gpmu/errors.hpp"
#include "gpmu/feeder/dataset.hpp"
#include "gpmu/feeder/dataset_io.hpp"
#include "gpmu/feeder/events.hpp"
#include "gpmu/feeder/loadflow.hpp"
#include "gpmu/graphenc/encoder.hpp"
#include "gpmu/io/model.hpp"
#include "gpmu/io/text.hpp"
#include "gpmu/rng.hpp"
#include "gpmu/temporal/aed.hpp"

namespace fs = std::filesystem;

namespace gpmu::pipeline {

namespace paths {

namespace {
fs::path in_dir(const RunConfig& c) {
  return c.inputs_dir ? *c.inputs_dir : c.out_dir;
}
std::string aed_file(int order) {
  return "aed_o" + std::to_string(order) + ".model";
}
}  // namespace

fs::path dataset_in(const RunConfig& c) { return in_dir(c) / "dataset.gpmu"; }
fs::path dataset_out(const RunConfig& c) { return c.out_dir / "dataset.gpmu"; }
fs::path aed_model_in(const RunConfig& c, int order) {
  return in_dir(c) / aed_file(order);
}
fs::path aed_model_out(const RunConfig& c, int order) {
  return c.out_dir / aed_file(order);
}
fs::path aed_loss(const RunConfig& c, int order) {
  return c.out_dir / ("aed_o" + std::to_string(order) + "_loss.csv");
}
fs::path graph_model(const RunConfig& c) { return c.out_dir / "graph.model"; }
fs::path graph_loss(const RunConfig& c) { return c.out_dir / "graph_loss.csv"; }
fs::path embeddings(const RunConfig& c) {
  return c.out_dir / "embeddings.model";
}
fs::path clusters(const RunConfig& c) { return c.out_dir / "clusters.csv"; }
fs::path projection(const RunConfig& c) { return c.out_dir / "projection.csv"; }

}  // namespace paths

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

feeder::FeederTopology load_run_topology(const RunConfig& c) {
  feeder::FeederTopology t = feeder::load_topology(c.topology);
  if (!c.sensor_buses.empty()) {
    t = t.with_sensors(c.sensor_buses);
  }
  return t;
}

feeder::GenerateConfig gen_config(const RunConfig& c) {
  feeder::GenerateConfig g;
  g.seed = c.resolved_seed();
  g.train_per_class = c.train_per_class;
  g.eval_per_class = c.eval_per_class;
  g.test_per_class = c.test_per_class;
  g.synth.window_len = c.window_len;
  g.synth.atten_lambda = c.atten_lambda;
  g.synth.noise_fund = c.noise_fund;
  g.synth.noise_harm = c.noise_harm;
  g.shift_range = c.shift_range;
  g.aug_sigma = c.aug_sigma;
  g.random_load = c.random_load;
  return g;
}

feeder::Dataset read_run_dataset(const RunConfig& c,
                                 const feeder::FeederTopology& topo) {
  fs::path p = paths::dataset_in(c);
  if (!fs::exists(p)) {
    throw MissingArtifactError("dataset " + p.string() +
                               " is missing; run `generate` first");
  }
  return feeder::read_dataset(p, topo);
}

std::map<int, temporal::AedParams> load_aeds(const RunConfig& c) {
  std::map<int, temporal::AedParams> aeds;
  for (int order : c.orders) {
    fs::path p = paths::aed_model_in(c, order);
    if (!fs::exists(p)) {
      throw MissingArtifactError("encoder checkpoint " + p.string() +
                                 " is missing; run `train-aed --order " +
                                 std::to_string(order) + "` first");
    }
    aeds.emplace(order, temporal::load_aed(p, order));
  }
  return aeds;
}

// Checks that the ids a trainer consumed are exactly the train split and
// returns their digest for the loss-curve header.
std::string verify_train_ids(const feeder::Dataset& d,
                             const std::vector<int>& consumed,
                             const std::string& stage) {
  std::vector<int> expected;
  for (int idx : d.split_indices(feeder::Split::kTrain)) {
    expected.push_back(d.record(idx).event_id);
  }
  std::sort(expected.begin(), expected.end());
  if (consumed != expected) {
    throw ContractError(stage + " training consumed event ids " +
                        fnv1a_ids(consumed) +
                        " instead of the train split " + fnv1a_ids(expected));
  }
  return fnv1a_ids(consumed);
}

void write_curve(const fs::path& path, const std::string& stage,
                 const std::string& train_col, const std::string& eval_col,
                 const std::vector<double>& train,
                 const std::vector<double>& evals, int best_epoch,
                 const std::string& ids_digest) {
  std::string out = "# " + stage + " training curve; best epoch " +
                    std::to_string(best_epoch) + "\n";
  out += "# consumed_train_ids_fnv1a = " + ids_digest + "\n";
  out += "epoch," + train_col + "," + eval_col + "\n";
  for (std::size_t e = 0; e < train.size(); ++e) {
    out += std::to_string(e) + "," + fmt17(train[e]) + "," + fmt17(evals[e]) +
           "\n";
  }
  io::atomic_write_file(path, out);
}

graphenc::EncodeMode mode_for(Variant v) {
  return v == Variant::kAedGNl ? graphenc::EncodeMode::kGraphOnly
                               : graphenc::EncodeMode::kNodeGraph;
}

bool needs_aed(Variant v) { return v != Variant::kTsNgNl; }
bool has_graph_stage(Variant v) { return v != Variant::kAed; }

// Node features for the raw-window variant: sensor rows carry the
// normalized windows flattened time-major, unsensored rows the normalized
// nominal flat at the fundamental and zeros at harmonic orders.
std::vector<Tensor> raw_features(const RunConfig& c,
                                 const feeder::FeederTopology& topo,
                                 const feeder::Dataset& d) {
  const int T = d.window_len();
  const int per = T * feeder::kChannels;
  const int n_orders = static_cast<int>(c.orders.size());
  const int width = per * n_orders;
  const int n = topo.n_buses();

  std::vector<int> sensor_pos(static_cast<std::size_t>(n), -1);
  for (std::size_t p = 0; p < d.sensor_buses().size(); ++p) {
    sensor_pos[static_cast<std::size_t>(d.sensor_buses()[p])] =
        static_cast<int>(p);
  }

  feeder::OperatingPoint nominal = feeder::nominal_load_flow(topo);
  std::vector<Tensor> flat_rows(static_cast<std::size_t>(n));
  for (int b = 0; b < n; ++b) {
    if (sensor_pos[static_cast<std::size_t>(b)] >= 0) continue;
    Tensor w = d.normalize(feeder::flat_series(nominal, b, 1, T), 0);
    flat_rows[static_cast<std::size_t>(b)] =
        Eigen::Map<const Eigen::RowVectorXd>(w.data(), per);
  }

  std::vector<Tensor> out;
  out.reserve(static_cast<std::size_t>(d.n_records()));
  for (int r = 0; r < d.n_records(); ++r) {
    const feeder::EventRecord& rec = d.record(r);
    Tensor f = Tensor::Zero(n, width);
    for (int b = 0; b < n; ++b) {
      int p = sensor_pos[static_cast<std::size_t>(b)];
      if (p < 0) {
        f.block(b, 0, 1, per) = flat_rows[static_cast<std::size_t>(b)];
        continue;
      }
      for (int oi = 0; oi < n_orders; ++oi) {
        int h = feeder::harmonic_index(c.orders[static_cast<std::size_t>(oi)]);
        Tensor w = d.normalize(
            rec.windows[static_cast<std::size_t>(p)]
                       [static_cast<std::size_t>(h)],
            h);
        f.block(b, oi * per, 1, per) =
            Eigen::Map<const Eigen::RowVectorXd>(w.data(), per);
      }
    }
    out.push_back(std::move(f));
  }
  return out;
}

// Sensor rows of each record's feature matrix, in dataset sensor order.
std::vector<Tensor> sensor_blocks(const std::vector<Tensor>& feats,
                                  const std::vector<int>& sensor_buses) {
  std::vector<Tensor> out;
  out.reserve(feats.size());
  for (const Tensor& f : feats) {
    Tensor b(static_cast<Index>(sensor_buses.size()), f.cols());
    for (std::size_t p = 0; p < sensor_buses.size(); ++p) {
      b.row(static_cast<Index>(p)) = f.row(sensor_buses[p]);
    }
    out.push_back(std::move(b));
  }
  return out;
}

void write_embeddings(const fs::path& path, const std::vector<Tensor>& blocks,
                      const RunConfig& c) {
  io::ModelFile m;
  m.meta.emplace_back("kind", "embeddings");
  m.meta.emplace_back("records", std::to_string(blocks.size()));
  m.meta.emplace_back("sensors",
                      std::to_string(blocks.empty() ? 0 : blocks[0].rows()));
  m.meta.emplace_back("dim",
                      std::to_string(blocks.empty() ? 0 : blocks[0].cols()));
  m.meta.emplace_back("orders", c.harmonics() ? "1,3,5" : "1");
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    m.params.add("e" + std::to_string(i), blocks[i]);
  }
  io::write_model(m, path);
}

// Per-record node features plus the graph they live on. `blocks` holds the
// sensor embedding rows (empty for the raw-window variant).
struct VariantFeatures {
  std::vector<Tensor> features;
  feeder::FeederTopology graph_topo;
  std::vector<Tensor> blocks;
};

VariantFeatures build_features(const RunConfig& c,
                               const feeder::FeederTopology& topo,
                               const feeder::Dataset& d) {
  if (c.variant == Variant::kTsNgNl) {
    return VariantFeatures{raw_features(c, topo, d), topo, {}};
  }
  std::map<int, temporal::AedParams> aeds = load_aeds(c);
  temporal::EmbedOptions opt;
  opt.use_harmonics = c.harmonics();
  feeder::GenerateConfig gen = gen_config(c);
  if (c.variant == Variant::kAedNgRl) {
    opt.gen = &gen;
  }
  std::vector<Tensor> feats = temporal::embed_dataset(aeds, d, topo, opt);
  std::vector<Tensor> blocks = sensor_blocks(feats, d.sensor_buses());

  if (c.variant == Variant::kAed) {
    return VariantFeatures{{}, topo, std::move(blocks)};
  }
  if (c.variant == Variant::kAedNg) {
    feeder::FeederTopology sub = contract_to_sensors(topo);
    // map contracted bus -> sensor position in the dataset
    std::vector<int> pos(static_cast<std::size_t>(sub.n_buses()), -1);
    for (int b = 0; b < sub.n_buses(); ++b) {
      const std::string& label = sub.bus_id(b);
      for (std::size_t p = 0; p < d.sensor_labels().size(); ++p) {
        if (d.sensor_labels()[p] == label) {
          pos[static_cast<std::size_t>(b)] = static_cast<int>(p);
          break;
        }
      }
      if (pos[static_cast<std::size_t>(b)] < 0) {
        throw ContractError("contracted bus " + label +
                            " is not a dataset sensor");
      }
    }
    std::vector<Tensor> sub_feats;
    sub_feats.reserve(blocks.size());
    for (const Tensor& blk : blocks) {
      Tensor f(static_cast<Index>(sub.n_buses()), blk.cols());
      for (int b = 0; b < sub.n_buses(); ++b) {
        f.row(b) = blk.row(pos[static_cast<std::size_t>(b)]);
      }
      sub_feats.push_back(std::move(f));
    }
    return VariantFeatures{std::move(sub_feats), std::move(sub),
                           std::move(blocks)};
  }
  return VariantFeatures{std::move(feats), topo, std::move(blocks)};
}

// One vector per record: flattened sensor blocks for the `aed` variant,
// graph-encoder outputs otherwise.
Tensor event_vectors(const RunConfig& c, const VariantFeatures& vf) {
  if (c.variant == Variant::kAed) {
    const Index s = vf.blocks[0].rows();
    const Index f = vf.blocks[0].cols();
    Tensor out(static_cast<Index>(vf.blocks.size()), s * f);
    for (std::size_t r = 0; r < vf.blocks.size(); ++r) {
      for (Index p = 0; p < s; ++p) {
        out.block(static_cast<Index>(r), p * f, 1, f) = vf.blocks[r].row(p);
      }
    }
    return out;
  }
  fs::path p = paths::graph_model(c);
  if (!fs::exists(p)) {
    throw MissingArtifactError("graph encoder " + p.string() +
                               " is missing; run `train-graph` first");
  }
  graphenc::GraphEncoder enc = graphenc::load_graph_encoder(p);
  return graphenc::encode_events(enc, vf.features, vf.graph_topo,
                                 mode_for(c.variant));
}

Tensor rows_at(const Tensor& x, const std::vector<int>& idx) {
  Tensor out(static_cast<Index>(idx.size()), x.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    out.row(static_cast<Index>(i)) = x.row(idx[i]);
  }
  return out;
}

double median(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  std::size_t n = xs.size();
  if (n % 2 == 1) return xs[n / 2];
  return 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

template <typename T>
void reject_duplicates(const std::vector<T>& xs, const std::string& what) {
  std::set<T> seen;
  for (const T& x : xs) {
    if (!seen.insert(x).second) {
      throw UsageError("duplicate " + what + " in the request");
    }
  }
}

}  // namespace

std::string fnv1a_ids(const std::vector<int>& ids) {
  std::string joined;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) joined += ',';
    joined += std::to_string(ids[i]);
  }
  std::uint64_t h = rng::fnv1a(joined);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

void cmd_generate(const RunConfig& c, std::ostream& log) {
  validate_config(c);
  feeder::FeederTopology topo = load_run_topology(c);
  feeder::Dataset d = feeder::generate_dataset(topo, gen_config(c));
  fs::create_directories(c.out_dir);
  feeder::write_dataset(d, topo, paths::dataset_out(c));

  int counts[feeder::kNumClasses][feeder::kNumSplits] = {};
  for (const feeder::EventRecord& rec : d.records()) {
    ++counts[rec.klass - 1][static_cast<int>(rec.split)];
  }
  int totals[feeder::kNumSplits] = {};
  for (int k = 0; k < feeder::kNumClasses; ++k) {
    log << "class " << (k + 1) << ": train " << counts[k][0] << " eval "
        << counts[k][1] << " test " << counts[k][2] << "\n";
    for (int s = 0; s < feeder::kNumSplits; ++s) totals[s] += counts[k][s];
  }
  log << "total: train " << totals[0] << " eval " << totals[1] << " test "
      << totals[2] << " (" << d.n_records() << " records, "
      << d.sensor_buses().size() << " sensors)\n";
  log << "wrote " << paths::dataset_out(c).string() << "\n";
}

void cmd_train_aed(const RunConfig& c, int order, std::ostream& log) {
  validate_config(c);
  feeder::harmonic_index(order);  // rejects anything but 1/3/5
  feeder::FeederTopology topo = load_run_topology(c);
  feeder::Dataset d = read_run_dataset(c, topo);

  temporal::TrainAedConfig tc = c.aed.at(order);
  tc.seed = c.resolved_seed();
  temporal::AedTrainResult res = temporal::train_aed(d, topo, order, tc);
  std::string digest = verify_train_ids(d, res.train_event_ids,
                                        "order-" + std::to_string(order) +
                                            " auto-encoder");

  fs::create_directories(c.out_dir);
  temporal::save_aed(res.params, order, paths::aed_model_out(c, order));
  write_curve(paths::aed_loss(c, order),
              "order-" + std::to_string(order) + " auto-encoder", "train_mse",
              "eval_mse", res.train_loss, res.eval_loss, res.best_epoch,
              digest);
  log << "order " << order << ": " << res.train_loss.size()
      << " epochs, best epoch " << res.best_epoch << ", eval mse "
      << fmt6(res.eval_loss[static_cast<std::size_t>(res.best_epoch)])
      << "\n";
  log << "wrote " << paths::aed_model_out(c, order).string() << "\n";
}

void cmd_train_graph(const RunConfig& c, std::ostream& log) {
  validate_config(c);
  if (c.variant == Variant::kAed) {
    throw UsageError(
        "variant aed clusters sensor embeddings directly and has no graph "
        "stage");
  }
  feeder::FeederTopology topo = load_run_topology(c);
  feeder::Dataset d = read_run_dataset(c, topo);
  VariantFeatures vf = build_features(c, topo, d);

  fs::create_directories(c.out_dir);
  if (!vf.blocks.empty()) {
    write_embeddings(paths::embeddings(c), vf.blocks, c);
  }

  graphenc::TrainGraphConfig gc = c.graph;
  gc.seed = c.resolved_seed();
  gc.arch.mode = mode_for(c.variant);
  graphenc::GraphTrainResult res =
      graphenc::train_graph_encoder(vf.features, d, vf.graph_topo, gc);
  std::string digest =
      verify_train_ids(d, res.train_event_ids, "graph encoder");

  graphenc::save_graph_encoder(res.enc, paths::graph_model(c));
  write_curve(paths::graph_loss(c), "graph encoder", "train_mi", "eval_mi",
              res.train_mi, res.eval_mi, res.best_epoch, digest);
  log << "graph encoder: " << res.train_mi.size() << " epochs, best epoch "
      << res.best_epoch << ", eval mi "
      << fmt6(res.eval_mi[static_cast<std::size_t>(res.best_epoch)]) << "\n";
  log << "wrote " << paths::graph_model(c).string() << "\n";
}

cluster::ClusterReport cmd_cluster(const RunConfig& c, std::ostream& log) {
  validate_config(c);
  feeder::FeederTopology topo = load_run_topology(c);
  feeder::Dataset d = read_run_dataset(c, topo);
  VariantFeatures vf = build_features(c, topo, d);

  fs::create_directories(c.out_dir);
  if (!vf.blocks.empty()) {
    write_embeddings(paths::embeddings(c), vf.blocks, c);
  }

  Tensor vecs = event_vectors(c, vf);
  Tensor train = rows_at(vecs, d.split_indices(feeder::Split::kTrain));
  const std::vector<int>& test_idx = d.split_indices(feeder::Split::kTest);
  Tensor test = rows_at(vecs, test_idx);

  cluster::GmmConfig gc;
  gc.seed = c.resolved_seed();
  cluster::GmmModel m = cluster::gmm_fit(train, c.k, gc);
  std::vector<int> assign = cluster::gmm_assign(m, test);

  cluster::ClusterReport rep;
  for (int idx : test_idx) {
    rep.event_ids.push_back(d.record(idx).event_id);
    rep.true_classes.push_back(d.record(idx).klass);
  }
  rep.assignments = std::move(assign);
  rep.variant = variant_name(c.variant);
  rep.ari_score = cluster::ari(rep.true_classes, rep.assignments);
  rep.seed = c.resolved_seed();
  rep.config_lines = render_config(c);
  cluster::write_report(rep, paths::clusters(c));

  log << "variant " << rep.variant << ": ari " << fmt6(rep.ari_score)
      << " over " << test_idx.size() << " test events (seed " << rep.seed
      << ")\n";
  log << "wrote " << paths::clusters(c).string() << "\n";
  return rep;
}

void cmd_project(const RunConfig& c, std::ostream& log) {
  validate_config(c);
  feeder::FeederTopology topo = load_run_topology(c);
  feeder::Dataset d = read_run_dataset(c, topo);
  VariantFeatures vf = build_features(c, topo, d);

  Tensor vecs = event_vectors(c, vf);
  const std::vector<int>& test_idx = d.split_indices(feeder::Split::kTest);
  Tensor test = rows_at(vecs, test_idx);
  cluster::PcaResult pca = cluster::pca_project(test, 2);

  std::string out = "event_id,true_class,pc1,pc2\n";
  for (std::size_t i = 0; i < test_idx.size(); ++i) {
    const feeder::EventRecord& rec = d.record(test_idx[i]);
    out += std::to_string(rec.event_id) + "," + std::to_string(rec.klass) +
           "," + fmt17(pca.projected(static_cast<Index>(i), 0)) + "," +
           fmt17(pca.projected(static_cast<Index>(i), 1)) + "\n";
  }
  fs::create_directories(c.out_dir);
  io::atomic_write_file(paths::projection(c), out);
  log << "wrote " << paths::projection(c).string() << " ("
      << test_idx.size() << " test events)\n";
}

feeder::FeederTopology contract_to_sensors(const feeder::FeederTopology& t) {
  const std::vector<int>& sensors = t.sensors();

  // contracted root: the sensor nearest the source, ties to the lowest index
  int root = sensors[0];
  for (int s : sensors) {
    int ds = t.hops(t.root(), s);
    int dr = t.hops(t.root(), root);
    if (ds < dr || (ds == dr && s < root)) root = s;
  }

  std::vector<int> order;
  order.push_back(root);
  for (int s : sensors) {
    if (s != root) order.push_back(s);
  }
  std::sort(order.begin() + 1, order.end());
  std::map<int, int> cidx;
  for (std::size_t i = 0; i < order.size(); ++i) {
    cidx[order[i]] = static_cast<int>(i);
  }

  // r/x accumulated along the original tree path between two buses
  auto path_impedance = [&t](int a, int b) {
    double r = 0.0, x = 0.0;
    int da = t.hops(t.root(), a);
    int db = t.hops(t.root(), b);
    while (da > db) {
      const feeder::Edge& e = t.parent_edge(a);
      r += e.r;
      x += e.x;
      a = t.parent(a);
      --da;
    }
    while (db > da) {
      const feeder::Edge& e = t.parent_edge(b);
      r += e.r;
      x += e.x;
      b = t.parent(b);
      --db;
    }
    while (a != b) {
      const feeder::Edge& ea = t.parent_edge(a);
      const feeder::Edge& eb = t.parent_edge(b);
      r += ea.r + eb.r;
      x += ea.x + eb.x;
      a = t.parent(a);
      b = t.parent(b);
    }
    return std::pair<double, double>(r, x);
  };

  std::vector<feeder::Edge> edges;
  for (std::size_t i = 1; i < order.size(); ++i) {
    int s = order[i];
    int anc = t.parent(s);
    while (anc >= 0 && !t.is_sensor(anc)) anc = t.parent(anc);
    int target = anc >= 0 ? anc : root;
    feeder::Edge e;
    e.a = cidx.at(target);
    e.b = cidx.at(s);
    auto [r, x] = path_impedance(s, target);
    e.r = r;
    e.x = x;
    edges.push_back(e);
  }

  std::vector<std::string> labels;
  std::vector<feeder::BusLoad> loads;
  std::vector<int> all;
  for (std::size_t i = 0; i < order.size(); ++i) {
    labels.push_back(t.bus_id(order[i]));
    loads.push_back(t.load(order[i]));
    all.push_back(static_cast<int>(i));
  }
  return feeder::FeederTopology(std::move(labels), std::move(edges),
                                std::move(all), std::move(loads));
}

std::vector<std::string> place_sensors(const feeder::FeederTopology& t,
                                       int count, std::uint64_t seed) {
  const int n = t.n_buses();
  if (count < 1) {
    throw UsageError("sensor count must be at least 1, got " +
                     std::to_string(count));
  }
  if (count > n) {
    throw UsageError("sensor count " + std::to_string(count) +
                     " exceeds the feeder's " + std::to_string(n) + " buses");
  }
  rng::Stream g = rng::Stream(seed, "sensor-placement")
                      .fork(static_cast<std::uint64_t>(count));
  std::vector<int> chosen{
      static_cast<int>(g.below(static_cast<std::uint64_t>(n)))};
  std::vector<bool> used(static_cast<std::size_t>(n), false);
  used[static_cast<std::size_t>(chosen[0])] = true;
  while (static_cast<int>(chosen.size()) < count) {
    int best = -1;
    int best_d = -1;
    for (int b = 0; b < n; ++b) {
      if (used[static_cast<std::size_t>(b)]) continue;
      int d = t.hops(b, chosen[0]);
      for (int cbus : chosen) d = std::min(d, t.hops(b, cbus));
      if (d > best_d) {
        best = b;
        best_d = d;
      }
    }
    chosen.push_back(best);
    used[static_cast<std::size_t>(best)] = true;
  }
  std::sort(chosen.begin(), chosen.end());
  std::vector<std::string> labels;
  for (int b : chosen) labels.push_back(t.bus_id(b));
  return labels;
}

AblationResult cmd_ablate(const RunConfig& c, std::vector<Variant> variants,
                          std::vector<std::uint64_t> seeds,
                          std::ostream& log) {
  validate_config(c);
  if (variants.empty()) throw UsageError("ablate needs at least one variant");
  if (seeds.empty()) throw UsageError("ablate needs at least one seed");
  reject_duplicates(variants, "variant");
  reject_duplicates(seeds, "seed");

  // canonical summary-table order regardless of request order
  std::vector<Variant> vs;
  for (Variant v : kAllVariants) {
    if (std::find(variants.begin(), variants.end(), v) != variants.end()) {
      vs.push_back(v);
    }
  }

  bool any_aed = std::any_of(vs.begin(), vs.end(), needs_aed);
  bool want_rl =
      std::find(vs.begin(), vs.end(), Variant::kAedNgRl) != vs.end();

  std::ostringstream sink;  // stage logs folded into the progress lines below
  std::vector<std::vector<cluster::ClusterReport>> by_variant(vs.size());

  for (std::uint64_t s : seeds) {
    fs::path shared =
        c.out_dir / "ablate" / "shared" / ("seed" + std::to_string(s));
    RunConfig cs = c;
    cs.seed = s;
    cs.out_dir = shared;
    cs.inputs_dir.reset();
    cs.random_load = false;
    cs.variant = Variant::kGraphpmu;
    log << "[seed " << s << "] dataset + shared encoders\n";
    cmd_generate(cs, sink);
    if (any_aed) {
      for (int order : c.orders) cmd_train_aed(cs, order, sink);
    }
    if (want_rl) {
      RunConfig cr = cs;
      cr.out_dir = shared / "rl";
      cr.random_load = true;
      cr.variant = Variant::kAedNgRl;
      cmd_generate(cr, sink);
      for (int order : c.orders) cmd_train_aed(cr, order, sink);
    }

    for (std::size_t vi = 0; vi < vs.size(); ++vi) {
      Variant v = vs[vi];
      RunConfig cv = c;
      cv.seed = s;
      cv.variant = v;
      cv.out_dir = c.out_dir / "ablate" / variant_name(v) /
                   ("seed" + std::to_string(s));
      cv.inputs_dir = v == Variant::kAedNgRl ? shared / "rl" : shared;
      cv.random_load = v == Variant::kAedNgRl;
      if (has_graph_stage(v)) cmd_train_graph(cv, sink);
      cluster::ClusterReport rep = cmd_cluster(cv, sink);
      log << "[seed " << s << "] " << variant_name(v) << ": ari "
          << fmt6(rep.ari_score) << "\n";
      by_variant[vi].push_back(std::move(rep));
    }
  }

  AblationResult result;
  std::string runs = "variant,seed,ari\n";
  std::string summary = "variant,median_ari,seeds\n";
  std::string seed_list;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (i) seed_list += ' ';
    seed_list += std::to_string(seeds[i]);
  }
  for (std::size_t vi = 0; vi < vs.size(); ++vi) {
    std::vector<double> aris;
    for (const cluster::ClusterReport& rep : by_variant[vi]) {
      runs += rep.variant + "," + std::to_string(rep.seed) + "," +
              fmt6(rep.ari_score) + "\n";
      aris.push_back(rep.ari_score);
      result.reports.push_back(rep);
    }
    double med = median(aris);
    summary += std::string(variant_name(vs[vi])) + "," + fmt6(med) + "," +
               seed_list + "\n";
    result.median_ari.emplace_back(vs[vi], med);
    log << "median ari " << variant_name(vs[vi]) << ": " << fmt6(med) << "\n";
  }
  fs::create_directories(c.out_dir / "ablate");
  io::atomic_write_file(c.out_dir / "ablate" / "ablate_runs.csv", runs);
  io::atomic_write_file(c.out_dir / "ablate" / "ablate_summary.csv", summary);
  return result;
}

std::vector<SweepRow> cmd_sweep_sensors(const RunConfig& c,
                                        std::vector<int> counts,
                                        std::vector<std::uint64_t> seeds,
                                        std::ostream& log) {
  validate_config(c);
  if (!c.sensor_buses.empty()) {
    throw UsageError(
        "sweep places sensor sets itself; clear the sensors key");
  }
  if (counts.empty()) throw UsageError("sweep needs at least one count");
  if (seeds.empty()) throw UsageError("sweep needs at least one seed");
  reject_duplicates(counts, "sensor count");
  reject_duplicates(seeds, "seed");

  feeder::FeederTopology topo = feeder::load_topology(c.topology);
  // fail fast on a bad count before any run starts
  std::vector<std::vector<std::string>> placements;
  for (int count : counts) {
    placements.push_back(place_sensors(topo, count, c.resolved_seed()));
  }

  std::ostringstream sink;
  std::vector<SweepRow> rows;
  std::string runs = "sensors,mode,seed,ari\n";
  for (std::size_t ci = 0; ci < counts.size(); ++ci) {
    int count = counts[ci];
    const std::vector<std::string>& buses = placements[ci];
    std::string joined;
    for (std::size_t i = 0; i < buses.size(); ++i) {
      if (i) joined += ' ';
      joined += buses[i];
    }
    log << "[" << count << " sensors] " << joined << "\n";

    std::vector<double> fund_ari;
    std::vector<double> harm_ari;
    for (std::uint64_t s : seeds) {
      fs::path base = c.out_dir / "sweep" / ("s" + std::to_string(count));
      fs::path shared = base / ("seed" + std::to_string(s));
      RunConfig cs = c;
      cs.sensor_buses = buses;
      cs.seed = s;
      cs.out_dir = shared;
      cs.inputs_dir.reset();
      cs.random_load = false;
      cs.variant = Variant::kGraphpmu;
      cs.orders = {1, 3, 5};
      cmd_generate(cs, sink);
      for (int order : cs.orders) cmd_train_aed(cs, order, sink);

      for (bool harm : {false, true}) {
        RunConfig cm = cs;
        cm.orders = harm ? std::vector<int>{1, 3, 5} : std::vector<int>{1};
        cm.out_dir = base / (harm ? "harmonics" : "fundamental") /
                     ("seed" + std::to_string(s));
        cm.inputs_dir = shared;
        cmd_train_graph(cm, sink);
        cluster::ClusterReport rep = cmd_cluster(cm, sink);
        (harm ? harm_ari : fund_ari).push_back(rep.ari_score);
        runs += std::to_string(count) + "," +
                (harm ? "harmonics" : "fundamental") + "," +
                std::to_string(s) + "," + fmt6(rep.ari_score) + "\n";
        log << "[" << count << " sensors] "
            << (harm ? "harmonics" : "fundamental") << " seed " << s
            << ": ari " << fmt6(rep.ari_score) << "\n";
      }
    }
    for (bool harm : {false, true}) {
      SweepRow row;
      row.sensor_count = count;
      row.harmonics = harm;
      row.median_ari = median(harm ? harm_ari : fund_ari);
      row.buses = buses;
      rows.push_back(std::move(row));
    }
  }

  std::string summary =
      "# sensor placement: greedy max-dispersion on hop distance, seeded "
      "start (seed " +
      std::to_string(c.resolved_seed()) + ")\n";
  for (std::size_t ci = 0; ci < counts.size(); ++ci) {
    summary += "# s" + std::to_string(counts[ci]) + ":";
    for (const std::string& b : placements[ci]) summary += " " + b;
    summary += "\n";
  }
  summary += "sensors,mode,median_ari\n";
  for (const SweepRow& row : rows) {
    summary += std::to_string(row.sensor_count) + "," +
               (row.harmonics ? "harmonics" : "fundamental") + "," +
               fmt6(row.median_ari) + "\n";
    log << "median ari " << row.sensor_count << " sensors "
        << (row.harmonics ? "harmonics" : "fundamental") << ": "
        << fmt6(row.median_ari) << "\n";
  }
  fs::create_directories(c.out_dir / "sweep");
  io::atomic_write_file(c.out_dir / "sweep" / "sweep_runs.csv", runs);
  io::atomic_write_file(c.out_dir / "sweep" / "sweep_summary.csv", summary);
  return rows;
}

}  // namespace gpmu::pipeline
