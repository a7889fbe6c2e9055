#include "gpmu/temporal/aed.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>
#include <string>
#include <utility>

#include "gpmu/errors.hpp"
#include "gpmu/io/model.hpp"
#include "gpmu/numerics/adam.hpp"
#include "gpmu/temporal/lstm.hpp"

namespace gpmu::temporal {

using ad::GradMap;

namespace {

void check_config(const AedConfig& c) {
  if (c.seq_len <= 0 || c.channels <= 0 || c.units1 <= 0 || c.units2 <= 0 ||
      c.embed <= 0) {
    throw ContractError("aed config has a non-positive dimension");
  }
  if (!(c.leak > 0.0) || !(c.leak < 1.0)) {
    throw ContractError("aed leak slope must lie in (0, 1)");
  }
}

// One tape constant per time step, shape batch x channels.
std::vector<Var> step_constants(Tape& t, const AedConfig& cfg,
                                const std::vector<Tensor>& batch) {
  if (batch.empty()) throw ContractError("aed: empty window batch");
  const Index T = cfg.seq_len;
  const Index C = cfg.channels;
  const Index B = static_cast<Index>(batch.size());
  for (const Tensor& w : batch) {
    if (w.rows() != T || w.cols() != C) {
      throw ShapeError("aed: window is " + shape_str(w) + ", model expects " +
                       shape_str(T, C));
    }
  }
  std::vector<Var> steps;
  steps.reserve(static_cast<std::size_t>(T));
  for (Index s = 0; s < T; ++s) {
    Tensor x(B, C);
    for (Index b = 0; b < B; ++b) x.row(b) = batch[static_cast<std::size_t>(b)].row(s);
    steps.push_back(t.constant(std::move(x)));
  }
  return steps;
}

Var encode_steps(Tape& t, const AedParams& p, const std::vector<Var>& steps,
                 Index batch) {
  LstmVars l1 = lstm_vars(t, p.params, "enc.l1");
  LstmVars l2 = lstm_vars(t, p.params, "enc.l2");
  LstmState s1 = lstm_zero_state(t, batch, l1.units);
  LstmState s2 = lstm_zero_state(t, batch, l2.units);
  for (Var x : steps) {
    s1 = lstm_step(l1, x, s1);
    s2 = lstm_step(l2, s1.h, s2);
  }
  Var w = t.param("enc.head.w", p.params.at("enc.head.w"));
  Var b = t.param("enc.head.b", p.params.at("enc.head.b"));
  return leaky_relu(add_rowvec(matmul(s2.h, w), b), p.cfg.leak);
}

// The decoder re-feeds one seed vector at every step rather than its own
// previous output, so reconstruction quality has to come from the cell
// state.
std::vector<Var> decode_steps(Tape& t, const AedParams& p, Var embedding,
                              Index batch) {
  Var sw = t.param("dec.seed.w", p.params.at("dec.seed.w"));
  Var sb = t.param("dec.seed.b", p.params.at("dec.seed.b"));
  Var seed = leaky_relu(add_rowvec(matmul(embedding, sw), sb), p.cfg.leak);
  LstmVars l1 = lstm_vars(t, p.params, "dec.l1");
  LstmVars l2 = lstm_vars(t, p.params, "dec.l2");
  Var ow = t.param("dec.out.w", p.params.at("dec.out.w"));
  Var ob = t.param("dec.out.b", p.params.at("dec.out.b"));
  LstmState s1 = lstm_zero_state(t, batch, l1.units);
  LstmState s2 = lstm_zero_state(t, batch, l2.units);
  std::vector<Var> out;
  out.reserve(static_cast<std::size_t>(p.cfg.seq_len));
  for (int s = 0; s < p.cfg.seq_len; ++s) {
    s1 = lstm_step(l1, seed, s1);
    s2 = lstm_step(l2, s1.h, s2);
    out.push_back(add_rowvec(matmul(s2.h, ow), ob));
  }
  return out;
}

std::vector<std::string> param_names() {
  std::vector<std::string> names;
  for (const char* l : {"enc.l1", "enc.l2", "dec.l1", "dec.l2"}) {
    names.push_back(std::string(l) + ".wx");
    names.push_back(std::string(l) + ".wh");
    names.push_back(std::string(l) + ".b");
  }
  names.insert(names.end(), {"enc.head.w", "enc.head.b", "dec.seed.w",
                             "dec.seed.b", "dec.out.w", "dec.out.b"});
  return names;
}

std::pair<Index, Index> expected_shape(const AedConfig& c,
                                       const std::string& name) {
  auto lstm_shape = [](Index in, Index u,
                       const std::string& part) -> std::pair<Index, Index> {
    if (part == "wx") return {in, 4 * u};
    if (part == "wh") return {u, 4 * u};
    return {1, 4 * u};
  };
  std::string::size_type dot = name.rfind('.');
  std::string head = name.substr(0, dot);
  std::string part = name.substr(dot + 1);
  if (head == "enc.l1") return lstm_shape(c.channels, c.units1, part);
  if (head == "enc.l2") return lstm_shape(c.units1, c.units2, part);
  if (head == "dec.l1") return lstm_shape(c.units2, c.units2, part);
  if (head == "dec.l2") return lstm_shape(c.units2, c.units1, part);
  if (name == "enc.head.w") return {c.units2, c.embed};
  if (name == "enc.head.b") return {1, c.embed};
  if (name == "dec.seed.w") return {c.embed, c.units2};
  if (name == "dec.seed.b") return {1, c.units2};
  if (name == "dec.out.w") return {c.units1, c.channels};
  return {1, c.channels};  // dec.out.b
}

int meta_int(const io::ModelFile& m, const std::string& key) {
  const std::string& s = m.meta_value(key);
  try {
    std::size_t used = 0;
    int v = std::stoi(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw SchemaError("model meta " + key + "=" + s + " is not an integer");
  }
}

double meta_double(const io::ModelFile& m, const std::string& key) {
  const std::string& s = m.meta_value(key);
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw SchemaError("model meta " + key + "=" + s + " is not a number");
  }
}

}  // namespace

AedParams init_aed(const AedConfig& cfg, std::uint64_t seed) {
  check_config(cfg);
  rng::Stream g(seed, "aed-init");
  AedParams p;
  p.cfg = cfg;
  add_lstm_params(p.params, "enc.l1", cfg.channels, cfg.units1, g);
  add_lstm_params(p.params, "enc.l2", cfg.units1, cfg.units2, g);
  rng::Stream hw = g.fork("enc.head.w");
  p.params.add("enc.head.w", glorot_uniform<double>(cfg.units2, cfg.embed, hw));
  p.params.add("enc.head.b", Tensor::Zero(1, cfg.embed));
  rng::Stream dw = g.fork("dec.seed.w");
  p.params.add("dec.seed.w", glorot_uniform<double>(cfg.embed, cfg.units2, dw));
  p.params.add("dec.seed.b", Tensor::Zero(1, cfg.units2));
  add_lstm_params(p.params, "dec.l1", cfg.units2, cfg.units2, g);
  add_lstm_params(p.params, "dec.l2", cfg.units2, cfg.units1, g);
  rng::Stream ow = g.fork("dec.out.w");
  p.params.add("dec.out.w", glorot_uniform<double>(cfg.units1, cfg.channels, ow));
  p.params.add("dec.out.b", Tensor::Zero(1, cfg.channels));
  return p;
}

Var encoder_graph(Tape& t, const AedParams& p,
                  const std::vector<Tensor>& batch) {
  check_config(p.cfg);
  std::vector<Var> steps = step_constants(t, p.cfg, batch);
  return encode_steps(t, p, steps, static_cast<Index>(batch.size()));
}

Var loss_graph(Tape& t, const AedParams& p, const std::vector<Tensor>& batch) {
  check_config(p.cfg);
  std::vector<Var> steps = step_constants(t, p.cfg, batch);
  Var emb = encode_steps(t, p, steps, static_cast<Index>(batch.size()));
  std::vector<Var> outs = decode_steps(t, p, emb, static_cast<Index>(batch.size()));
  Var acc = mse(outs[0], steps[0]);
  for (std::size_t s = 1; s < steps.size(); ++s) {
    acc = add(acc, mse(outs[s], steps[s]));
  }
  return scale(acc, 1.0 / static_cast<double>(p.cfg.seq_len));
}

Tensor aed_encode(const AedParams& p, const Tensor& window) {
  return aed_encode_batch(p, {window});
}

Tensor aed_encode_batch(const AedParams& p, const std::vector<Tensor>& ws) {
  check_config(p.cfg);
  if (ws.empty()) throw ContractError("aed_encode_batch: no windows");
  constexpr std::size_t kChunk = 64;
  Tensor out(static_cast<Index>(ws.size()), p.cfg.embed);
  for (std::size_t i = 0; i < ws.size(); i += kChunk) {
    std::size_t m = std::min(kChunk, ws.size() - i);
    std::vector<Tensor> chunk(ws.begin() + static_cast<std::ptrdiff_t>(i),
                              ws.begin() + static_cast<std::ptrdiff_t>(i + m));
    Tape t;
    Var emb = encoder_graph(t, p, chunk);
    out.middleRows(static_cast<Index>(i), static_cast<Index>(m)) = emb.value();
  }
  if (!out.allFinite()) {
    throw NumericError("aed_encode_batch produced non-finite embeddings");
  }
  return out;
}

Tensor aed_decode(const AedParams& p, const Tensor& embedding) {
  check_config(p.cfg);
  if (embedding.rows() != 1 || embedding.cols() != p.cfg.embed) {
    throw ShapeError("aed_decode: embedding is " + shape_str(embedding) +
                     ", model expects " + shape_str(1, p.cfg.embed));
  }
  Tape t;
  Var emb = t.constant(embedding);
  std::vector<Var> outs = decode_steps(t, p, emb, 1);
  Tensor out(p.cfg.seq_len, p.cfg.channels);
  for (std::size_t s = 0; s < outs.size(); ++s) {
    out.row(static_cast<Index>(s)) = outs[s].value().row(0);
  }
  return out;
}

double reconstruction_mse(const AedParams& p, const std::vector<Tensor>& ws) {
  check_config(p.cfg);
  if (ws.empty()) throw ContractError("reconstruction_mse: no windows");
  constexpr std::size_t kChunk = 64;
  double acc = 0.0;
  for (std::size_t i = 0; i < ws.size(); i += kChunk) {
    std::size_t m = std::min(kChunk, ws.size() - i);
    std::vector<Tensor> chunk(ws.begin() + static_cast<std::ptrdiff_t>(i),
                              ws.begin() + static_cast<std::ptrdiff_t>(i + m));
    Tape t;
    Var l = loss_graph(t, p, chunk);
    acc += l.value()(0, 0) * static_cast<double>(m);
  }
  double out = acc / static_cast<double>(ws.size());
  if (!std::isfinite(out)) {
    throw NumericError("reconstruction error is non-finite");
  }
  return out;
}

AedTrainResult train_aed(const feeder::Dataset& d,
                         const feeder::FeederTopology& topo, int order,
                         const TrainAedConfig& cfg) {
  int h = feeder::harmonic_index(order);
  if (cfg.epochs < 1 || cfg.batch < 1 || cfg.patience < 1 || !(cfg.lr > 0.0)) {
    throw ContractError("aed training config has a non-positive field");
  }
  AedConfig arch = cfg.arch;
  arch.seq_len = d.window_len();
  arch.channels = feeder::kChannels;
  check_config(arch);

  const int n_sensors = static_cast<int>(d.sensor_buses().size());
  std::vector<Tensor> train_pool;
  // event id behind each pool entry; -1 marks the event-free flat windows
  std::vector<int> pool_ids;
  train_pool.reserve(d.split_indices(feeder::Split::kTrain).size() *
                     static_cast<std::size_t>(n_sensors));
  for (int idx : d.split_indices(feeder::Split::kTrain)) {
    const feeder::EventRecord& rec = d.record(idx);
    for (int sp = 0; sp < n_sensors; ++sp) {
      train_pool.push_back(
          d.normalize(rec.windows[static_cast<std::size_t>(sp)]
                                 [static_cast<std::size_t>(h)],
                      h));
      pool_ids.push_back(rec.event_id);
    }
  }
  if (order == 1) {
    // Unsensored buses contribute one event-free window each so the model
    // also learns the quiet signature it will embed for them later. Flats
    // always use the nominal operating point, even for randomized-load
    // datasets, because those per-event draws are not known at this level.
    feeder::OperatingPoint op = feeder::nominal_load_flow(topo);
    for (int bus = 0; bus < topo.n_buses(); ++bus) {
      if (topo.is_sensor(bus)) continue;
      train_pool.push_back(
          d.normalize(feeder::flat_series(op, bus, 1, d.window_len()), 0));
      pool_ids.push_back(-1);
    }
  }

  std::vector<Tensor> eval_pool;
  for (int idx : d.split_indices(feeder::Split::kEval)) {
    const feeder::EventRecord& rec = d.record(idx);
    for (int sp = 0; sp < n_sensors; ++sp) {
      eval_pool.push_back(
          d.normalize(rec.windows[static_cast<std::size_t>(sp)]
                                 [static_cast<std::size_t>(h)],
                      h));
    }
  }

  AedTrainResult res;
  res.params = init_aed(arch, cfg.seed);
  AdamState opt;
  AdamConfig acfg;
  acfg.lr = cfg.lr;

  ParamSet best = res.params.params;
  double best_eval = std::numeric_limits<double>::infinity();
  int bad_epochs = 0;
  std::set<int> consumed;
  rng::Stream shuffle_root(cfg.seed, "aed-shuffle");

  const std::size_t n = train_pool.size();
  std::vector<std::size_t> perm(n);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng::Stream g = shuffle_root.fork(static_cast<std::uint64_t>(epoch));
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    for (std::size_t i = n; i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(g.below(i));
      std::swap(perm[i - 1], perm[j]);
    }

    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n;
         start += static_cast<std::size_t>(cfg.batch)) {
      std::size_t m = std::min(static_cast<std::size_t>(cfg.batch), n - start);
      std::vector<Tensor> batch;
      batch.reserve(m);
      for (std::size_t k = 0; k < m; ++k) {
        batch.push_back(train_pool[perm[start + k]]);
        if (pool_ids[perm[start + k]] >= 0) {
          consumed.insert(pool_ids[perm[start + k]]);
        }
      }
      Tape t;
      Var loss = loss_graph(t, res.params, batch);
      double lv = loss.value()(0, 0);
      if (!std::isfinite(lv)) {
        throw NumericError("aed training loss diverged at epoch " +
                           std::to_string(epoch));
      }
      epoch_loss += lv * static_cast<double>(m);
      GradMap grads = t.backward(loss);
      opt.step(res.params.params, grads, acfg);
    }
    res.train_loss.push_back(epoch_loss / static_cast<double>(n));

    double ev = reconstruction_mse(res.params, eval_pool);
    res.eval_loss.push_back(ev);
    if (ev < best_eval) {
      best_eval = ev;
      best = res.params.params;
      res.best_epoch = epoch;
      bad_epochs = 0;
    } else if (++bad_epochs >= cfg.patience) {
      break;
    }
  }
  res.params.params = std::move(best);
  res.train_event_ids.assign(consumed.begin(), consumed.end());
  return res;
}

void save_aed(const AedParams& p, int order, const std::filesystem::path& path) {
  check_config(p.cfg);
  feeder::harmonic_index(order);  // rejects anything but 1/3/5
  io::ModelFile m;
  char leak[32];
  std::snprintf(leak, sizeof leak, "%.17g", p.cfg.leak);
  m.meta = {{"kind", "aed"},
            {"order", std::to_string(order)},
            {"seq_len", std::to_string(p.cfg.seq_len)},
            {"channels", std::to_string(p.cfg.channels)},
            {"units1", std::to_string(p.cfg.units1)},
            {"units2", std::to_string(p.cfg.units2)},
            {"embed", std::to_string(p.cfg.embed)},
            {"leak", leak}};
  m.params = p.params;
  io::write_model(m, path);
}

AedParams load_aed(const std::filesystem::path& path, int expected_order) {
  io::ModelFile m = io::read_model(path);
  if (m.meta_value("kind") != "aed") {
    throw SchemaError("model kind is " + m.meta_value("kind") +
                      ", expected aed");
  }
  int order = meta_int(m, "order");
  if (expected_order >= 0 && order != expected_order) {
    throw SchemaError("model holds order " + std::to_string(order) +
                      ", expected " + std::to_string(expected_order));
  }
  AedParams p;
  p.cfg.seq_len = meta_int(m, "seq_len");
  p.cfg.channels = meta_int(m, "channels");
  p.cfg.units1 = meta_int(m, "units1");
  p.cfg.units2 = meta_int(m, "units2");
  p.cfg.embed = meta_int(m, "embed");
  p.cfg.leak = meta_double(m, "leak");
  try {
    check_config(p.cfg);
  } catch (const ContractError& e) {
    throw SchemaError(std::string("model meta is inconsistent: ") + e.what());
  }
  std::vector<std::string> names = param_names();
  if (m.params.size() != names.size()) {
    throw SchemaError("model holds " + std::to_string(m.params.size()) +
                      " parameters, expected " + std::to_string(names.size()));
  }
  for (const std::string& name : names) {
    if (!m.params.has(name)) {
      throw SchemaError("model is missing parameter " + name);
    }
    auto [r, c] = expected_shape(p.cfg, name);
    const Tensor& v = m.params.at(name);
    if (v.rows() != r || v.cols() != c) {
      throw SchemaError("parameter " + name + " has shape " + shape_str(v) +
                        ", architecture implies " + shape_str(r, c));
    }
  }
  p.params = std::move(m.params);
  return p;
}

std::vector<Tensor> embed_dataset(const std::map<int, AedParams>& aeds,
                                  const feeder::Dataset& d,
                                  const feeder::FeederTopology& topo,
                                  const EmbedOptions& opt) {
  std::vector<int> orders = opt.use_harmonics ? std::vector<int>{1, 3, 5}
                                              : std::vector<int>{1};
  for (int order : orders) {
    auto it = aeds.find(order);
    if (it == aeds.end()) {
      throw MissingArtifactError("no encoder for harmonic order " +
                                 std::to_string(order));
    }
    const AedConfig& c = it->second.cfg;
    if (c.seq_len != d.window_len() || c.channels != feeder::kChannels) {
      throw ValidationError("order-" + std::to_string(order) +
                            " encoder expects " +
                            shape_str(c.seq_len, c.channels) +
                            " windows, dataset has " +
                            shape_str(d.window_len(), feeder::kChannels));
    }
    if (c.embed != aeds.at(1).cfg.embed) {
      throw ValidationError("encoders disagree on embedding width");
    }
  }
  const Index E = aeds.at(1).cfg.embed;
  const Index F = static_cast<Index>(orders.size()) * E;
  const int n_buses = topo.n_buses();
  const int n_records = d.n_records();
  const int n_sensors = static_cast<int>(d.sensor_buses().size());

  std::vector<Tensor> feats(static_cast<std::size_t>(n_records),
                            Tensor::Zero(n_buses, F));

  // Sensor rows: one batched encode per order over every record window.
  for (std::size_t oi = 0; oi < orders.size(); ++oi) {
    int h = feeder::harmonic_index(orders[oi]);
    std::vector<Tensor> windows;
    windows.reserve(static_cast<std::size_t>(n_records * n_sensors));
    for (int ri = 0; ri < n_records; ++ri) {
      const feeder::EventRecord& rec = d.record(ri);
      for (int sp = 0; sp < n_sensors; ++sp) {
        windows.push_back(
            d.normalize(rec.windows[static_cast<std::size_t>(sp)]
                                   [static_cast<std::size_t>(h)],
                        h));
      }
    }
    Tensor em = aed_encode_batch(aeds.at(orders[oi]), windows);
    for (int ri = 0; ri < n_records; ++ri) {
      for (int sp = 0; sp < n_sensors; ++sp) {
        Index bus = static_cast<Index>(d.sensor_buses()[static_cast<std::size_t>(sp)]);
        feats[static_cast<std::size_t>(ri)].block(
            bus, static_cast<Index>(oi) * E, 1, E) =
            em.row(ri * n_sensors + sp);
      }
    }
  }

  // Quiet rows: fundamental-order embedding of the bus's event-free window,
  // harmonic slots left at zero. Nominal datasets share one embedding per
  // bus; randomized-load datasets re-derive the operating point per event.
  std::vector<int> quiet;
  for (int bus = 0; bus < n_buses; ++bus) {
    if (!topo.is_sensor(bus)) quiet.push_back(bus);
  }
  if (!quiet.empty()) {
    const AedParams& fund = aeds.at(1);
    bool per_event = opt.gen != nullptr && opt.gen->random_load;
    if (!per_event) {
      feeder::OperatingPoint op = feeder::nominal_load_flow(topo);
      std::vector<Tensor> flats;
      flats.reserve(quiet.size());
      for (int bus : quiet) {
        flats.push_back(
            d.normalize(feeder::flat_series(op, bus, 1, d.window_len()), 0));
      }
      Tensor em = aed_encode_batch(fund, flats);
      for (std::size_t qi = 0; qi < quiet.size(); ++qi) {
        for (int ri = 0; ri < n_records; ++ri) {
          feats[static_cast<std::size_t>(ri)].block(
              static_cast<Index>(quiet[qi]), 0, 1, E) =
              em.row(static_cast<Index>(qi));
        }
      }
    } else {
      for (int ri = 0; ri < n_records; ++ri) {
        feeder::OperatingPoint op = feeder::event_operating_point(
            topo, *opt.gen, d.record(ri).event_id);
        std::vector<Tensor> flats;
        flats.reserve(quiet.size());
        for (int bus : quiet) {
          flats.push_back(
              d.normalize(feeder::flat_series(op, bus, 1, d.window_len()), 0));
        }
        Tensor em = aed_encode_batch(fund, flats);
        for (std::size_t qi = 0; qi < quiet.size(); ++qi) {
          feats[static_cast<std::size_t>(ri)].block(
              static_cast<Index>(quiet[qi]), 0, 1, E) =
              em.row(static_cast<Index>(qi));
        }
      }
    }
  }
  return feats;
}

}  // namespace gpmu::temporal
