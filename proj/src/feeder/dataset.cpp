#include "gpmu/feeder/dataset.hpp"

#include <algorithm>
#include <set>
#include <utility>

#include "gpmu/errors.hpp"

namespace gpmu::feeder {

const char* split_name(Split s) {
  switch (s) {
    case Split::kTrain:
      return "train";
    case Split::kEval:
      return "eval";
    case Split::kTest:
      return "test";
  }
  throw ContractError("invalid split value");
}

Split split_from_name(const std::string& name) {
  if (name == "train") return Split::kTrain;
  if (name == "eval") return Split::kEval;
  if (name == "test") return Split::kTest;
  throw ParseError("unknown split tag '" + name + "'");
}

Dataset::Dataset(std::string feeder_hash, int window_len,
                 std::vector<int> sensor_buses,
                 std::vector<std::string> sensor_labels,
                 std::vector<EventRecord> records)
    : feeder_hash_(std::move(feeder_hash)),
      window_len_(window_len),
      sensor_buses_(std::move(sensor_buses)),
      sensor_labels_(std::move(sensor_labels)),
      records_(std::move(records)) {
  if (window_len_ <= 0) throw ValidationError("window length must be positive");
  if (sensor_buses_.empty()) throw ValidationError("dataset has no sensors");
  if (sensor_buses_.size() != sensor_labels_.size()) {
    throw ValidationError("sensor label list does not match sensor buses");
  }
  if (records_.empty()) throw ValidationError("dataset has no records");

  std::set<int> seen_ids;
  for (const EventRecord& r : records_) {
    std::string ev = "event " + std::to_string(r.event_id);
    if (!seen_ids.insert(r.event_id).second) {
      throw ValidationError(ev + ": duplicate event id");
    }
    if (r.klass < 1 || r.klass > kNumClasses) {
      throw ValidationError(ev + ": class " + std::to_string(r.klass) +
                            " out of range 1..9");
    }
    if (r.windows.size() != sensor_buses_.size()) {
      throw ValidationError(ev + ": has " + std::to_string(r.windows.size()) +
                            " sensor blocks, dataset declares " +
                            std::to_string(sensor_buses_.size()));
    }
    for (const auto& per_bus : r.windows) {
      for (const Tensor& m : per_bus) {
        if (m.rows() != window_len_ || m.cols() != kChannels) {
          throw ValidationError(ev + ": window shape " + shape_str(m) +
                                ", expected " +
                                shape_str(window_len_, kChannels));
        }
        if (!all_finite(m)) {
          throw ValidationError(ev + ": window has non-finite values");
        }
      }
    }
  }

  for (std::size_t i = 0; i < records_.size(); ++i) {
    split_indices_[static_cast<std::size_t>(records_[i].split)].push_back(
        static_cast<int>(i));
  }
  for (int s = 0; s < kNumSplits; ++s) {
    std::array<bool, kNumClasses> present{};
    for (int i : split_indices_[static_cast<std::size_t>(s)]) {
      present[static_cast<std::size_t>(records_[static_cast<std::size_t>(i)].klass - 1)] = true;
    }
    for (int c = 0; c < kNumClasses; ++c) {
      if (!present[static_cast<std::size_t>(c)]) {
        throw ValidationError(std::string("split ") +
                              split_name(static_cast<Split>(s)) +
                              " is missing class " + std::to_string(c + 1));
      }
    }
  }

  // Columnwise mean and population std over every train-split sample.
  stats_.mean = Tensor::Zero(3, kChannels);
  stats_.stdev = Tensor::Zero(3, kChannels);
  const auto& train = split_indices_[0];
  double n = static_cast<double>(train.size()) *
             static_cast<double>(sensor_buses_.size()) *
             static_cast<double>(window_len_);
  for (int i : train) {
    for (const auto& per_bus : records_[static_cast<std::size_t>(i)].windows) {
      for (int h = 0; h < 3; ++h) {
        stats_.mean.row(h) += per_bus[static_cast<std::size_t>(h)].colwise().sum();
      }
    }
  }
  stats_.mean /= n;
  for (int i : train) {
    for (const auto& per_bus : records_[static_cast<std::size_t>(i)].windows) {
      for (int h = 0; h < 3; ++h) {
        stats_.stdev.row(h) +=
            (per_bus[static_cast<std::size_t>(h)].rowwise() - stats_.mean.row(h))
                .array()
                .square()
                .matrix()
                .colwise()
                .sum();
      }
    }
  }
  stats_.stdev = (stats_.stdev / n).array().sqrt().max(1e-8).matrix();
}

Tensor Dataset::normalize(const Tensor& x, int harmonic_idx) const {
  if (x.cols() != kChannels) {
    throw ShapeError("normalize expects " + std::to_string(kChannels) +
                     " channels, got shape " + shape_str(x));
  }
  if (harmonic_idx < 0 || harmonic_idx >= 3) {
    throw ContractError("harmonic index out of range");
  }
  Tensor out(x.rows(), x.cols());
  for (int c = 0; c < kChannels; ++c) {
    out.col(c) = (x.col(c).array() - stats_.mean(harmonic_idx, c)) /
                 stats_.stdev(harmonic_idx, c);
  }
  return out;
}

EventRecord circular_shift(const EventRecord& rec, int s) {
  EventRecord out = rec;
  for (auto& per_bus : out.windows) {
    for (Tensor& m : per_bus) {
      const Index T = m.rows();
      Tensor shifted(T, m.cols());
      for (Index t = 0; t < T; ++t) {
        Index src = ((t - s) % T + T) % T;
        shifted.row(t) = m.row(src);
      }
      m = std::move(shifted);
    }
  }
  return out;
}

EventRecord augment(const EventRecord& rec, int shift_range,
                    double noise_sigma, rng::Stream g) {
  if (rec.windows.empty()) throw ContractError("augment: record has no windows");
  const Index T = rec.windows[0][0].rows();
  if (shift_range < 0 || static_cast<Index>(shift_range) >= T) {
    throw ContractError("shift range " + std::to_string(shift_range) +
                        " must lie in [0, T) with T = " + std::to_string(T));
  }
  int s = static_cast<int>(g.range(-shift_range, shift_range));
  EventRecord out = circular_shift(rec, s);
  if (noise_sigma > 0.0) {
    for (auto& per_bus : out.windows) {
      for (Tensor& m : per_bus) {
        for (Index t = 0; t < m.rows(); ++t) {
          for (Index c = 0; c < m.cols(); ++c) {
            m(t, c) += noise_sigma * g.normal();
          }
        }
      }
    }
  }
  return out;
}

namespace {

OperatingPoint draw_operating_point(const FeederTopology& topo,
                                    const GenerateConfig& cfg,
                                    const rng::Stream& event_stream,
                                    const OperatingPoint& nominal) {
  if (!cfg.random_load) return nominal;
  rng::Stream ls = event_stream.fork("load");
  Eigen::VectorXd scale(topo.n_buses());
  for (int b = 0; b < topo.n_buses(); ++b) scale(b) = ls.uniform(0.5, 1.5);
  return load_flow(topo, scale);
}

}  // namespace

Dataset generate_dataset(const FeederTopology& topo,
                         const GenerateConfig& cfg) {
  const int counts[kNumSplits] = {cfg.train_per_class, cfg.eval_per_class,
                                  cfg.test_per_class};
  for (int c : counts) {
    if (c < 1) throw ContractError("per-class event counts must be >= 1");
  }
  if (cfg.synth.window_len <= 1) {
    throw ContractError("window length must exceed 1 sample");
  }

  OperatingPoint nominal = nominal_load_flow(topo);
  rng::Stream events = rng::Stream(cfg.seed, "event");

  std::vector<EventRecord> records;
  records.reserve(static_cast<std::size_t>(counts[0] + counts[1] + counts[2]) *
                  kNumClasses);
  int event_id = 0;
  for (int s = 0; s < kNumSplits; ++s) {
    for (int klass = 1; klass <= kNumClasses; ++klass) {
      for (int k = 0; k < counts[s]; ++k) {
        rng::Stream ev = events.fork(static_cast<std::uint64_t>(event_id));
        OperatingPoint op = draw_operating_point(topo, cfg, ev, nominal);
        EventSpec spec = sample_event_spec(klass, topo, op,
                                           cfg.synth.window_len,
                                           ev.fork("spec"));
        EventRecord rec;
        rec.event_id = event_id;
        rec.klass = klass;
        rec.location = spec.location;
        rec.split = static_cast<Split>(s);
        rec.windows = synth_event(topo, op, spec, cfg.synth, ev.fork("noise"));
        records.push_back(
            augment(rec, cfg.shift_range, cfg.aug_sigma, ev.fork("augment")));
        ++event_id;
      }
    }
  }

  std::vector<std::string> labels;
  labels.reserve(topo.sensors().size());
  for (int b : topo.sensors()) labels.push_back(topo.bus_id(b));
  return Dataset(topo.hash_hex(), cfg.synth.window_len, topo.sensors(),
                 std::move(labels), std::move(records));
}

OperatingPoint event_operating_point(const FeederTopology& topo,
                                     const GenerateConfig& cfg, int event_id) {
  OperatingPoint nominal = nominal_load_flow(topo);
  rng::Stream ev = rng::Stream(cfg.seed, "event")
                       .fork(static_cast<std::uint64_t>(event_id));
  return draw_operating_point(topo, cfg, ev, nominal);
}

}  // namespace gpmu::feeder
