#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "gpmu/feeder/events.hpp"
#include "gpmu/feeder/loadflow.hpp"
#include "gpmu/feeder/topology.hpp"
#include "gpmu/numerics/tensor.hpp"
#include "gpmu/rng.hpp"

namespace gpmu::feeder {

enum class Split { kTrain = 0, kEval = 1, kTest = 2 };
constexpr int kNumSplits = 3;

const char* split_name(Split s);
Split split_from_name(const std::string& name);  // throws ParseError

struct EventRecord {
  int event_id = 0;
  int klass = 1;
  int location = 0;  // bus index
  Split split = Split::kTrain;
  // windows[sensor position][harmonic index], raw T x 9 matrices in the
  // sensor order of the owning dataset.
  std::vector<std::array<Tensor, 3>> windows;
};

// Columnwise z-score statistics per harmonic order, fitted on the train
// split only. Standard deviations are floored at 1e-8.
struct NormStats {
  Tensor mean;   // 3 x 9
  Tensor stdev;  // 3 x 9
};

struct GenerateConfig {
  std::uint64_t seed = 1;
  int train_per_class = 200;
  int eval_per_class = 50;
  int test_per_class = 50;
  SynthConfig synth;
  int shift_range = 10;      // common circular time shift, +- samples
  double aug_sigma = 0.005;  // augmentation noise after the shift
  bool random_load = false;  // per-event, per-bus load scale U(0.5, 1.5)
};

// Immutable event collection bound to one feeder (by content hash) and one
// sensor set. Records hold raw windows; normalization is applied on access.
class Dataset {
 public:
  Dataset(std::string feeder_hash, int window_len,
          std::vector<int> sensor_buses, std::vector<std::string> sensor_labels,
          std::vector<EventRecord> records);

  const std::string& feeder_hash() const { return feeder_hash_; }
  int window_len() const { return window_len_; }
  int n_records() const { return static_cast<int>(records_.size()); }
  const std::vector<int>& sensor_buses() const { return sensor_buses_; }
  const std::vector<std::string>& sensor_labels() const {
    return sensor_labels_;
  }
  const std::vector<EventRecord>& records() const { return records_; }
  const EventRecord& record(int i) const {
    return records_[static_cast<std::size_t>(i)];
  }
  const NormStats& stats() const { return stats_; }
  const std::vector<int>& split_indices(Split s) const {
    return split_indices_[static_cast<std::size_t>(s)];
  }

  // (x - mean(h,:)) / stdev(h,:) columnwise for harmonic slot h.
  Tensor normalize(const Tensor& x, int harmonic_idx) const;

 private:
  std::string feeder_hash_;
  int window_len_ = 0;
  std::vector<int> sensor_buses_;
  std::vector<std::string> sensor_labels_;
  std::vector<EventRecord> records_;
  NormStats stats_;
  std::array<std::vector<int>, kNumSplits> split_indices_;
};

// Rotates every window of the record by the same offset along the time
// axis: output row t takes input row (t - s) mod T.
EventRecord circular_shift(const EventRecord& rec, int s);

// One common random circular shift in [-shift_range, shift_range], then
// i.i.d. Gaussian noise on every matrix entry. Label fields unchanged.
EventRecord augment(const EventRecord& rec, int shift_range,
                    double noise_sigma, rng::Stream g);

Dataset generate_dataset(const FeederTopology& topo,
                         const GenerateConfig& cfg);

// Operating point seen by one event: nominal, unless random_load mode drew
// per-bus multipliers for it. Reproduces the load draw made at generation.
OperatingPoint event_operating_point(const FeederTopology& topo,
                                     const GenerateConfig& cfg, int event_id);

}  // namespace gpmu::feeder
