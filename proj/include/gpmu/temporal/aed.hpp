#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <vector>

#include "gpmu/feeder/dataset.hpp"
#include "gpmu/feeder/topology.hpp"
#include "gpmu/numerics/params.hpp"
#include "gpmu/numerics/tape.hpp"

namespace gpmu::temporal {

using ad::Tape;
using ad::Var;

// Sequence auto-encoder: two recurrent layers (units1, units2) into an
// `embed`-dim affine head; decoder seeds a units2 vector, tiles it across
// the window, runs recurrent layers units2 then units1, and maps each step
// back to the channel count.
struct AedConfig {
  int seq_len = 125;
  int channels = 9;
  int units1 = 32;
  int units2 = 64;
  int embed = 32;
  double leak = 0.2;
};

struct AedParams {
  AedConfig cfg;
  ParamSet params;
};

AedParams init_aed(const AedConfig& cfg, std::uint64_t seed);

// Graph builders over a batch of seq_len x channels windows. The loss is
// sum of squared reconstruction error / (batch * seq_len * channels).
Var encoder_graph(Tape& t, const AedParams& p, const std::vector<Tensor>& batch);
Var loss_graph(Tape& t, const AedParams& p, const std::vector<Tensor>& batch);

Tensor aed_encode(const AedParams& p, const Tensor& window);  // 1 x embed
Tensor aed_encode_batch(const AedParams& p, const std::vector<Tensor>& ws);
Tensor aed_decode(const AedParams& p, const Tensor& embedding);  // T x C
double reconstruction_mse(const AedParams& p, const std::vector<Tensor>& ws);

struct TrainAedConfig {
  int epochs = 50;
  int batch = 32;
  double lr = 1e-3;
  std::uint64_t seed = 1;
  int patience = 5;  // early stop on eval reconstruction error
  AedConfig arch;    // seq_len/channels are overwritten from the dataset
};

struct AedTrainResult {
  AedParams params;  // snapshot of the best eval epoch
  std::vector<double> train_loss;
  std::vector<double> eval_loss;
  int best_epoch = 0;
  // event ids whose windows reached the optimizer, ascending (flat windows
  // belong to no event and are not listed)
  std::vector<int> train_event_ids;
};

// Trains one harmonic order on every (train event, sensor) window of that
// order; the fundamental order also sees each unsensored bus's normalized
// flat window once per epoch.
AedTrainResult train_aed(const feeder::Dataset& d,
                         const feeder::FeederTopology& topo, int order,
                         const TrainAedConfig& cfg);

void save_aed(const AedParams& p, int order, const std::filesystem::path& path);
// expected_order < 0 accepts any order; otherwise a mismatch is an error
AedParams load_aed(const std::filesystem::path& path, int expected_order);

struct EmbedOptions {
  bool use_harmonics = false;
  // when set and random_load is on, flat windows use per-event load draws
  const feeder::GenerateConfig* gen = nullptr;
};

// One n_buses x F feature matrix per record, rows in bus index order.
// F = embed (fundamental only) or 3*embed (orders 1,3,5 concatenated;
// unsensored buses carry zeros in the order-3/5 slots).
std::vector<Tensor> embed_dataset(const std::map<int, AedParams>& aeds,
                                  const feeder::Dataset& d,
                                  const feeder::FeederTopology& topo,
                                  const EmbedOptions& opt);

}  // namespace gpmu::temporal
