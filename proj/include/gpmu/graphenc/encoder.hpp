#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "gpmu/feeder/dataset.hpp"
#include "gpmu/feeder/topology.hpp"
#include "gpmu/graphenc/graph.hpp"
#include "gpmu/numerics/params.hpp"
#include "gpmu/numerics/tape.hpp"

namespace gpmu::graphenc {

using ad::Tape;
using ad::Var;

// How the discriminator fuses a (node, graph) pair: elementwise product
// into the affine stack, or a single bilinear form. The bilinear variant
// has no single-vector pathway, so it cannot drive graph_only training.
enum class DiscFusion { kProduct, kBilinear };

// node_graph scores (node repr, graph repr) pairs; graph_only scores the
// graph-level vectors of positive and negative graphs directly.
enum class EncodeMode { kNodeGraph, kGraphOnly };

const char* fusion_name(DiscFusion f);
DiscFusion fusion_from_name(const std::string& name);  // throws ParseError
const char* mode_name(EncodeMode m);
EncodeMode mode_from_name(const std::string& name);  // throws ParseError

struct GraphEncConfig {
  int in_dim = 32;
  int hidden1 = 128;
  int hidden2 = 64;
  int disc_hidden = 32;
  double leak = 0.2;
  DiscFusion fusion = DiscFusion::kProduct;
  EncodeMode mode = EncodeMode::kNodeGraph;
};

// Two-layer graph convolution stack plus the discriminator trained with
// it. Node representations concatenate both layer outputs (hidden1 +
// hidden2 wide); the graph representation is their elementwise mean.
struct GraphEncoder {
  GraphEncConfig cfg;
  ParamSet params;
};

GraphEncoder init_graph_encoder(const GraphEncConfig& cfg, std::uint64_t seed);

struct GraphVars {
  Var nodes;  // N x (hidden1 + hidden2)
  Var graph;  // 1 x (hidden1 + hidden2)
};

// Propagates features through both layers on the tape. `norm_adj` must
// already be the normalized adjacency.
GraphVars encode_graph(Tape& t, const GraphEncoder& enc, const Tensor& norm_adj,
                       const Tensor& features);

// Logit per node row: fuses each row of `nodes` with the single `graph`
// row and applies the discriminator. Shapes: nodes K x D, graph 1 x D,
// result K x 1.
Var discriminator_scores(const GraphEncoder& enc, Var nodes, Var graph);

// Logit per vector row without pairing (graph_only path; product fusion
// only). vecs K x D -> K x 1.
Var vector_scores(const GraphEncoder& enc, Var vecs);

// Jensen-Shannon mutual-information estimate over score collections of
// identical shape (one negative per positive):
//   (1/(2K)) * sum(-softplus(-pos) - softplus(neg)).
// The value is always negative; training minimizes its negation.
Var js_mi_loss(Var pos, Var negs);

// Forward-only conveniences.
std::pair<Tensor, Tensor> gcn_encode(const GraphEncoder& enc,
                                     const EventGraph& g);
double discriminator_score(const GraphEncoder& enc, const Tensor& node,
                           const Tensor& graph);

struct TrainGraphConfig {
  int epochs = 100;
  int batch = 32;
  double lr = 1e-3;
  std::uint64_t seed = 1;
  int patience = 5;             // early stop on the eval-split estimate
  bool fresh_negatives = true;  // resample negative trees every epoch
  GraphEncConfig arch;          // in_dim is overwritten from the features
};

struct GraphTrainResult {
  GraphEncoder enc;  // snapshot of the best eval epoch
  std::vector<double> train_mi;
  std::vector<double> eval_mi;
  int best_epoch = 0;
  // event ids whose graphs reached the optimizer, ascending
  std::vector<int> train_event_ids;
};

// Trains encoder and discriminator jointly on the train split. `features`
// holds one n_buses x F matrix per dataset record (see
// temporal::embed_dataset); eval-split negatives are fixed per event so
// epochs stay comparable.
GraphTrainResult train_graph_encoder(const std::vector<Tensor>& features,
                                     const feeder::Dataset& d,
                                     const feeder::FeederTopology& topo,
                                     const TrainGraphConfig& cfg);

// Graph-level vector per record (rows follow the dataset record order).
// `mode` must match the mode the encoder was trained with.
Tensor encode_events(const GraphEncoder& enc,
                     const std::vector<Tensor>& features,
                     const feeder::FeederTopology& topo, EncodeMode mode);

void save_graph_encoder(const GraphEncoder& enc,
                        const std::filesystem::path& path);
GraphEncoder load_graph_encoder(const std::filesystem::path& path);

}  // namespace gpmu::graphenc
