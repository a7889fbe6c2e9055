#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "gpmu/cluster/report.hpp"
#include "gpmu/feeder/topology.hpp"
#include "gpmu/pipeline/config.hpp"

namespace gpmu::pipeline {

// Artifact names inside a run directory. Inputs (the dataset and the AED
// checkpoints) resolve against inputs_dir when set; everything a command
// writes lands in out_dir.
namespace paths {
std::filesystem::path dataset_in(const RunConfig& c);
std::filesystem::path dataset_out(const RunConfig& c);
std::filesystem::path aed_model_in(const RunConfig& c, int order);
std::filesystem::path aed_model_out(const RunConfig& c, int order);
std::filesystem::path aed_loss(const RunConfig& c, int order);
std::filesystem::path graph_model(const RunConfig& c);
std::filesystem::path graph_loss(const RunConfig& c);
std::filesystem::path embeddings(const RunConfig& c);
std::filesystem::path clusters(const RunConfig& c);
std::filesystem::path projection(const RunConfig& c);
}  // namespace paths

// Synthesizes the event dataset and writes dataset.gpmu; logs per-class
// record counts per split.
void cmd_generate(const RunConfig& c, std::ostream& log);

// Trains the auto-encoder for one harmonic order on the train split and
// writes aed_o<order>.model plus a per-epoch loss curve.
void cmd_train_aed(const RunConfig& c, int order, std::ostream& log);

// Builds the variant's node features, trains the graph encoder, and writes
// graph.model, its loss curve, and (for embedding-based variants) the
// shared embeddings artifact. The `aed` variant has no graph stage.
void cmd_train_graph(const RunConfig& c, std::ostream& log);

// Fits a Gaussian mixture on the train-split event vectors, assigns the
// test split, and writes clusters.csv with the adjusted Rand index.
cluster::ClusterReport cmd_cluster(const RunConfig& c, std::ostream& log);

// Writes projection.csv: 2-D principal-component coordinates of the
// test-split event vectors, one row per test event.
void cmd_project(const RunConfig& c, std::ostream& log);

struct AblationResult {
  // one report per (variant, seed), variants in summary-table order
  std::vector<cluster::ClusterReport> reports;
  std::vector<std::pair<Variant, double>> median_ari;
};

// Runs every requested variant end to end per seed, sharing the dataset and
// AED checkpoints that are identical across variants of one seed. Writes
// ablate_runs.csv and ablate_summary.csv under out_dir/ablate/.
AblationResult cmd_ablate(const RunConfig& c, std::vector<Variant> variants,
                          std::vector<std::uint64_t> seeds, std::ostream& log);

struct SweepRow {
  int sensor_count = 0;
  bool harmonics = false;
  double median_ari = 0.0;
  std::vector<std::string> buses;  // the placed sensor labels
};

// For each sensor count: places sensors by greedy hop-distance dispersion,
// reruns the full graphpmu pipeline per seed in both harmonic modes, and
// reports median ARI per (count, mode). Writes sweep_runs.csv and
// sweep_summary.csv under out_dir/sweep/.
std::vector<SweepRow> cmd_sweep_sensors(const RunConfig& c,
                                        std::vector<int> counts,
                                        std::vector<std::uint64_t> seeds,
                                        std::ostream& log);

// Contracts the feeder tree onto its sensor set: the sensor nearest the
// source becomes the root, every other sensor attaches to the first sensor
// on its ancestor chain (or to the root if the chain is sensor-free). Edge
// impedances accumulate along the original paths.
feeder::FeederTopology contract_to_sensors(const feeder::FeederTopology& t);

// Deterministic max-dispersion sensor placement: seeded random start, then
// farthest-point selection on hop distance (ties to the lowest bus index).
// Returns bus labels in index order.
std::vector<std::string> place_sensors(const feeder::FeederTopology& t,
                                       int count, std::uint64_t seed);

// 16-hex-digit FNV-1a digest of an id list; stamped into loss-curve files
// so a run records which records its optimizer consumed.
std::string fnv1a_ids(const std::vector<int>& ids);

}  // namespace gpmu::pipeline
