#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gpmu/graphenc/encoder.hpp"
#include "gpmu/temporal/aed.hpp"

namespace gpmu::pipeline {

// Ablation variants, listed in the order the summary table reports them.
//   ts-ng-nl   raw windows as node features, node/graph pairing, flats
//   aed        sensor embeddings straight to the mixture model
//   aed-ng     embeddings on the sensor-only contracted subtree
//   aed-ng-rl  embeddings on the full feeder, randomized-load flats
//   aed-g-nl   embeddings on the full feeder, graph-level pairing only
//   graphpmu   embeddings on the full feeder, node/graph pairing, flats
enum class Variant { kTsNgNl, kAed, kAedNg, kAedNgRl, kAedGNl, kGraphpmu };

inline constexpr std::array<Variant, 6> kAllVariants{
    Variant::kTsNgNl, Variant::kAed,    Variant::kAedNg,
    Variant::kAedNgRl, Variant::kAedGNl, Variant::kGraphpmu};

const char* variant_name(Variant v);
Variant variant_from_name(const std::string& name);  // throws UsageError

// One run's complete configuration. Every field maps to a config-file key
// of the same name (see parse_config_text); command-line flags override
// individual keys. The seed has no default on purpose: commands refuse to
// run until one is given explicitly.
struct RunConfig {
  std::filesystem::path topology;
  // bus labels to sensor; empty keeps the topology file's own SENSORS line
  std::vector<std::string> sensor_buses;
  std::filesystem::path out_dir = "out";
  // where dataset.gpmu / aed_o*.model are read from (out_dir when unset);
  // outputs always land in out_dir
  std::optional<std::filesystem::path> inputs_dir;
  std::optional<std::uint64_t> seed;

  int train_per_class = 200;
  int eval_per_class = 50;
  int test_per_class = 50;
  int window_len = 125;
  int channels = 9;  // fixed by the measurement layout; validated, not tunable
  std::vector<int> orders = {1};  // {1} or {1, 3, 5}

  int shift_range = 10;
  double aug_sigma = 0.005;
  double noise_fund = 0.002;
  double noise_harm = 0.0005;
  double atten_lambda = 0.15;
  bool random_load = false;

  // per-harmonic-order trainer settings (keys 1, 3, 5); seed and window
  // geometry are overwritten at run time
  std::map<int, temporal::TrainAedConfig> aed = [] {
    std::map<int, temporal::TrainAedConfig> m;
    m.emplace(1, temporal::TrainAedConfig{});
    m.emplace(3, temporal::TrainAedConfig{});
    m.emplace(5, temporal::TrainAedConfig{});
    return m;
  }();
  graphenc::TrainGraphConfig graph;

  Variant variant = Variant::kGraphpmu;
  int k = 9;

  std::uint64_t resolved_seed() const;  // UsageError when unset
  bool harmonics() const { return orders.size() == 3; }
};

// Flat `key = value` text, one pair per line, # comments, blank lines
// ignored. Unknown keys, duplicate keys, and malformed values are usage
// errors naming the key.
RunConfig parse_config_text(const std::string& text);
RunConfig parse_config_file(const std::filesystem::path& path);

// Applies one key (the config-file grammar); shared by the file parser and
// the command-line override path.
void set_config_key(RunConfig& c, const std::string& key,
                    const std::string& value);

// Canonical `key = value` rendering; parse_config_text(render) round-trips.
std::vector<std::string> render_config(const RunConfig& c);

// Structural checks shared by every command (positive counts, sane rates,
// the fixed channel count, variant/flag consistency). UsageError names the
// offending key.
void validate_config(const RunConfig& c);

}  // namespace gpmu::pipeline
