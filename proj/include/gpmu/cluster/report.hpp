#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace gpmu::cluster {

struct ClusterReport {
  std::vector<int> event_ids;
  std::vector<int> true_classes;
  std::vector<int> assignments;
  std::string variant;
  double ari_score = 0.0;
  std::uint64_t seed = 0;
  // config snapshot, one "key = value" entry per line, written as comments
  std::vector<std::string> config_lines;
};

// Comment header, then `event_id,true_class,assignment` rows, then a
// `variant,ari,seed` summary line. Byte-stable for identical inputs.
std::string render_report(const ClusterReport& r);
void write_report(const ClusterReport& r, const std::filesystem::path& path);

}  // namespace gpmu::cluster
