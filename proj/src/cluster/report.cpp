#include "gpmu/cluster/report.hpp"

#include <cstdio>

#include "gpmu/errors.hpp"
#include "gpmu/io/text.hpp"

namespace gpmu::cluster {

std::string render_report(const ClusterReport& r) {
  if (r.event_ids.size() != r.true_classes.size() ||
      r.event_ids.size() != r.assignments.size()) {
    throw ContractError("report columns have mismatched lengths");
  }
  std::string out;
  for (const std::string& line : r.config_lines) {
    out += "# " + line + "\n";
  }
  out += "event_id,true_class,assignment\n";
  for (std::size_t i = 0; i < r.event_ids.size(); ++i) {
    out += std::to_string(r.event_ids[i]) + ',' +
           std::to_string(r.true_classes[i]) + ',' +
           std::to_string(r.assignments[i]) + '\n';
  }
  char ari_text[32];
  std::snprintf(ari_text, sizeof ari_text, "%.6f", r.ari_score);
  out += "variant,ari,seed\n";
  out += r.variant + ',' + ari_text + ',' + std::to_string(r.seed) + '\n';
  return out;
}

void write_report(const ClusterReport& r, const std::filesystem::path& path) {
  io::atomic_write_file(path, render_report(r));
}

}  // namespace gpmu::cluster
