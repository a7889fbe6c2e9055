#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "gpmu/numerics/params.hpp"

namespace gpmu::io {

// Versioned checkpoint container, magic GPMU-MODEL 1. Line two holds
// ordered key=value metadata (first key is `kind`). Each parameter line:
// PARAM <name> <rows> <cols> <hex of row-major little-endian float64>.
struct ModelFile {
  std::vector<std::pair<std::string, std::string>> meta;
  ParamSet params;

  const std::string& meta_value(const std::string& key) const;
  bool has_meta(const std::string& key) const;
};

void write_model(const ModelFile& m, const std::filesystem::path& path);
ModelFile read_model(const std::filesystem::path& path);

}  // namespace gpmu::io
