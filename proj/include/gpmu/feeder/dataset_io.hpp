#pragma once

#include <filesystem>

#include "gpmu/feeder/dataset.hpp"
#include "gpmu/feeder/topology.hpp"

namespace gpmu::feeder {

// Line-delimited text format, versioned magic GPMU-DATA 1. Header keys:
// feeder (topology content hash), T, C, orders, sensors, records. Each
// record line: `E <id> <class> <location> <split>` followed by one
// `<bus>:<order>:<hex>` block per (sensor, order) in declaration order,
// hex being the row-major little-endian float64 image of the T x C window.
void write_dataset(const Dataset& d, const FeederTopology& topo,
                   const std::filesystem::path& path);

// Inverse of write_dataset. Validates the feeder hash against `topo`,
// re-derives normalization statistics, and returns a dataset whose write
// image is byte-identical to the input file.
Dataset read_dataset(const std::filesystem::path& path,
                     const FeederTopology& topo);

}  // namespace gpmu::feeder
