#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "gpmu/numerics/tensor.hpp"

namespace gpmu::io {

// 64-bit floats as 16 lowercase hex digits, little-endian byte order.
void append_hex_f64(std::string& out, double v);
double parse_hex_f64(std::string_view hex16);

// Whole matrix, row-major, concatenated hex (16 chars per entry).
std::string encode_matrix(const Tensor& m);
Tensor decode_matrix(std::string_view hex, Index rows, Index cols);

std::string read_file(const std::filesystem::path& path);

// Writes via a temporary in the same directory and renames into place, so a
// reader never observes a half-written artifact.
void atomic_write_file(const std::filesystem::path& path,
                       std::string_view content);

}  // namespace gpmu::io
