#include "gpmu/io/text.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <sstream>

#include "gpmu/errors.hpp"

namespace gpmu::io {

namespace {
constexpr char kDigits[] = "0123456789abcdef";

int nibble(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}
}  // namespace

void append_hex_f64(std::string& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  for (int byte = 0; byte < 8; ++byte) {
    auto b = static_cast<unsigned>((bits >> (8 * byte)) & 0xff);
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0xf]);
  }
}

double parse_hex_f64(std::string_view hex16) {
  if (hex16.size() != 16) {
    throw ParseError("hex float needs 16 digits, got " +
                     std::to_string(hex16.size()));
  }
  std::uint64_t bits = 0;
  for (int byte = 0; byte < 8; ++byte) {
    int hi = nibble(hex16[2 * byte]);
    int lo = nibble(hex16[2 * byte + 1]);
    if (hi < 0 || lo < 0) {
      throw ParseError("bad hex digit in float field");
    }
    bits |= static_cast<std::uint64_t>((hi << 4) | lo) << (8 * byte);
  }
  return std::bit_cast<double>(bits);
}

std::string encode_matrix(const Tensor& m) {
  std::string out;
  out.reserve(static_cast<std::size_t>(m.size()) * 16);
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      append_hex_f64(out, m(i, j));
    }
  }
  return out;
}

Tensor decode_matrix(std::string_view hex, Index rows, Index cols) {
  auto need = static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols) * 16;
  if (hex.size() != need) {
    throw ParseError("matrix block has " + std::to_string(hex.size()) +
                     " hex digits, expected " + std::to_string(need) + " for " +
                     shape_str(rows, cols));
  }
  Tensor m(rows, cols);
  std::size_t pos = 0;
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      m(i, j) = parse_hex_f64(hex.substr(pos, 16));
      pos += 16;
    }
  }
  return m;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw MissingArtifactError("cannot open " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void atomic_write_file(const std::filesystem::path& path,
                       std::string_view content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) {
    fs::create_directories(path.parent_path());
  }
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw Error("cannot write " + tmp.string());
    }
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      throw Error("short write to " + tmp.string());
    }
  }
  fs::rename(tmp, path);
}

}  // namespace gpmu::io
