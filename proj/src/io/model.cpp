#include "gpmu/io/model.hpp"

#include <charconv>
#include <sstream>

#include "gpmu/errors.hpp"
#include "gpmu/io/text.hpp"

namespace gpmu::io {

namespace {
constexpr std::string_view kMagic = "GPMU-MODEL 1";

Index parse_dim(std::string_view text, const std::string& name) {
  long v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || v < 1) {
    throw ParseError("bad dimension '" + std::string(text) +
                     "' for parameter " + name);
  }
  return static_cast<Index>(v);
}
}  // namespace

const std::string& ModelFile::meta_value(const std::string& key) const {
  for (const auto& [k, v] : meta) {
    if (k == key) return v;
  }
  throw SchemaError("model metadata is missing key '" + key + "'");
}

bool ModelFile::has_meta(const std::string& key) const {
  for (const auto& [k, v] : meta) {
    if (k == key) return true;
  }
  return false;
}

void write_model(const ModelFile& m, const std::filesystem::path& path) {
  std::string out;
  out += kMagic;
  out += '\n';
  for (std::size_t i = 0; i < m.meta.size(); ++i) {
    if (i) out += ' ';
    out += m.meta[i].first + '=' + m.meta[i].second;
  }
  out += '\n';
  for (std::size_t i = 0; i < m.params.size(); ++i) {
    const Tensor& t = m.params.value(i);
    out += "PARAM " + m.params.name(i) + ' ' + std::to_string(t.rows()) +
           ' ' + std::to_string(t.cols()) + ' ' + encode_matrix(t) + '\n';
  }
  atomic_write_file(path, out);
}

ModelFile read_model(const std::filesystem::path& path) {
  std::string content = read_file(path);
  std::istringstream in(content);
  std::string line;
  if (!std::getline(in, line) || line != kMagic) {
    throw VersionError(path.string() + ": unsupported model version");
  }
  ModelFile m;
  if (!std::getline(in, line)) {
    throw SchemaError(path.string() + ": missing metadata line");
  }
  std::istringstream meta_in(line);
  std::string field;
  while (meta_in >> field) {
    std::size_t eq = field.find('=');
    if (eq == std::string::npos) {
      throw SchemaError(path.string() + ": metadata field '" + field +
                        "' is not key=value");
    }
    m.meta.emplace_back(field.substr(0, eq), field.substr(eq + 1));
  }
  int line_no = 2;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream rec(line);
    std::string tag, name, rows, cols, hex;
    if (!(rec >> tag >> name >> rows >> cols >> hex) || tag != "PARAM") {
      throw SchemaError(path.string() + ": line " + std::to_string(line_no) +
                        " is not a PARAM record");
    }
    std::string extra;
    if (rec >> extra) {
      throw SchemaError(path.string() + ": line " + std::to_string(line_no) +
                        " has trailing fields");
    }
    Index r = parse_dim(rows, name);
    Index c = parse_dim(cols, name);
    if (m.params.has(name)) {
      throw SchemaError(path.string() + ": duplicate parameter " + name);
    }
    m.params.add(name, decode_matrix(hex, r, c));
  }
  return m;
}

}  // namespace gpmu::io
