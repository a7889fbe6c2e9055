#include "gpmu/feeder/dataset_io.hpp"

#include <charconv>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "gpmu/errors.hpp"
#include "gpmu/io/text.hpp"

namespace gpmu::feeder {

namespace {

constexpr std::string_view kMagic = "GPMU-DATA 1";

int parse_int(std::string_view text, const std::string& what) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ParseError("bad integer '" + std::string(text) + "' in " + what);
  }
  return v;
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && line[i] == ' ') ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string_view header_value(const std::vector<std::string_view>& fields,
                              std::string_view key) {
  for (std::string_view f : fields) {
    std::size_t eq = f.find('=');
    if (eq != std::string_view::npos && f.substr(0, eq) == key) {
      return f.substr(eq + 1);
    }
  }
  throw SchemaError("dataset header is missing key '" + std::string(key) +
                    "'");
}

std::vector<std::string> split_commas(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i <= text.size()) {
    std::size_t j = text.find(',', i);
    if (j == std::string_view::npos) j = text.size();
    out.emplace_back(text.substr(i, j - i));
    i = j + 1;
  }
  return out;
}

}  // namespace

void write_dataset(const Dataset& d, const FeederTopology& topo,
                   const std::filesystem::path& path) {
  if (d.feeder_hash() != topo.hash_hex()) {
    throw ValidationError("dataset feeder hash " + d.feeder_hash() +
                          " does not match topology hash " + topo.hash_hex());
  }
  std::string out;
  // 16 hex chars per float plus per-line framing, reserved up front so the
  // desk-scale dataset does not reallocate a multi-hundred-MB buffer.
  out.reserve(static_cast<std::size_t>(d.n_records()) *
                  d.sensor_labels().size() * 3 *
                  (static_cast<std::size_t>(d.window_len()) * kChannels * 16 +
                   32) +
              4096);
  out += kMagic;
  out += '\n';
  out += "feeder=" + d.feeder_hash();
  out += " T=" + std::to_string(d.window_len());
  out += " C=" + std::to_string(kChannels);
  out += " orders=";
  for (std::size_t h = 0; h < kHarmonicOrders.size(); ++h) {
    if (h) out += ',';
    out += std::to_string(kHarmonicOrders[h]);
  }
  out += " sensors=";
  for (std::size_t s = 0; s < d.sensor_labels().size(); ++s) {
    if (s) out += ',';
    out += d.sensor_labels()[s];
  }
  out += " records=" + std::to_string(d.n_records());
  out += '\n';

  for (const EventRecord& r : d.records()) {
    out += "E " + std::to_string(r.event_id) + ' ' + std::to_string(r.klass) +
           ' ' + topo.bus_id(r.location) + ' ' + split_name(r.split);
    for (std::size_t s = 0; s < d.sensor_labels().size(); ++s) {
      for (std::size_t h = 0; h < kHarmonicOrders.size(); ++h) {
        out += ' ';
        out += d.sensor_labels()[s];
        out += ':';
        out += std::to_string(kHarmonicOrders[h]);
        out += ':';
        out += io::encode_matrix(r.windows[s][h]);
      }
    }
    out += '\n';
  }
  io::atomic_write_file(path, out);
}

Dataset read_dataset(const std::filesystem::path& path,
                     const FeederTopology& topo) {
  std::string content = io::read_file(path);
  std::istringstream in(content);
  std::string line;

  if (!std::getline(in, line) || line != kMagic) {
    throw VersionError("unsupported dataset version (expected '" +
                       std::string(kMagic) + "')");
  }
  if (!std::getline(in, line)) throw SchemaError("dataset header missing");
  auto fields = split_ws(line);
  std::string feeder(header_value(fields, "feeder"));
  if (feeder != topo.hash_hex()) {
    throw ValidationError("dataset was generated for feeder " + feeder +
                          ", topology hash is " + topo.hash_hex());
  }
  int T = parse_int(header_value(fields, "T"), "header T");
  int C = parse_int(header_value(fields, "C"), "header C");
  if (C != kChannels) {
    throw SchemaError("dataset declares " + std::to_string(C) +
                      " channels, this build handles " +
                      std::to_string(kChannels));
  }
  std::string orders(header_value(fields, "orders"));
  {
    std::string want;
    for (std::size_t h = 0; h < kHarmonicOrders.size(); ++h) {
      if (h) want += ',';
      want += std::to_string(kHarmonicOrders[h]);
    }
    if (orders != want) {
      throw SchemaError("dataset harmonic orders '" + orders +
                        "', this build handles '" + want + "'");
    }
  }
  std::vector<std::string> sensor_labels =
      split_commas(header_value(fields, "sensors"));
  std::vector<int> sensor_buses;
  for (const std::string& lab : sensor_labels) {
    sensor_buses.push_back(topo.index_of(lab));
  }
  int n_records = parse_int(header_value(fields, "records"), "header records");

  std::vector<EventRecord> records;
  records.reserve(static_cast<std::size_t>(n_records));
  int line_no = 2;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto tok = split_ws(line);
    if (tok.empty()) continue;
    if (tok[0] != "E") {
      throw SchemaError("line " + std::to_string(line_no) +
                        ": expected a record line starting with 'E'");
    }
    std::size_t expected =
        5 + sensor_labels.size() * kHarmonicOrders.size();
    if (tok.size() != expected) {
      std::string id = tok.size() > 1 ? std::string(tok[1]) : "?";
      throw SchemaError("event " + id + ": " +
                        std::to_string(tok.size() - 5) +
                        " window blocks, expected " +
                        std::to_string(expected - 5));
    }
    EventRecord r;
    r.event_id = parse_int(tok[1], "line " + std::to_string(line_no));
    r.klass = parse_int(tok[2], "line " + std::to_string(line_no));
    r.location = topo.index_of(std::string(tok[3]));
    r.split = split_from_name(std::string(tok[4]));
    std::string ev = "event " + std::to_string(r.event_id);
    r.windows.resize(sensor_labels.size());
    std::size_t t = 5;
    for (std::size_t s = 0; s < sensor_labels.size(); ++s) {
      for (std::size_t h = 0; h < kHarmonicOrders.size(); ++h, ++t) {
        std::string_view block = tok[t];
        std::size_t c1 = block.find(':');
        std::size_t c2 = c1 == std::string_view::npos
                             ? std::string_view::npos
                             : block.find(':', c1 + 1);
        if (c2 == std::string_view::npos) {
          throw SchemaError(ev + ": malformed window block");
        }
        std::string want = sensor_labels[s] + ':' +
                           std::to_string(kHarmonicOrders[h]);
        if (block.substr(0, c2) != want) {
          throw SchemaError(ev + ": window block '" +
                            std::string(block.substr(0, c2)) +
                            "' out of order, expected '" + want + "'");
        }
        r.windows[s][h] = io::decode_matrix(block.substr(c2 + 1), T, C);
      }
    }
    records.push_back(std::move(r));
  }
  if (static_cast<int>(records.size()) != n_records) {
    throw SchemaError("dataset declares " + std::to_string(n_records) +
                      " records, found " + std::to_string(records.size()));
  }
  return Dataset(feeder, T, std::move(sensor_buses), std::move(sensor_labels),
                 std::move(records));
}

}  // namespace gpmu::feeder
