#include "gpmu/feeder/topology.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <sstream>

#include "gpmu/errors.hpp"
#include "gpmu/io/text.hpp"
#include "gpmu/rng.hpp"

namespace gpmu::feeder {

namespace {

std::vector<std::string> tokens_of(const std::string& line) {
  std::istringstream ss(line);
  std::vector<std::string> toks;
  std::string t;
  while (ss >> t) toks.push_back(t);
  return toks;
}

double parse_double(const std::string& tok, int line_no, const char* what) {
  try {
    std::size_t used = 0;
    double v = std::stod(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw ParseError("line " + std::to_string(line_no) + ": bad " +
                     std::string(what) + " '" + tok + "'");
  }
}

}  // namespace

FeederTopology::FeederTopology(std::vector<std::string> bus_ids,
                               std::vector<Edge> edges,
                               std::vector<int> sensors,
                               std::vector<BusLoad> loads)
    : bus_ids_(std::move(bus_ids)),
      edges_(std::move(edges)),
      sensors_(std::move(sensors)),
      loads_(std::move(loads)) {
  const int n = n_buses();
  if (n == 0) throw ValidationError("feeder has no buses");
  {
    std::map<std::string, int> seen;
    for (int i = 0; i < n; ++i) {
      if (!seen.emplace(bus_ids_[static_cast<std::size_t>(i)], i).second) {
        throw ValidationError("duplicate bus id " +
                              bus_ids_[static_cast<std::size_t>(i)]);
      }
    }
  }
  if (loads_.size() != static_cast<std::size_t>(n)) {
    throw ValidationError("load table does not cover every bus");
  }
  if (static_cast<int>(edges_.size()) != n - 1) {
    throw ValidationError("feeder must be a tree: " + std::to_string(n) +
                          " buses need " + std::to_string(n - 1) +
                          " edges, got " + std::to_string(edges_.size()));
  }
  for (const Edge& e : edges_) {
    if (e.a < 0 || e.a >= n || e.b < 0 || e.b >= n || e.a == e.b) {
      throw ValidationError("edge endpoints out of range");
    }
    if (!(e.r > 0.0) || !(e.x > 0.0)) {
      throw ValidationError("edge " + bus_id(e.a) + "-" + bus_id(e.b) +
                            " must have positive impedance");
    }
  }
  if (sensors_.empty()) {
    throw ValidationError("sensor set must not be empty");
  }
  {
    std::vector<int> s = sensors_;
    std::sort(s.begin(), s.end());
    if (std::adjacent_find(s.begin(), s.end()) != s.end()) {
      throw ValidationError("duplicate sensor bus");
    }
    for (int b : s) {
      if (b < 0 || b >= n) throw ValidationError("sensor bus out of range");
    }
  }

  // Root the tree at bus 0 and verify connectivity (tree edge count plus a
  // full BFS reach means acyclic and connected).
  std::vector<std::vector<std::pair<int, int>>> adj(static_cast<std::size_t>(n));
  for (std::size_t k = 0; k < edges_.size(); ++k) {
    const Edge& e = edges_[k];
    adj[static_cast<std::size_t>(e.a)].emplace_back(e.b, static_cast<int>(k));
    adj[static_cast<std::size_t>(e.b)].emplace_back(e.a, static_cast<int>(k));
  }
  parents_.assign(static_cast<std::size_t>(n), -1);
  parent_edge_.assign(static_cast<std::size_t>(n), -1);
  children_.assign(static_cast<std::size_t>(n), {});
  bfs_order_.clear();
  std::vector<bool> seen(static_cast<std::size_t>(n), false);
  std::deque<int> queue{0};
  seen[0] = true;
  while (!queue.empty()) {
    int u = queue.front();
    queue.pop_front();
    bfs_order_.push_back(u);
    for (auto [v, ei] : adj[static_cast<std::size_t>(u)]) {
      if (seen[static_cast<std::size_t>(v)]) continue;
      seen[static_cast<std::size_t>(v)] = true;
      parents_[static_cast<std::size_t>(v)] = u;
      parent_edge_[static_cast<std::size_t>(v)] = ei;
      children_[static_cast<std::size_t>(u)].push_back(v);
      queue.push_back(v);
    }
  }
  if (static_cast<int>(bfs_order_.size()) != n) {
    throw ValidationError("feeder is not connected");
  }

  hops_.setConstant(n, n, -1);
  for (int s = 0; s < n; ++s) {
    std::deque<int> q{s};
    hops_(s, s) = 0;
    while (!q.empty()) {
      int u = q.front();
      q.pop_front();
      for (auto [v, ei] : adj[static_cast<std::size_t>(u)]) {
        if (hops_(s, v) >= 0) continue;
        hops_(s, v) = hops_(s, u) + 1;
        q.push_back(v);
      }
    }
  }
}

int FeederTopology::index_of(const std::string& label) const {
  for (int i = 0; i < n_buses(); ++i) {
    if (bus_ids_[static_cast<std::size_t>(i)] == label) return i;
  }
  throw ValidationError("unknown bus " + label);
}

bool FeederTopology::has_bus(const std::string& label) const {
  for (const auto& id : bus_ids_) {
    if (id == label) return true;
  }
  return false;
}

bool FeederTopology::is_sensor(int i) const {
  return std::find(sensors_.begin(), sensors_.end(), i) != sensors_.end();
}

const Edge& FeederTopology::parent_edge(int i) const {
  int ei = parent_edge_[static_cast<std::size_t>(i)];
  if (ei < 0) throw ContractError("bus " + bus_id(i) + " has no parent edge");
  return edges_[static_cast<std::size_t>(ei)];
}

Tensor FeederTopology::adjacency() const {
  Tensor a = Tensor::Zero(n_buses(), n_buses());
  for (const Edge& e : edges_) {
    a(e.a, e.b) = 1.0;
    a(e.b, e.a) = 1.0;
  }
  return a;
}

FeederTopology FeederTopology::with_sensors(
    const std::vector<std::string>& labels) const {
  std::vector<int> s;
  s.reserve(labels.size());
  for (const auto& l : labels) s.push_back(index_of(l));
  return FeederTopology(bus_ids_, edges_, std::move(s), loads_);
}

std::string FeederTopology::canonical_string() const {
  std::string out = "topo/v1\n";
  for (int i = 0; i < n_buses(); ++i) {
    out += bus_id(i);
    out += ' ';
  }
  out += '\n';
  std::vector<std::string> lines;
  for (const Edge& e : edges_) {
    int a = std::min(e.a, e.b), b = std::max(e.a, e.b);
    std::string line = std::to_string(a) + ">" + std::to_string(b) + ":";
    io::append_hex_f64(line, e.r);
    line += ":";
    io::append_hex_f64(line, e.x);
    lines.push_back(std::move(line));
  }
  std::sort(lines.begin(), lines.end());
  for (const auto& l : lines) {
    out += l;
    out += '\n';
  }
  out += "sensors";
  for (int s : sensors_) {
    out += ' ';
    out += std::to_string(s);
  }
  out += "\nloads\n";
  for (const BusLoad& l : loads_) {
    io::append_hex_f64(out, l.p);
    out += ':';
    io::append_hex_f64(out, l.q);
    out += '\n';
  }
  return out;
}

std::string FeederTopology::hash_hex() const {
  std::uint64_t h = rng::fnv1a(canonical_string());
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[h & 0xf];
    h >>= 4;
  }
  return out;
}

FeederTopology load_topology(const std::filesystem::path& path) {
  std::string text = io::read_file(path);
  std::istringstream in(text);
  std::string line;
  int line_no = 0;

  if (!std::getline(in, line)) {
    throw VersionError(path.string() + ": empty topology file");
  }
  ++line_no;
  if (line != "GPMU-TOPO 1") {
    throw VersionError(path.string() + ": expected 'GPMU-TOPO 1', got '" +
                       line + "'");
  }

  std::vector<std::string> bus_ids;
  std::map<std::string, int> bus_index;
  auto intern = [&](const std::string& label) {
    auto it = bus_index.find(label);
    if (it != bus_index.end()) return it->second;
    int idx = static_cast<int>(bus_ids.size());
    bus_ids.push_back(label);
    bus_index.emplace(label, idx);
    return idx;
  };

  std::vector<Edge> edges;
  std::vector<std::string> sensor_labels;
  std::map<std::string, BusLoad> load_by_label;
  bool saw_sensors = false;

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    auto toks = tokens_of(line);
    if (toks.empty()) continue;
    if (toks[0] == "SENSORS") {
      if (saw_sensors) {
        throw SchemaError("line " + std::to_string(line_no) +
                          ": repeated SENSORS line");
      }
      saw_sensors = true;
      if (toks.size() < 2) {
        throw SchemaError("line " + std::to_string(line_no) +
                          ": SENSORS line names no buses");
      }
      sensor_labels.assign(toks.begin() + 1, toks.end());
      continue;
    }
    if (toks[0] == "LOAD") {
      if (toks.size() != 4) {
        throw SchemaError("line " + std::to_string(line_no) +
                          ": LOAD needs 'LOAD bus P Q'");
      }
      if (!bus_index.count(toks[1])) {
        throw SchemaError("line " + std::to_string(line_no) +
                          ": LOAD names unknown bus " + toks[1]);
      }
      if (load_by_label.count(toks[1])) {
        throw SchemaError("line " + std::to_string(line_no) +
                          ": repeated LOAD for bus " + toks[1]);
      }
      load_by_label[toks[1]] = BusLoad{
          parse_double(toks[2], line_no, "load P"),
          parse_double(toks[3], line_no, "load Q"),
      };
      continue;
    }
    if (saw_sensors) {
      throw SchemaError("line " + std::to_string(line_no) +
                        ": edge lines must precede SENSORS");
    }
    if (toks.size() != 4) {
      throw SchemaError("line " + std::to_string(line_no) +
                        ": edge needs 'busA busB r x'");
    }
    Edge e;
    e.a = intern(toks[0]);
    e.b = intern(toks[1]);
    e.r = parse_double(toks[2], line_no, "resistance");
    e.x = parse_double(toks[3], line_no, "reactance");
    edges.push_back(e);
  }

  if (!saw_sensors) {
    throw SchemaError(path.string() + ": missing SENSORS line");
  }

  std::vector<int> sensors;
  sensors.reserve(sensor_labels.size());
  for (const auto& l : sensor_labels) {
    auto it = bus_index.find(l);
    if (it == bus_index.end()) {
      throw ValidationError("sensor bus " + l + " is not in the feeder");
    }
    sensors.push_back(it->second);
  }

  std::vector<BusLoad> loads(bus_ids.size());
  for (const auto& [label, l] : load_by_label) {
    loads[static_cast<std::size_t>(bus_index.at(label))] = l;
  }

  return FeederTopology(std::move(bus_ids), std::move(edges),
                        std::move(sensors), std::move(loads));
}

}  // namespace gpmu::feeder
