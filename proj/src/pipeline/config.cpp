#include "gpmu/pipeline/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "gpmu/errors.hpp"
#include "gpmu/feeder/events.hpp"
#include "gpmu/io/text.hpp"

namespace gpmu::pipeline {

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::kTsNgNl:
      return "ts-ng-nl";
    case Variant::kAed:
      return "aed";
    case Variant::kAedNg:
      return "aed-ng";
    case Variant::kAedNgRl:
      return "aed-ng-rl";
    case Variant::kAedGNl:
      return "aed-g-nl";
    case Variant::kGraphpmu:
      return "graphpmu";
  }
  throw ContractError("invalid variant value");
}

Variant variant_from_name(const std::string& name) {
  for (Variant v : kAllVariants) {
    if (name == variant_name(v)) return v;
  }
  throw UsageError("unknown variant '" + name +
                   "' (one of ts-ng-nl, aed, aed-ng, aed-ng-rl, aed-g-nl, "
                   "graphpmu)");
}

std::uint64_t RunConfig::resolved_seed() const {
  if (!seed) {
    throw UsageError("no seed was given: set the seed key or pass --seed");
  }
  return *seed;
}

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : value) {
    if (ch == ',' || ch == ' ' || ch == '\t') {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const char* wanted) {
  throw UsageError("config key '" + key + "': expected " + wanted + ", got '" +
                   value + "'");
}

long long parse_ll(const std::string& key, const std::string& value) {
  long long v = 0;
  const char* first = value.data();
  const char* last = first + value.size();
  auto [p, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || p != last) bad_value(key, value, "an integer");
  return v;
}

int parse_int(const std::string& key, const std::string& value) {
  long long v = parse_ll(key, value);
  if (v < -2147483648LL || v > 2147483647LL) {
    bad_value(key, value, "an integer in int range");
  }
  return static_cast<int>(v);
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  std::uint64_t v = 0;
  const char* first = value.data();
  const char* last = first + value.size();
  auto [p, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || p != last) {
    bad_value(key, value, "an unsigned integer");
  }
  return v;
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    double v = std::stod(value, &used);
    if (used != value.size() || !std::isfinite(v)) {
      bad_value(key, value, "a finite number");
    }
    return v;
  } catch (const UsageError&) {
    throw;
  } catch (const std::exception&) {
    bad_value(key, value, "a finite number");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true") return true;
  if (value == "false") return false;
  bad_value(key, value, "true or false");
}

// aed_* applies to every order; aed1_/aed3_/aed5_ to one of them
bool apply_aed_key(RunConfig& c, const std::string& key,
                   const std::string& value) {
  if (key.rfind("aed", 0) != 0) return false;
  std::vector<int> targets;
  std::string suffix;
  if (key.rfind("aed_", 0) == 0) {
    targets = {1, 3, 5};
    suffix = key.substr(4);
  } else if (key.size() > 5 && key[4] == '_' &&
             (key[3] == '1' || key[3] == '3' || key[3] == '5')) {
    targets = {key[3] - '0'};
    suffix = key.substr(5);
  } else {
    return false;
  }
  for (int order : targets) {
    temporal::TrainAedConfig& t = c.aed.at(order);
    if (suffix == "epochs") {
      t.epochs = parse_int(key, value);
    } else if (suffix == "batch") {
      t.batch = parse_int(key, value);
    } else if (suffix == "lr") {
      t.lr = parse_double(key, value);
    } else if (suffix == "patience") {
      t.patience = parse_int(key, value);
    } else if (suffix == "units1") {
      t.arch.units1 = parse_int(key, value);
    } else if (suffix == "units2") {
      t.arch.units2 = parse_int(key, value);
    } else if (suffix == "embed") {
      t.arch.embed = parse_int(key, value);
    } else if (suffix == "leak") {
      t.arch.leak = parse_double(key, value);
    } else {
      return false;
    }
  }
  return true;
}

bool apply_graph_key(RunConfig& c, const std::string& key,
                     const std::string& value) {
  graphenc::TrainGraphConfig& g = c.graph;
  if (key == "graph_epochs") {
    g.epochs = parse_int(key, value);
  } else if (key == "graph_batch") {
    g.batch = parse_int(key, value);
  } else if (key == "graph_lr") {
    g.lr = parse_double(key, value);
  } else if (key == "graph_patience") {
    g.patience = parse_int(key, value);
  } else if (key == "graph_fresh_negatives") {
    g.fresh_negatives = parse_bool(key, value);
  } else if (key == "graph_hidden1") {
    g.arch.hidden1 = parse_int(key, value);
  } else if (key == "graph_hidden2") {
    g.arch.hidden2 = parse_int(key, value);
  } else if (key == "graph_disc_hidden") {
    g.arch.disc_hidden = parse_int(key, value);
  } else if (key == "graph_leak") {
    g.arch.leak = parse_double(key, value);
  } else if (key == "graph_fusion") {
    try {
      g.arch.fusion = graphenc::fusion_from_name(value);
    } catch (const ParseError&) {
      bad_value(key, value, "product or bilinear");
    }
  } else {
    return false;
  }
  return true;
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string join(const std::vector<std::string>& parts, char sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out.push_back(sep);
    out += parts[i];
  }
  return out;
}

void check_positive(const char* key, int v) {
  if (v < 1) {
    throw UsageError(std::string("config key '") + key +
                     "' must be at least 1, got " + std::to_string(v));
  }
}

void check_unit_interval(const char* key, double v) {
  if (!(v > 0.0) || !(v < 1.0)) {
    throw UsageError(std::string("config key '") + key +
                     "' must lie strictly between 0 and 1, got " +
                     fmt_double(v));
  }
}

void check_nonneg(const char* key, double v) {
  if (!(v >= 0.0)) {
    throw UsageError(std::string("config key '") + key +
                     "' must not be negative, got " + fmt_double(v));
  }
}

}  // namespace

void set_config_key(RunConfig& c, const std::string& key,
                    const std::string& value) {
  if (key == "topology") {
    c.topology = value;
  } else if (key == "sensors") {
    c.sensor_buses = split_list(value);
  } else if (key == "out_dir") {
    if (value.empty()) bad_value(key, value, "a directory");
    c.out_dir = value;
  } else if (key == "inputs_dir") {
    if (value.empty()) {
      c.inputs_dir.reset();
    } else {
      c.inputs_dir = value;
    }
  } else if (key == "seed") {
    c.seed = parse_u64(key, value);
  } else if (key == "variant") {
    c.variant = variant_from_name(value);
  } else if (key == "k") {
    c.k = parse_int(key, value);
  } else if (key == "orders") {
    std::vector<std::string> parts = split_list(value);
    if (parts == std::vector<std::string>{"1"}) {
      c.orders = {1};
    } else if (parts == std::vector<std::string>{"1", "3", "5"}) {
      c.orders = {1, 3, 5};
    } else {
      bad_value(key, value, "1 or 1,3,5");
    }
  } else if (key == "train_per_class") {
    c.train_per_class = parse_int(key, value);
  } else if (key == "eval_per_class") {
    c.eval_per_class = parse_int(key, value);
  } else if (key == "test_per_class") {
    c.test_per_class = parse_int(key, value);
  } else if (key == "window_len") {
    c.window_len = parse_int(key, value);
  } else if (key == "channels") {
    c.channels = parse_int(key, value);
  } else if (key == "shift_range") {
    c.shift_range = parse_int(key, value);
  } else if (key == "aug_sigma") {
    c.aug_sigma = parse_double(key, value);
  } else if (key == "noise_fund") {
    c.noise_fund = parse_double(key, value);
  } else if (key == "noise_harm") {
    c.noise_harm = parse_double(key, value);
  } else if (key == "atten_lambda") {
    c.atten_lambda = parse_double(key, value);
  } else if (key == "random_load") {
    c.random_load = parse_bool(key, value);
  } else if (apply_aed_key(c, key, value)) {
    // handled
  } else if (apply_graph_key(c, key, value)) {
    // handled
  } else {
    throw UsageError("unknown config key '" + key + "'");
  }
}

RunConfig parse_config_text(const std::string& text) {
  RunConfig c;
  std::istringstream in(text);
  std::string line;
  std::set<std::string> seen;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    std::size_t eq = s.find('=');
    if (eq == std::string::npos) {
      throw UsageError("config line " + std::to_string(line_no) +
                       ": expected `key = value`, got '" + s + "'");
    }
    std::string key = trim(s.substr(0, eq));
    std::string value = trim(s.substr(eq + 1));
    if (key.empty()) {
      throw UsageError("config line " + std::to_string(line_no) +
                       ": empty key");
    }
    if (!seen.insert(key).second) {
      throw UsageError("duplicate config key '" + key + "'");
    }
    set_config_key(c, key, value);
  }
  return c;
}

RunConfig parse_config_file(const std::filesystem::path& path) {
  return parse_config_text(io::read_file(path));
}

namespace {

void render_aed_group(std::vector<std::string>& out, const std::string& prefix,
                      const temporal::TrainAedConfig& t) {
  out.push_back(prefix + "units1 = " + std::to_string(t.arch.units1));
  out.push_back(prefix + "units2 = " + std::to_string(t.arch.units2));
  out.push_back(prefix + "embed = " + std::to_string(t.arch.embed));
  out.push_back(prefix + "leak = " + fmt_double(t.arch.leak));
  out.push_back(prefix + "epochs = " + std::to_string(t.epochs));
  out.push_back(prefix + "batch = " + std::to_string(t.batch));
  out.push_back(prefix + "lr = " + fmt_double(t.lr));
  out.push_back(prefix + "patience = " + std::to_string(t.patience));
}

bool same_aed_settings(const temporal::TrainAedConfig& a,
                       const temporal::TrainAedConfig& b) {
  return a.epochs == b.epochs && a.batch == b.batch && a.lr == b.lr &&
         a.patience == b.patience && a.arch.units1 == b.arch.units1 &&
         a.arch.units2 == b.arch.units2 && a.arch.embed == b.arch.embed &&
         a.arch.leak == b.arch.leak;
}

}  // namespace

std::vector<std::string> render_config(const RunConfig& c) {
  std::vector<std::string> out;
  out.push_back("topology = " + c.topology.string());
  out.push_back("sensors = " + join(c.sensor_buses, ' '));
  out.push_back("out_dir = " + c.out_dir.string());
  if (c.inputs_dir) out.push_back("inputs_dir = " + c.inputs_dir->string());
  if (c.seed) out.push_back("seed = " + std::to_string(*c.seed));
  out.push_back(std::string("variant = ") + variant_name(c.variant));
  out.push_back("k = " + std::to_string(c.k));
  out.push_back(std::string("orders = ") + (c.harmonics() ? "1,3,5" : "1"));
  out.push_back("train_per_class = " + std::to_string(c.train_per_class));
  out.push_back("eval_per_class = " + std::to_string(c.eval_per_class));
  out.push_back("test_per_class = " + std::to_string(c.test_per_class));
  out.push_back("window_len = " + std::to_string(c.window_len));
  out.push_back("channels = " + std::to_string(c.channels));
  out.push_back("shift_range = " + std::to_string(c.shift_range));
  out.push_back("aug_sigma = " + fmt_double(c.aug_sigma));
  out.push_back("noise_fund = " + fmt_double(c.noise_fund));
  out.push_back("noise_harm = " + fmt_double(c.noise_harm));
  out.push_back("atten_lambda = " + fmt_double(c.atten_lambda));
  out.push_back(std::string("random_load = ") +
                (c.random_load ? "true" : "false"));
  if (same_aed_settings(c.aed.at(1), c.aed.at(3)) &&
      same_aed_settings(c.aed.at(1), c.aed.at(5))) {
    render_aed_group(out, "aed_", c.aed.at(1));
  } else {
    render_aed_group(out, "aed1_", c.aed.at(1));
    render_aed_group(out, "aed3_", c.aed.at(3));
    render_aed_group(out, "aed5_", c.aed.at(5));
  }
  out.push_back("graph_hidden1 = " + std::to_string(c.graph.arch.hidden1));
  out.push_back("graph_hidden2 = " + std::to_string(c.graph.arch.hidden2));
  out.push_back("graph_disc_hidden = " +
                std::to_string(c.graph.arch.disc_hidden));
  out.push_back("graph_leak = " + fmt_double(c.graph.arch.leak));
  out.push_back(std::string("graph_fusion = ") +
                graphenc::fusion_name(c.graph.arch.fusion));
  out.push_back("graph_epochs = " + std::to_string(c.graph.epochs));
  out.push_back("graph_batch = " + std::to_string(c.graph.batch));
  out.push_back("graph_lr = " + fmt_double(c.graph.lr));
  out.push_back("graph_patience = " + std::to_string(c.graph.patience));
  out.push_back(std::string("graph_fresh_negatives = ") +
                (c.graph.fresh_negatives ? "true" : "false"));
  return out;
}

void validate_config(const RunConfig& c) {
  if (c.topology.empty()) {
    throw UsageError("config key 'topology' must name the feeder file");
  }
  c.resolved_seed();
  if (c.channels != feeder::kChannels) {
    throw UsageError("config key 'channels' is fixed at " +
                     std::to_string(feeder::kChannels) +
                     " (|V|, |I|, PF per phase), got " +
                     std::to_string(c.channels));
  }
  check_positive("train_per_class", c.train_per_class);
  check_positive("eval_per_class", c.eval_per_class);
  check_positive("test_per_class", c.test_per_class);
  check_positive("k", c.k);
  if (c.window_len < 2) {
    throw UsageError("config key 'window_len' must be at least 2, got " +
                     std::to_string(c.window_len));
  }
  if (c.shift_range < 0 || c.shift_range >= c.window_len) {
    throw UsageError(
        "config key 'shift_range' must lie in [0, window_len), got " +
        std::to_string(c.shift_range));
  }
  check_nonneg("aug_sigma", c.aug_sigma);
  check_nonneg("noise_fund", c.noise_fund);
  check_nonneg("noise_harm", c.noise_harm);
  check_nonneg("atten_lambda", c.atten_lambda);
  for (int order : {1, 3, 5}) {
    const temporal::TrainAedConfig& t = c.aed.at(order);
    std::string p = "aed" + std::to_string(order) + "_";
    check_positive((p + "epochs").c_str(), t.epochs);
    check_positive((p + "batch").c_str(), t.batch);
    check_positive((p + "patience").c_str(), t.patience);
    check_positive((p + "units1").c_str(), t.arch.units1);
    check_positive((p + "units2").c_str(), t.arch.units2);
    check_positive((p + "embed").c_str(), t.arch.embed);
    if (!(t.lr > 0.0)) {
      throw UsageError("config key '" + p + "lr' must be positive");
    }
    check_unit_interval((p + "leak").c_str(), t.arch.leak);
  }
  check_positive("graph_epochs", c.graph.epochs);
  check_positive("graph_batch", c.graph.batch);
  check_positive("graph_patience", c.graph.patience);
  check_positive("graph_hidden1", c.graph.arch.hidden1);
  check_positive("graph_hidden2", c.graph.arch.hidden2);
  check_positive("graph_disc_hidden", c.graph.arch.disc_hidden);
  if (!(c.graph.lr > 0.0)) {
    throw UsageError("config key 'graph_lr' must be positive");
  }
  check_unit_interval("graph_leak", c.graph.arch.leak);
  if (c.variant == Variant::kAedNgRl && !c.random_load) {
    throw UsageError(
        "variant aed-ng-rl re-derives per-event load draws, so the dataset "
        "must be generated and read with random_load = true");
  }
  if (c.variant == Variant::kAedGNl &&
      c.graph.arch.fusion == graphenc::DiscFusion::kBilinear) {
    throw UsageError(
        "graph_fusion = bilinear scores pairs only and cannot drive the "
        "graph-only variant aed-g-nl");
  }
}

}  // namespace gpmu::pipeline
