#include <cstdint>
#include <charconv>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gpmu/errors.hpp"
#include "gpmu/pipeline/config.hpp"
#include "gpmu/pipeline/pipeline.hpp"

namespace {

using gpmu::pipeline::RunConfig;
using gpmu::pipeline::Variant;

// Every subcommand takes the same override flags; values are funneled
// through the config-key grammar after --config (if any) is loaded, so a
// flag always wins over the file.
struct CommonFlags {
  std::string config;
  std::string seed;
  std::string out;
  std::string inputs;
  std::string topology;
  std::string variant;
  std::string sensors;
  std::string orders;
  std::string k;
};

void add_common(CLI::App* sub, CommonFlags& f, bool with_sensor_set) {
  sub->add_option("--config", f.config, "config file, `key = value` lines");
  sub->add_option("--seed", f.seed,
                  "run seed (required unless the config sets one)");
  sub->add_option("--out", f.out, "run directory for outputs");
  sub->add_option("--inputs", f.inputs,
                  "directory holding the dataset and encoder checkpoints "
                  "(outputs still land in --out)");
  sub->add_option("--topology", f.topology, "feeder topology file");
  sub->add_option("--variant", f.variant,
                  "ts-ng-nl | aed | aed-ng | aed-ng-rl | aed-g-nl | graphpmu");
  if (with_sensor_set) {
    sub->add_option("--sensors", f.sensors,
                    "comma list of bus labels overriding the topology's "
                    "sensor set");
  }
  sub->add_option("--orders", f.orders, "harmonic orders: 1 or 1,3,5");
  sub->add_option("--k", f.k, "mixture components");
}

RunConfig build_config(const CommonFlags& f) {
  RunConfig c;
  if (!f.config.empty()) c = gpmu::pipeline::parse_config_file(f.config);
  if (!f.topology.empty()) set_config_key(c, "topology", f.topology);
  if (!f.sensors.empty()) set_config_key(c, "sensors", f.sensors);
  if (!f.out.empty()) set_config_key(c, "out_dir", f.out);
  if (!f.inputs.empty()) set_config_key(c, "inputs_dir", f.inputs);
  if (!f.seed.empty()) set_config_key(c, "seed", f.seed);
  if (!f.variant.empty()) set_config_key(c, "variant", f.variant);
  if (!f.orders.empty()) set_config_key(c, "orders", f.orders);
  if (!f.k.empty()) set_config_key(c, "k", f.k);
  return c;
}

std::vector<std::string> split_tokens(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == ',' || ch == ' ' || ch == '\t') {
      if (!cur.empty()) {
        out.push_back(cur);
        cur.clear();
      }
    } else {
      cur += ch;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& s) {
  std::vector<std::uint64_t> out;
  for (const std::string& tok : split_tokens(s)) {
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size()) {
      throw gpmu::UsageError("--seeds: expected unsigned integers, got '" +
                             tok + "'");
    }
    out.push_back(v);
  }
  return out;
}

std::vector<int> parse_count_list(const std::string& s) {
  std::vector<int> out;
  for (const std::string& tok : split_tokens(s)) {
    int v = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size()) {
      throw gpmu::UsageError("--sensors: expected integer counts, got '" +
                             tok + "'");
    }
    out.push_back(v);
  }
  return out;
}

std::vector<Variant> parse_variant_list(const std::string& s) {
  if (s == "all") {
    return std::vector<Variant>(gpmu::pipeline::kAllVariants.begin(),
                                gpmu::pipeline::kAllVariants.end());
  }
  std::vector<Variant> out;
  for (const std::string& tok : split_tokens(s)) {
    out.push_back(gpmu::pipeline::variant_from_name(tok));
  }
  return out;
}

int run(int argc, char** argv) {
  CLI::App app{"PMU event clustering pipeline"};
  app.set_version_flag("--version", "gpmu 0.1.0");
  app.require_subcommand(1);

  CommonFlags gen_f, aed_f, gra_f, clu_f, abl_f, swp_f, prj_f;
  int order = 1;
  std::string variants_arg = "all";
  std::string abl_seeds_arg;
  std::string counts_arg = "2,4,8";
  std::string swp_seeds_arg;

  CLI::App* gen =
      app.add_subcommand("generate", "synthesize the event dataset");
  add_common(gen, gen_f, true);

  CLI::App* aed = app.add_subcommand(
      "train-aed", "train the window auto-encoder for one harmonic order");
  add_common(aed, aed_f, true);
  aed->add_option("--order", order, "harmonic order")
      ->required()
      ->check(CLI::IsMember({1, 3, 5}));

  CLI::App* gra = app.add_subcommand(
      "train-graph", "train the graph encoder on the variant's node features");
  add_common(gra, gra_f, true);

  CLI::App* clu = app.add_subcommand(
      "cluster", "fit the mixture model and score the test split");
  add_common(clu, clu_f, true);

  CLI::App* prj = app.add_subcommand(
      "project",
      "write 2-d principal-component coordinates of the test split");
  add_common(prj, prj_f, true);

  CLI::App* abl = app.add_subcommand(
      "ablate", "run variants across seeds and summarize median ari");
  add_common(abl, abl_f, true);
  abl->add_option("--variants", variants_arg,
                  "comma list of variants, or 'all'");
  abl->add_option("--seeds", abl_seeds_arg,
                  "comma list of run seeds (default: the configured seed)");

  CLI::App* swp = app.add_subcommand(
      "sweep", "sweep sensor-set sizes in both harmonic modes");
  add_common(swp, swp_f, false);
  swp->add_option("--sensors", counts_arg, "comma list of sensor counts");
  swp->add_option("--seeds", swp_seeds_arg,
                  "comma list of run seeds (default: the configured seed)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  if (app.got_subcommand(gen)) {
    gpmu::pipeline::cmd_generate(build_config(gen_f), std::cout);
  } else if (app.got_subcommand(aed)) {
    gpmu::pipeline::cmd_train_aed(build_config(aed_f), order, std::cout);
  } else if (app.got_subcommand(gra)) {
    gpmu::pipeline::cmd_train_graph(build_config(gra_f), std::cout);
  } else if (app.got_subcommand(clu)) {
    gpmu::pipeline::cmd_cluster(build_config(clu_f), std::cout);
  } else if (app.got_subcommand(prj)) {
    gpmu::pipeline::cmd_project(build_config(prj_f), std::cout);
  } else if (app.got_subcommand(abl)) {
    RunConfig c = build_config(abl_f);
    std::vector<std::uint64_t> seeds =
        abl_seeds_arg.empty() ? std::vector<std::uint64_t>{c.resolved_seed()}
                              : parse_seed_list(abl_seeds_arg);
    gpmu::pipeline::cmd_ablate(c, parse_variant_list(variants_arg), seeds,
                               std::cout);
  } else if (app.got_subcommand(swp)) {
    RunConfig c = build_config(swp_f);
    std::vector<std::uint64_t> seeds =
        swp_seeds_arg.empty() ? std::vector<std::uint64_t>{c.resolved_seed()}
                              : parse_seed_list(swp_seeds_arg);
    gpmu::pipeline::cmd_sweep_sensors(c, parse_count_list(counts_arg), seeds,
                                      std::cout);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const gpmu::MissingArtifactError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const gpmu::NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const gpmu::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 70;
  }
}
