// xbt: train networks under crossbar hardware constraints, map them onto NVM
// tiles, and estimate deployment energy/area. Links only the C API.
#include <cstdio>
#include <string>

#include "CLI11.hpp"
#include "xbartrain.h"

namespace {

constexpr int kExitConfig = 2;      // configuration / argument problems
constexpr int kExitInvariant = 3;   // map exactness check failed

struct ConfigHandle {
  xbt_config* cfg = nullptr;
  ~ConfigHandle() { xbt_config_free(cfg); }
};

int load_config(const std::string& path, const std::string& inline_json, ConfigHandle& out) {
  int rc;
  if (!inline_json.empty()) {
    rc = xbt_config_from_json(inline_json.c_str(), &out.cfg);
  } else if (!path.empty()) {
    rc = xbt_config_from_file(path.c_str(), &out.cfg);
  } else {
    rc = xbt_config_from_json("{}", &out.cfg);
  }
  if (rc != XBT_OK) {
    std::fprintf(stderr, "config error: %s\n", xbt_last_error());
    return kExitConfig;
  }
  return 0;
}

void print_summary(char* summary) {
  if (!summary) return;
  std::printf("%s\n", summary);
  xbt_string_free(summary);
}

int finish(int rc) {
  if (rc == XBT_OK) return 0;
  std::fprintf(stderr, "error: %s\n", xbt_last_error());
  if (rc == XBT_E_DEPLOYMENT || rc == XBT_E_MAPPING) return kExitInvariant;
  return kExitConfig;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"crossbar-aware quantized training and NVM deployment cost estimation"};
  app.require_subcommand(1);

  std::string config_path, config_json;
  app.add_option("-c,--config", config_path, "experiment config file (JSON)");
  app.add_option("--config-json", config_json, "inline config JSON (overrides --config)");

  std::string model_path;
  std::string estimate_source;
  std::string fractions = "0,0.25,0.5,0.75,1.0";
  bool show_version = false;
  app.add_flag("--version", show_version, "print library version and exit");

  CLI::App* cmd_train = app.add_subcommand("train", "train a network per the config");
  CLI::App* cmd_map = app.add_subcommand("map", "map a trained network onto crossbar tiles");
  cmd_map->add_option("--model", model_path, "trained model file (default <output_dir>/model.json)");
  CLI::App* cmd_estimate =
      app.add_subcommand("estimate", "energy/area cost report for a deployment");
  cmd_estimate->add_option("--model", estimate_source,
                           "trained model file, or preset:<row> for published rows");
  CLI::App* cmd_sweep = app.add_subcommand("sweep", "unipolar channel fraction study");
  cmd_sweep->add_option("--fractions", fractions, "comma-separated fractions in [0,1]");
  CLI::App* cmd_report = app.add_subcommand("report", "aggregate run outputs into one report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  if (show_version) {
    std::printf("xbartrain %s\n", xbt_version());
    return 0;
  }

  ConfigHandle cfg;
  if (int rc = load_config(config_path, config_json, cfg)) return rc;

  char* summary = nullptr;
  int rc = XBT_OK;
  if (cmd_train->parsed()) {
    rc = xbt_run_train(cfg.cfg, &summary);
  } else if (cmd_map->parsed()) {
    rc = xbt_run_map(cfg.cfg, model_path.empty() ? nullptr : model_path.c_str(), &summary);
  } else if (cmd_estimate->parsed()) {
    rc = xbt_run_estimate(cfg.cfg, estimate_source.empty() ? nullptr : estimate_source.c_str(),
                          &summary);
  } else if (cmd_sweep->parsed()) {
    rc = xbt_run_sweep(cfg.cfg, fractions.c_str(), &summary);
  } else if (cmd_report->parsed()) {
    rc = xbt_run_report(cfg.cfg, &summary);
  }
  print_summary(summary);
  return finish(rc);
}
