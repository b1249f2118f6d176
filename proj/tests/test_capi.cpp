// Exercises the shared-library C API the way an external consumer would.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstring>
#include <filesystem>
#include <string>

#include "doctest.h"
#include "xbartrain.h"

namespace fs = std::filesystem;

namespace {

struct Temp {
  fs::path dir;
  Temp() {
    dir = fs::temp_directory_path() / ("xbt_capi_" + std::to_string(::getpid()));
    fs::create_directories(dir);
  }
  ~Temp() { fs::remove_all(dir); }
};

std::string take(char* s) {
  REQUIRE(s != nullptr);
  std::string out(s);
  xbt_string_free(s);
  return out;
}

}  // namespace

TEST_CASE("version and error strings") {
  CHECK(std::strlen(xbt_version()) > 0);
  xbt_config* cfg = nullptr;
  CHECK(xbt_config_from_json("{\"bogus\": 1}", &cfg) == XBT_E_FORMAT);
  CHECK(std::string(xbt_last_error()).find("bogus") != std::string::npos);
  CHECK(cfg == nullptr);
  CHECK(xbt_config_from_json(nullptr, &cfg) == XBT_E_ARGUMENT);
}

TEST_CASE("config handles: parse and hash") {
  xbt_config* cfg = nullptr;
  REQUIRE(xbt_config_from_json("{\"seed\": 7}", &cfg) == XBT_OK);
  unsigned long long h1 = 0, h2 = 0;
  CHECK(xbt_config_hash(cfg, &h1) == XBT_OK);
  xbt_config* cfg2 = nullptr;
  REQUIRE(xbt_config_from_json("{\"seed\": 7}", &cfg2) == XBT_OK);
  CHECK(xbt_config_hash(cfg2, &h2) == XBT_OK);
  CHECK(h1 == h2);
  xbt_config_free(cfg);
  xbt_config_free(cfg2);
}

TEST_CASE("network handles: build, save, load, inspect") {
  Temp tmp;
  xbt_network* net = nullptr;
  REQUIRE(xbt_network_reference("har", 1, &net) == XBT_OK);
  long long params = 0;
  CHECK(xbt_network_param_count(net, &params) == XBT_OK);
  CHECK(params == 132397);

  const std::string path = (tmp.dir / "model.json").string();
  CHECK(xbt_network_save(net, path.c_str()) == XBT_OK);
  xbt_network* back = nullptr;
  REQUIRE(xbt_network_load(path.c_str(), &back) == XBT_OK);
  long long params2 = 0;
  CHECK(xbt_network_param_count(back, &params2) == XBT_OK);
  CHECK(params2 == params);
  char* js = nullptr;
  CHECK(xbt_network_to_json(back, &js) == XBT_OK);
  CHECK(take(js).find("xbt-network-v1") != std::string::npos);
  xbt_network_free(net);
  xbt_network_free(back);

  xbt_network* bad = nullptr;
  CHECK(xbt_network_reference("mnist", 1, &bad) == XBT_E_ARGUMENT);
}

TEST_CASE("train, map, verify and estimate through the C API") {
  Temp tmp;
  const std::string cfg_json = R"({
    "network": {"kind": "har_like", "hidden": 10},
    "train": {"steps": 25, "batch_size": 16, "log_every": 10},
    "tile": {"rows": 64, "cols": 64},
    "dataset": {"kind": "synth_har", "n": 96, "noise": 0.05},
    "seed": 5
  })";
  xbt_config* cfg = nullptr;
  REQUIRE(xbt_config_from_json(cfg_json.c_str(), &cfg) == XBT_OK);

  xbt_network* net = nullptr;
  REQUIRE(xbt_network_from_config(cfg, &net) == XBT_OK);
  xbt_dataset* ds = nullptr;
  REQUIRE(xbt_dataset_synth_har(5, 96, 12, 0.05, &ds) == XBT_OK);
  int n = 0;
  CHECK(xbt_dataset_size(ds, &n) == XBT_OK);
  CHECK(n == 96);

  char* csv = nullptr;
  REQUIRE(xbt_train(net, ds, cfg, &csv) == XBT_OK);
  CHECK(take(csv).rfind("step,", 0) == 0);
  double acc = 0.0;
  CHECK(xbt_network_accuracy(net, ds, 1, &acc) == XBT_OK);
  CHECK(acc >= 0.0);

  xbt_deployment* dep = nullptr;
  REQUIRE(xbt_map(net, cfg, &dep) == XBT_OK);
  long long mism = -1;
  CHECK(xbt_deployment_verify(dep, &mism) == XBT_OK);
  CHECK(mism == 0);
  long long xbars = 0;
  CHECK(xbt_deployment_crossbars(dep, &xbars) == XBT_OK);
  CHECK(xbars > 0);
  int reconf = 0;
  CHECK(xbt_deployment_reconfigurable(dep, &reconf) == XBT_OK);
  CHECK(reconf == 1);
  char* manifest = nullptr;
  CHECK(xbt_deployment_manifest(dep, &manifest) == XBT_OK);
  CHECK(take(manifest).find("xbt-deployment-v1") != std::string::npos);

  xbt_report* rep = nullptr;
  REQUIRE(xbt_estimate(dep, nullptr, &rep) == XBT_OK);
  double area = 0.0;
  CHECK(xbt_report_total_area_mm2(rep, &area) == XBT_OK);
  CHECK(area > 0.0);
  double e10 = 0.0;
  CHECK(xbt_report_total_energy_j(rep, 10, &e10) == XBT_OK);
  CHECK(e10 > 0.0);
  CHECK(xbt_report_total_energy_j(rep, 50, &e10) == XBT_E_ARGUMENT);

  xbt_report_free(rep);
  xbt_deployment_free(dep);
  xbt_dataset_free(ds);
  xbt_network_free(net);
  xbt_config_free(cfg);
}

TEST_CASE("preset estimates reproduce the published HAR proposed area") {
  xbt_report* rep = nullptr;
  REQUIRE(xbt_estimate_preset("har-ours-4b", nullptr, &rep) == XBT_OK);
  double area = 0.0;
  CHECK(xbt_report_total_area_mm2(rep, &area) == XBT_OK);
  CHECK(area > 0.27);
  CHECK(area < 0.29);
  char* txt = nullptr;
  CHECK(xbt_report_text(rep, &txt) == XBT_OK);
  CHECK(take(txt).find("reconfigurable: yes") != std::string::npos);
  xbt_report_free(rep);
  CHECK(xbt_estimate_preset("nope", nullptr, &rep) == XBT_E_ARGUMENT);
}

TEST_CASE("pipeline runs through the C API") {
  Temp tmp;
  const std::string cfg_json = std::string(R"({
    "network": {"kind": "har_like", "hidden": 8},
    "train": {"steps": 12, "batch_size": 12, "log_every": 0},
    "tile": {"rows": 64, "cols": 64},
    "dataset": {"kind": "synth_har", "n": 60, "noise": 0.05},
    "output_dir": ")") + tmp.dir.string() + "\"}";
  xbt_config* cfg = nullptr;
  REQUIRE(xbt_config_from_json(cfg_json.c_str(), &cfg) == XBT_OK);
  char* summary = nullptr;
  REQUIRE(xbt_run_train(cfg, &summary) == XBT_OK);
  CHECK(take(summary).find("final_val_acc") != std::string::npos);
  REQUIRE(xbt_run_map(cfg, nullptr, &summary) == XBT_OK);
  CHECK(take(summary).find("\"exactness_check\": \"PASS\"") != std::string::npos);
  REQUIRE(xbt_run_estimate(cfg, nullptr, &summary) == XBT_OK);
  CHECK(take(summary).find("total_area_mm2") != std::string::npos);
  REQUIRE(xbt_run_sweep(cfg, "0,1", &summary) == XBT_OK);
  CHECK(take(summary).find("rows") != std::string::npos);
  REQUIRE(xbt_run_report(cfg, &summary) == XBT_OK);
  CHECK(take(summary).find("report_json") != std::string::npos);
  xbt_config_free(cfg);
}
