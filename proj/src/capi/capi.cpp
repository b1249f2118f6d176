#include "xbartrain.h"

#include <cstdlib>
#include <cstring>
#include <random>
#include <sstream>
#include <string>

#include "core/experiment.hpp"

// Opaque handle definitions: thin structs owning the core objects.
struct xbt_config {
  xbt::ExperimentConfig cfg;
};
struct xbt_network {
  xbt::NetworkGraph net;
};
struct xbt_dataset {
  xbt::Dataset ds;
};
struct xbt_deployment {
  xbt::CrossbarDeployment dep;
};
struct xbt_report {
  xbt::CostReport report;
};

namespace {

thread_local std::string g_last_error;

int set_error(const xbt::Error& e) {
  g_last_error = e.what();
  return static_cast<int>(e.code());
}

int set_error(const std::exception& e) {
  g_last_error = e.what();
  return XBT_E_INTERNAL;
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

template <typename F>
int guarded(F&& f) {
  try {
    f();
    return XBT_OK;
  } catch (const xbt::Error& e) {
    return set_error(e);
  } catch (const std::exception& e) {
    return set_error(e);
  }
}

int require_arg(bool ok, const char* what) {
  if (ok) return XBT_OK;
  g_last_error = what;
  return XBT_E_ARGUMENT;
}

}  // namespace

extern "C" {

const char* xbt_version(void) { return xbt::kLibraryVersion; }

const char* xbt_last_error(void) { return g_last_error.c_str(); }

void xbt_string_free(char* s) { std::free(s); }

int xbt_config_from_json(const char* json, xbt_config** out) {
  if (int rc = require_arg(json && out, "null argument")) return rc;
  return guarded([&] { *out = new xbt_config{xbt::ExperimentConfig::from_json(json)}; });
}

int xbt_config_from_file(const char* path, xbt_config** out) {
  if (int rc = require_arg(path && out, "null argument")) return rc;
  return guarded([&] { *out = new xbt_config{xbt::ExperimentConfig::from_file(path)}; });
}

int xbt_config_hash(const xbt_config* cfg, unsigned long long* out) {
  if (int rc = require_arg(cfg && out, "null argument")) return rc;
  *out = cfg->cfg.hash();
  return XBT_OK;
}

void xbt_config_free(xbt_config* cfg) { delete cfg; }

int xbt_network_reference(const char* name, unsigned long long seed, xbt_network** out) {
  if (int rc = require_arg(name && out, "null argument")) return rc;
  return guarded([&] { *out = new xbt_network{xbt::build_reference(name, seed)}; });
}

int xbt_network_from_config(const xbt_config* cfg, xbt_network** out) {
  if (int rc = require_arg(cfg && out, "null argument")) return rc;
  return guarded([&] { *out = new xbt_network{xbt::build_network_for(cfg->cfg)}; });
}

int xbt_network_load(const char* path, xbt_network** out) {
  if (int rc = require_arg(path && out, "null argument")) return rc;
  return guarded([&] { *out = new xbt_network{xbt::load_network(path)}; });
}

int xbt_network_save(const xbt_network* net, const char* path) {
  if (int rc = require_arg(net && path, "null argument")) return rc;
  return guarded([&] { xbt::save_network(net->net, path); });
}

int xbt_network_to_json(const xbt_network* net, char** json_out) {
  if (int rc = require_arg(net && json_out, "null argument")) return rc;
  return guarded([&] { *json_out = dup_string(xbt::network_to_json(net->net)); });
}

int xbt_network_param_count(const xbt_network* net, long long* out) {
  if (int rc = require_arg(net && out, "null argument")) return rc;
  *out = net->net.param_count();
  return XBT_OK;
}

void xbt_network_free(xbt_network* net) { delete net; }

int xbt_dataset_synth_har(unsigned long long seed, int n, int classes, double noise,
                          xbt_dataset** out) {
  if (int rc = require_arg(out != nullptr, "null argument")) return rc;
  return guarded([&] { *out = new xbt_dataset{xbt::synth_har(seed, n, classes, noise)}; });
}

int xbt_dataset_synth_images(unsigned long long seed, int n, int classes, double noise,
                             xbt_dataset** out) {
  if (int rc = require_arg(out != nullptr, "null argument")) return rc;
  return guarded([&] { *out = new xbt_dataset{xbt::synth_images(seed, n, classes, noise)}; });
}

int xbt_dataset_load_cifar10(const char* dir, int max_train, int max_test, xbt_dataset** out) {
  if (int rc = require_arg(dir && out, "null argument")) return rc;
  return guarded([&] { *out = new xbt_dataset{xbt::load_cifar10(dir, max_train, max_test)}; });
}

int xbt_dataset_load_har_csv(const char* path, int window, int stride, xbt_dataset** out) {
  if (int rc = require_arg(path && out, "null argument")) return rc;
  return guarded([&] { *out = new xbt_dataset{xbt::load_har_csv(path, window, stride)}; });
}

int xbt_dataset_size(const xbt_dataset* ds, int* out) {
  if (int rc = require_arg(ds && out, "null argument")) return rc;
  *out = ds->ds.size();
  return XBT_OK;
}

void xbt_dataset_free(xbt_dataset* ds) { delete ds; }

int xbt_train(xbt_network* net, const xbt_dataset* data, const xbt_config* cfg,
              char** metrics_csv_out) {
  if (int rc = require_arg(net && data && cfg, "null argument")) return rc;
  return guarded([&] {
    xbt::TrainResult tr = xbt::train(net->net, data->ds, xbt::hyper_for(cfg->cfg));
    if (metrics_csv_out) {
      std::ostringstream csv;
      csv << "step,task_loss,l1,l2,constraint,train_acc,val_acc,w_min,w_max,alpha,a0,a1,th_g\n";
      csv.precision(10);
      for (const auto& m : tr.log)
        csv << m.step << ',' << m.task_loss << ',' << m.l1 << ',' << m.l2 << ',' << m.constraint
            << ',' << m.train_acc << ',' << m.val_acc << ',' << m.w_min << ',' << m.w_max << ','
            << m.alpha << ',' << m.a0 << ',' << m.a1 << ',' << m.th << '\n';
      *metrics_csv_out = dup_string(csv.str());
    }
  });
}

int xbt_network_accuracy(xbt_network* net, const xbt_dataset* ds, int quantized, double* out) {
  if (int rc = require_arg(net && ds && out, "null argument")) return rc;
  return guarded([&] {
    const auto& idx = ds->ds.val_idx.empty() ? ds->ds.train_idx : ds->ds.val_idx;
    *out = xbt::evaluate_accuracy(net->net, ds->ds, idx,
                                  quantized ? xbt::QuantScheme::global_shared
                                            : xbt::QuantScheme::none);
  });
}

int xbt_map(const xbt_network* net, const xbt_config* cfg, xbt_deployment** out) {
  if (int rc = require_arg(net && cfg && out, "null argument")) return rc;
  return guarded([&] {
    *out = new xbt_deployment{xbt::build_deployment(net->net, cfg->cfg.tile_rows,
                                                    cfg->cfg.tile_cols, cfg->cfg.device,
                                                    cfg->cfg.scheme, cfg->cfg.seed)};
  });
}

int xbt_deployment_verify(const xbt_deployment* dep, long long* mismatches_out) {
  if (int rc = require_arg(dep && mismatches_out, "null argument")) return rc;
  return guarded([&] {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    xbt::Shape shape = dep->dep.net.input_shape;
    shape.insert(shape.begin(), 4);
    xbt::Tensor probe(shape);
    for (int64_t i = 0; i < probe.size(); ++i) probe[i] = uni(rng);
    *mismatches_out = xbt::verify_deployment(dep->dep, probe);
  });
}

int xbt_deployment_manifest(const xbt_deployment* dep, char** json_out) {
  if (int rc = require_arg(dep && json_out, "null argument")) return rc;
  return guarded([&] { *json_out = dup_string(xbt::deployment_manifest(dep->dep)); });
}

int xbt_deployment_crossbars(const xbt_deployment* dep, long long* out) {
  if (int rc = require_arg(dep && out, "null argument")) return rc;
  *out = static_cast<long long>(dep->dep.tiles.size());
  return XBT_OK;
}

int xbt_deployment_reconfigurable(const xbt_deployment* dep, int* out) {
  if (int rc = require_arg(dep && out, "null argument")) return rc;
  *out = dep->dep.reconfigurable ? 1 : 0;
  return XBT_OK;
}

void xbt_deployment_free(xbt_deployment* dep) { delete dep; }

int xbt_estimate(const xbt_deployment* dep, const char* catalog_json, xbt_report** out) {
  if (int rc = require_arg(dep && out, "null argument")) return rc;
  return guarded([&] {
    xbt::PeripheryCatalog catalog =
        catalog_json ? xbt::catalog_from_json(catalog_json) : xbt::PeripheryCatalog{};
    xbt::EnergyContext ctx;
    ctx.bipolar_present = dep->dep.subtractor_pairs() > 0;
    ctx.uniform_scaling = dep->dep.reconfigurable;
    *out = new xbt_report{xbt::make_report("deployment", xbt::count_ops(dep->dep.net),
                                           xbt::counts_from_deployment(dep->dep), catalog, ctx,
                                           dep->dep.reconfigurable)};
  });
}

int xbt_estimate_preset(const char* preset, const char* catalog_json, xbt_report** out) {
  if (int rc = require_arg(preset && out, "null argument")) return rc;
  return guarded([&] {
    xbt::PeripheryCatalog catalog =
        catalog_json ? xbt::catalog_from_json(catalog_json) : xbt::PeripheryCatalog{};
    for (const xbt::PresetRow& row : xbt::published_rows()) {
      if (row.name != preset) continue;
      xbt::CostReport r =
          xbt::make_report(row.name, row.counts, row.components, catalog, row.ctx,
                           row.reconfigurable);
      if (!row.note.empty()) r.notes.push_back(row.note);
      *out = new xbt_report{std::move(r)};
      return;
    }
    xbt::raise(xbt::ErrorCode::argument, std::string("unknown preset '") + preset + "'");
  });
}

int xbt_report_total_area_mm2(const xbt_report* r, double* out) {
  if (int rc = require_arg(r && out, "null argument")) return rc;
  *out = r->report.area.total_mm2();
  return XBT_OK;
}

int xbt_report_total_energy_j(const xbt_report* r, int freq_mhz, double* out) {
  if (int rc = require_arg(r && out, "null argument")) return rc;
  if (int rc = require_arg(freq_mhz == 10 || freq_mhz == 100, "freq_mhz must be 10 or 100"))
    return rc;
  *out = freq_mhz == 10 ? r->report.energy_10mhz.total() : r->report.energy_100mhz.total();
  return XBT_OK;
}

int xbt_report_json(const xbt_report* r, char** json_out) {
  if (int rc = require_arg(r && json_out, "null argument")) return rc;
  return guarded([&] { *json_out = dup_string(xbt::report_to_json(r->report)); });
}

int xbt_report_text(const xbt_report* r, char** text_out) {
  if (int rc = require_arg(r && text_out, "null argument")) return rc;
  return guarded([&] { *text_out = dup_string(xbt::report_to_text(r->report)); });
}

void xbt_report_free(xbt_report* r) { delete r; }

int xbt_run_train(const xbt_config* cfg, char** summary_json_out) {
  if (int rc = require_arg(cfg != nullptr, "null argument")) return rc;
  return guarded([&] {
    xbt::TrainRun run = xbt::run_train(cfg->cfg);
    if (summary_json_out) *summary_json_out = dup_string(run.summary_json);
  });
}

int xbt_run_map(const xbt_config* cfg, const char* model_path, char** summary_json_out) {
  if (int rc = require_arg(cfg != nullptr, "null argument")) return rc;
  return guarded([&] {
    xbt::MapRun run = xbt::run_map(cfg->cfg, model_path ? model_path : "");
    if (summary_json_out) *summary_json_out = dup_string(run.summary_json);
  });
}

int xbt_run_estimate(const xbt_config* cfg, const char* source, char** summary_json_out) {
  if (int rc = require_arg(cfg != nullptr, "null argument")) return rc;
  return guarded([&] {
    xbt::EstimateRun run = xbt::run_estimate(cfg->cfg, source ? source : "");
    if (summary_json_out) *summary_json_out = dup_string(run.summary_json);
  });
}

int xbt_run_sweep(const xbt_config* cfg, const char* fractions, char** summary_json_out) {
  if (int rc = require_arg(cfg && fractions, "null argument")) return rc;
  return guarded([&] {
    std::vector<double> fr;
    std::stringstream ss(fractions);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      if (tok.empty()) continue;
      char* end = nullptr;
      const double v = std::strtod(tok.c_str(), &end);
      xbt::require(end != tok.c_str() && *end == '\0' && v >= 0.0 && v <= 1.0,
                   xbt::ErrorCode::argument, "bad fraction '" + tok + "'");
      fr.push_back(v);
    }
    xbt::SweepRun run = xbt::run_sweep(cfg->cfg, fr);
    if (summary_json_out) *summary_json_out = dup_string(run.summary_json);
  });
}

int xbt_run_report(const xbt_config* cfg, char** summary_json_out) {
  if (int rc = require_arg(cfg != nullptr, "null argument")) return rc;
  return guarded([&] {
    xbt::ReportRun run = xbt::run_report(cfg->cfg);
    if (summary_json_out) *summary_json_out = dup_string(run.summary_json);
  });
}

}  // extern "C"
