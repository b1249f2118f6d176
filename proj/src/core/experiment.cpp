#include "core/experiment.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"

namespace xbt {

using nlohmann::json;
namespace fs = std::filesystem;

const char* kLibraryVersion = "0.1.0";

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& ctx) {
  require(j.is_object(), ErrorCode::format, ctx + " must be an object");
  for (const auto& [key, _] : j.items())
    require(allowed.count(key) == 1, ErrorCode::format, "unknown key '" + key + "' in " + ctx);
}

std::string read_file(const std::string& path) {
  std::ifstream f(path);
  require(f.good(), ErrorCode::io, "cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  require(f.good(), ErrorCode::io, "cannot open " + path + " for writing");
  f << text;
  require(f.good(), ErrorCode::io, "write failed for " + path);
}

std::string data_root() {
  const char* env = std::getenv("XBT_DATA_ROOT");
  return env ? std::string(env) : std::string(".");
}

std::string resolve_data_path(const std::string& p) {
  if (p.empty() || p.front() == '/') return p;
  return data_root() + "/" + p;
}

uint64_t fnv1a64(const std::string& s) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    raise(ErrorCode::format, std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(j, {"network", "bits", "quant", "polarity", "loss", "train", "tile", "device",
                 "frequency", "dataset", "seed", "output_dir", "full", "catalog"},
             "config");
  ExperimentConfig c;

  if (j.contains("network")) {
    const json& n = j["network"];
    if (n.is_string()) {
      c.network_name = n.get<std::string>();
    } else {
      check_keys(n, {"load", "kind", "input", "hidden", "classes"}, "network");
      if (n.contains("load")) {
        c.network_load_path = n["load"].get<std::string>();
      } else {
        c.custom.enabled = true;
        c.custom.kind = n.value("kind", "dense");
        c.custom.input = n.value("input", 0);
        if (n.contains("hidden")) c.custom.hidden = n["hidden"].get<std::vector<int>>();
        c.custom.classes = n.value("classes", 2);
      }
    }
  }
  if (j.contains("bits")) {
    check_keys(j["bits"], {"weights", "activations", "inputs", "bias"}, "bits");
    c.bits_weights = j["bits"].value("weights", 4);
    c.bits_activations = j["bits"].value("activations", 4);
    c.bits_inputs = j["bits"].value("inputs", c.bits_activations);
    c.bits_bias = j["bits"].value("bias", c.bits_weights);
  }
  if (j.contains("quant")) {
    check_keys(j["quant"], {"scheme", "policy", "ema_lambda", "alpha_ramp", "quant_delay"},
               "quant");
    const std::string s = j["quant"].value("scheme", "global");
    if (s == "global") c.scheme = QuantScheme::global_shared;
    else if (s == "per_layer") c.scheme = QuantScheme::per_layer;
    else if (s == "none") c.scheme = QuantScheme::none;
    else raise(ErrorCode::format, "unknown quant scheme '" + s + "'");
    const std::string p = j["quant"].value("policy", "ema");
    if (p == "ema") c.policy = RangePolicy::ema;
    else if (p == "gradient") c.policy = RangePolicy::gradient;
    else raise(ErrorCode::format, "unknown range policy '" + p + "'");
    c.ema_lambda = j["quant"].value("ema_lambda", 0.99);
    c.alpha_ramp = j["quant"].value("alpha_ramp", 0.6);
    c.quant_delay = j["quant"].value("quant_delay", 0.0);
  }
  if (j.contains("polarity")) {
    check_keys(j["polarity"], {"mode", "fraction"}, "polarity");
    const std::string m = j["polarity"].value("mode", "bipolar");
    if (m == "bipolar") c.polarity.mode = PolarityMode::bipolar;
    else if (m == "unipolar") c.polarity.mode = PolarityMode::unipolar;
    else if (m == "fractional") c.polarity.mode = PolarityMode::fractional;
    else raise(ErrorCode::format, "unknown polarity mode '" + m + "'");
    c.polarity.fraction = j["polarity"].value("fraction", 0.0);
  }
  if (j.contains("loss")) {
    check_keys(j["loss"], {"l1", "l2", "constraint"}, "loss");
    c.loss.l1_coeff = j["loss"].value("l1", 0.0);
    c.loss.l2_coeff = j["loss"].value("l2", 0.0);
    if (j["loss"].contains("constraint")) {
      const json& cc = j["loss"]["constraint"];
      check_keys(cc, {"alpha_c", "w_t", "start_frac", "ramp"}, "constraint");
      c.loss.constraint.alpha_c = cc.value("alpha_c", 1.0);
      c.loss.constraint.w_t = cc.value("w_t", 0.0);
      c.constraint_start_frac = cc.value("start_frac", 0.3);
      const std::string r = cc.value("ramp", "heaviside");
      if (r == "heaviside") c.loss.constraint.ramp = ConstraintRamp::heaviside;
      else if (r == "relu") c.loss.constraint.ramp = ConstraintRamp::relu_ramp;
      else raise(ErrorCode::format, "unknown constraint ramp '" + r + "'");
    }
  }
  if (j.contains("train")) {
    check_keys(j["train"], {"steps", "batch_size", "lr", "optimizer", "log_every", "eval_cap"},
               "train");
    c.steps = j["train"].value("steps", 1000);
    c.batch_size = j["train"].value("batch_size", 32);
    c.lr = j["train"].value("lr", 1e-3);
    c.log_every = j["train"].value("log_every", 25);
    c.eval_cap = j["train"].value("eval_cap", 512);
    const std::string o = j["train"].value("optimizer", "adam");
    if (o == "adam") c.optimizer = OptimizerKind::adam;
    else if (o == "sgd") c.optimizer = OptimizerKind::sgd;
    else raise(ErrorCode::format, "unknown optimizer '" + o + "'");
  }
  if (j.contains("tile")) {
    check_keys(j["tile"], {"rows", "cols"}, "tile");
    c.tile_rows = j["tile"].value("rows", 128);
    c.tile_cols = j["tile"].value("cols", 128);
  }
  if (j.contains("device")) {
    check_keys(j["device"], {"g_off", "g_on", "conductance_bits", "noise_sigma"}, "device");
    c.device.g_off = j["device"].value("g_off", 0.0);
    c.device.g_on = j["device"].value("g_on", 100e-6);
    c.device.conductance_bits = j["device"].value("conductance_bits", 4);
    c.device.noise_sigma = j["device"].value("noise_sigma", 0.0);
  }
  if (j.contains("frequency")) {
    const std::string f = j["frequency"].get<std::string>();
    if (f == "10MHz") c.frequency = Frequency::mhz10;
    else if (f == "100MHz") c.frequency = Frequency::mhz100;
    else raise(ErrorCode::format, "unknown frequency '" + f + "' (use 10MHz or 100MHz)");
  }
  if (j.contains("dataset")) {
    check_keys(j["dataset"],
               {"kind", "path", "n", "noise", "max_train", "max_test", "window", "stride"},
               "dataset");
    c.dataset_kind = j["dataset"].value("kind", "synth_har");
    c.dataset_path = j["dataset"].value("path", "");
    c.dataset_n = j["dataset"].value("n", 1200);
    c.dataset_noise = j["dataset"].value("noise", 0.1);
    c.max_train = j["dataset"].value("max_train", 0);
    c.max_test = j["dataset"].value("max_test", 0);
    c.har_window = j["dataset"].value("window", 100);
    c.har_stride = j["dataset"].value("stride", 100);
  }
  c.seed = j.value("seed", 1);
  c.output_dir = j.value("output_dir", "out");
  c.full = j.value("full", false);
  c.catalog_path = j.value("catalog", "");
  c.device.validate();
  require(c.steps >= 0 && c.batch_size > 0, ErrorCode::argument, "bad train budget");
  c.loss.validate();
  c.canonical_json = j.dump();
  return c;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  return from_json(read_file(path));
}

uint64_t ExperimentConfig::hash() const { return fnv1a64(canonical_json); }

NetworkGraph build_network_for(const ExperimentConfig& cfg) {
  NetworkGraph net;
  if (!cfg.network_load_path.empty()) {
    net = load_network(resolve_data_path(cfg.network_load_path));
  } else if (cfg.custom.enabled) {
    if (cfg.custom.kind == "dense") {
      require(cfg.custom.input > 0, ErrorCode::argument, "custom dense net needs input > 0");
      net = build_dense_net(cfg.custom.input, cfg.custom.hidden, cfg.custom.classes, cfg.seed);
    } else if (cfg.custom.kind == "har_like") {
      const int hidden = cfg.custom.hidden.empty() ? 145 : cfg.custom.hidden[0];
      net = build_har_like(hidden, cfg.seed);
    } else {
      raise(ErrorCode::argument, "unknown custom network kind '" + cfg.custom.kind + "'");
    }
  } else {
    net = build_reference(cfg.network_name, cfg.seed);
  }

  // Bit widths and polarity from the experiment config.
  auto apply_bits = [&](GlobalVariableSet& s) {
    s.w.bits = cfg.bits_weights;
    s.y.bits = cfg.bits_activations;
    s.x.bits = cfg.bits_inputs;
    s.b.bits = cfg.bits_bias;
    if (cfg.policy == RangePolicy::gradient) {
      s.x.trainable = s.y.trainable = s.w.trainable = s.b.trainable = true;
    }
  };
  apply_bits(net.globals);
  apply_bits(net.output_set);
  net.output_set.x.trainable = net.output_set.y.trainable = false;
  net.output_set.w.trainable = net.output_set.b.trainable = false;
  if (cfg.polarity.mode == PolarityMode::unipolar) {
    net.globals.unipolar_w = true;
    net.globals.w.min = 0.0;
    if (net.globals.w.max <= 0.0) net.globals.w.max = 1.0;
  }
  for (auto& l : net.layers) {
    if (l.trainable() && l.binding == QuantBinding::global) l.polarity = cfg.polarity;
  }
  for (auto& lr : net.layer_ranges) {
    lr.x.bits = cfg.bits_inputs;
    lr.w.bits = cfg.bits_weights;
    lr.y.bits = cfg.bits_activations;
  }
  return net;
}

Dataset load_dataset_for(const ExperimentConfig& cfg) {
  if (cfg.dataset_kind == "synth_har")
    return synth_har(cfg.seed, cfg.dataset_n, 12, cfg.dataset_noise);
  if (cfg.dataset_kind == "synth_images")
    return synth_images(cfg.seed, cfg.dataset_n, 10, cfg.dataset_noise);
  if (cfg.dataset_kind == "cifar10")
    return load_cifar10(resolve_data_path(cfg.dataset_path), cfg.full ? 0 : cfg.max_train,
                        cfg.full ? 0 : cfg.max_test);
  if (cfg.dataset_kind == "har_csv")
    return load_har_csv(resolve_data_path(cfg.dataset_path), cfg.har_window, cfg.har_stride);
  raise(ErrorCode::argument, "unknown dataset kind '" + cfg.dataset_kind + "'");
}

Hyper hyper_for(const ExperimentConfig& cfg) {
  Hyper h;
  h.lr = cfg.lr;
  h.batch_size = cfg.batch_size;
  h.steps = cfg.steps;
  h.optimizer = cfg.optimizer;
  h.scheme = cfg.scheme;
  h.range_policy = cfg.policy;
  h.ema_lambda = cfg.ema_lambda;
  h.alpha_ramp = cfg.alpha_ramp;
  h.quant_delay = cfg.quant_delay;
  h.seed = cfg.seed;
  h.loss = cfg.loss;
  h.loss.constraint.start_step = static_cast<int>(cfg.constraint_start_frac * cfg.steps);
  h.log_every = cfg.log_every;
  h.eval_cap = cfg.eval_cap;
  return h;
}

PeripheryCatalog catalog_for(const ExperimentConfig& cfg) {
  if (cfg.catalog_path.empty()) return PeripheryCatalog{};
  return catalog_from_json(read_file(resolve_data_path(cfg.catalog_path)));
}

void write_run_manifest(const ExperimentConfig& cfg, const std::string& command,
                        const std::vector<std::string>& outputs) {
  json j;
  j["command"] = command;
  j["config_hash"] = cfg.hash();
  j["seed"] = cfg.seed;
  j["library_version"] = kLibraryVersion;
  j["config"] = json::parse(cfg.canonical_json);
  j["outputs"] = outputs;
  write_file(cfg.output_dir + "/run_manifest_" + command + ".json", j.dump(1));
}

TrainRun run_train(const ExperimentConfig& cfg) {
  fs::create_directories(cfg.output_dir);
  NetworkGraph net = build_network_for(cfg);
  Dataset data = load_dataset_for(cfg);
  Hyper hyper = hyper_for(cfg);

  TrainResult tr = train(net, data, hyper);

  TrainRun out;
  out.model_path = cfg.output_dir + "/model.json";
  out.metrics_path = cfg.output_dir + "/metrics.csv";
  save_network(net, out.model_path);
  write_metrics_csv(out.metrics_path, tr.log);
  out.final_val_acc = tr.final_val_acc;
  out.selected = tr.selected;
  write_run_manifest(cfg, "train", {out.model_path, out.metrics_path});

  json s;
  s["model"] = out.model_path;
  s["metrics"] = out.metrics_path;
  s["final_val_acc"] = out.final_val_acc;
  s["selected_activation"] = to_string(out.selected);
  s["params"] = net.param_count();
  out.summary_json = s.dump(1);
  return out;
}

MapRun run_map(const ExperimentConfig& cfg, const std::string& model_path) {
  fs::create_directories(cfg.output_dir);
  NetworkGraph net = load_network(model_path.empty() ? cfg.output_dir + "/model.json" : model_path);
  CrossbarDeployment dep =
      build_deployment(net, cfg.tile_rows, cfg.tile_cols, cfg.device, cfg.scheme, cfg.seed);

  // Mandatory ideal-device exactness check on a deterministic probe batch.
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  Shape probe_shape = net.input_shape;
  probe_shape.insert(probe_shape.begin(), 4);
  Tensor probe(probe_shape);
  for (int64_t i = 0; i < probe.size(); ++i) probe[i] = uni(rng);

  MapRun out;
  out.mismatches = verify_deployment(dep, probe);
  out.reconfigurable = dep.reconfigurable;
  out.manifest_path = cfg.output_dir + "/deployment.json";
  if (out.mismatches == 0) save_manifest(dep, out.manifest_path);
  write_run_manifest(cfg, "map", {out.manifest_path});

  json s;
  s["manifest"] = out.manifest_path;
  s["exactness_check"] = out.mismatches == 0 ? "PASS" : "FAIL";
  s["mismatches"] = out.mismatches;
  s["reconfigurable"] = out.reconfigurable;
  s["crossbars"] = dep.tiles.size();
  out.summary_json = s.dump(1);
  if (out.mismatches != 0)
    raise(ErrorCode::deployment, "deployment diverges from the digital reference on " +
                                     std::to_string(out.mismatches) + " elements");
  return out;
}

EstimateRun run_estimate(const ExperimentConfig& cfg, const std::string& source) {
  fs::create_directories(cfg.output_dir);
  const PeripheryCatalog catalog = catalog_for(cfg);
  EstimateRun out;
  if (source.rfind("preset:", 0) == 0) {
    const std::string name = source.substr(7);
    for (const PresetRow& row : published_rows()) {
      if (row.name != name) continue;
      out.report = make_report(row.name, row.counts, row.components, catalog, row.ctx,
                               row.reconfigurable);
      if (!row.note.empty()) out.report.notes.push_back(row.note);
      break;
    }
    require(!out.report.label.empty(), ErrorCode::argument, "unknown preset '" + name + "'");
  } else {
    NetworkGraph net = load_network(source.empty() ? cfg.output_dir + "/model.json" : source);
    CrossbarDeployment dep =
        build_deployment(net, cfg.tile_rows, cfg.tile_cols, cfg.device, cfg.scheme, cfg.seed);
    EnergyContext ctx;
    ctx.bipolar_present = dep.subtractor_pairs() > 0;
    ctx.uniform_scaling = dep.reconfigurable;
    out.report = make_report("deployment", count_ops(dep.net), counts_from_deployment(dep),
                             catalog, ctx, dep.reconfigurable);
  }
  out.json_path = cfg.output_dir + "/cost_report.json";
  out.text_path = cfg.output_dir + "/cost_report.txt";
  write_file(out.json_path, report_to_json(out.report));
  write_file(out.text_path, report_to_text(out.report));
  write_run_manifest(cfg, "estimate", {out.json_path, out.text_path});
  json s;
  s["report_json"] = out.json_path;
  s["report_text"] = out.text_path;
  s["total_area_mm2"] = out.report.area.total_mm2();
  s["total_energy_10mhz_j"] = out.report.energy_10mhz.total();
  out.summary_json = s.dump(1);
  return out;
}

SweepRun run_sweep(const ExperimentConfig& cfg, const std::vector<double>& fractions) {
  require(!fractions.empty(), ErrorCode::argument, "sweep needs at least one fraction");
  fs::create_directories(cfg.output_dir);

  struct Row {
    double fraction = 0.0;
    double accuracy = 0.0;
    int64_t crossbars = 0;
    double crossbar_area_mm2 = 0.0;
    int64_t nvm_reads = 0;
    double nvm_read_energy_j = 0.0;
  };

  const PeripheryCatalog catalog = catalog_for(cfg);
  auto run_one = [&](double fraction) -> Row {
    ExperimentConfig sub = cfg;
    sub.polarity.mode = PolarityMode::fractional;
    sub.polarity.fraction = fraction;
    sub.output_dir = cfg.output_dir + "/frac_" + std::to_string(fraction);
    NetworkGraph net = build_network_for(sub);
    Dataset data = load_dataset_for(sub);
    TrainResult tr = train(net, data, hyper_for(sub));
    CrossbarDeployment dep =
        build_deployment(net, sub.tile_rows, sub.tile_cols, sub.device, sub.scheme, sub.seed);
    const OpCounts oc = count_ops(dep.net);
    Row row;
    row.fraction = fraction;
    row.accuracy = tr.final_val_acc;
    row.crossbars = static_cast<int64_t>(dep.tiles.size());
    row.crossbar_area_mm2 = static_cast<double>(row.crossbars) * sub.tile_rows * sub.tile_cols *
                            catalog.nvm_cell_area_um2 * 1e-6;
    row.nvm_reads = oc.nvm_total();
    row.nvm_read_energy_j =
        static_cast<double>(row.nvm_reads) * catalog.nvm_read_power / frequency_hz(sub.frequency);
    return row;
  };

  // Independent runs, fanned out; aggregation is index-ordered.
  std::vector<std::future<Row>> futures;
  for (double f : fractions)
    futures.push_back(std::async(std::launch::async, run_one, f));
  std::vector<Row> rows;
  for (auto& fu : futures) rows.push_back(fu.get());

  SweepRun out;
  out.csv_path = cfg.output_dir + "/sweep.csv";
  {
    std::ofstream f(out.csv_path);
    require(f.good(), ErrorCode::io, "cannot open " + out.csv_path);
    f << "fraction,accuracy,crossbars,crossbar_area_mm2,nvm_reads,nvm_read_energy_j\n";
    f.precision(10);
    for (const Row& r : rows)
      f << r.fraction << ',' << r.accuracy << ',' << r.crossbars << ',' << r.crossbar_area_mm2
        << ',' << r.nvm_reads << ',' << r.nvm_read_energy_j << '\n';
  }
  write_run_manifest(cfg, "sweep", {out.csv_path});
  json s;
  s["csv"] = out.csv_path;
  json jr = json::array();
  for (const Row& r : rows)
    jr.push_back(json{{"fraction", r.fraction},
                      {"accuracy", r.accuracy},
                      {"crossbars", r.crossbars},
                      {"crossbar_area_mm2", r.crossbar_area_mm2},
                      {"nvm_reads", r.nvm_reads},
                      {"nvm_read_energy_j", r.nvm_read_energy_j}});
  s["rows"] = jr;
  out.summary_json = s.dump(1);
  return out;
}

ReportRun run_report(const ExperimentConfig& cfg) {
  fs::create_directories(cfg.output_dir);
  json j;
  j["library_version"] = kLibraryVersion;
  j["config_hash"] = cfg.hash();
  std::ostringstream text;
  text << "xbartrain experiment report\n";
  auto pull = [&](const std::string& name, const std::string& path, bool is_json) {
    if (!fs::exists(path)) return;
    const std::string content = read_file(path);
    if (is_json) j[name] = json::parse(content);
    else j[name] = content;
    text << "\n== " << name << " (" << path << ")\n";
    if (!is_json) text << content;
  };
  pull("deployment", cfg.output_dir + "/deployment.json", true);
  pull("cost_report", cfg.output_dir + "/cost_report.json", true);
  pull("cost_report_text", cfg.output_dir + "/cost_report.txt", false);
  if (fs::exists(cfg.output_dir + "/metrics.csv")) {
    j["metrics_csv"] = cfg.output_dir + "/metrics.csv";
    text << "\n== metrics: " << cfg.output_dir + "/metrics.csv" << "\n";
  }
  if (fs::exists(cfg.output_dir + "/sweep.csv")) {
    j["sweep_csv"] = cfg.output_dir + "/sweep.csv";
    text << "\n== sweep: " << cfg.output_dir + "/sweep.csv" << "\n"
         << read_file(cfg.output_dir + "/sweep.csv");
  }
  ReportRun out;
  out.json_path = cfg.output_dir + "/report.json";
  out.text_path = cfg.output_dir + "/report.txt";
  write_file(out.json_path, j.dump(1));
  write_file(out.text_path, text.str());
  write_run_manifest(cfg, "report", {out.json_path, out.text_path});
  json s;
  s["report_json"] = out.json_path;
  s["report_text"] = out.text_path;
  out.summary_json = s.dump(1);
  return out;
}

}  // namespace xbt
