#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/costmodel.hpp"
#include "core/crossbar.hpp"
#include "core/dataset.hpp"
#include "core/train.hpp"

namespace xbt {

extern const char* kLibraryVersion;

// Parsed experiment configuration. Unknown keys anywhere in the document are
// rejected before any work starts.
struct ExperimentConfig {
  // network
  std::string network_name = "har";  // har | cifar10
  std::string network_load_path;     // overrides network_name when set
  struct CustomNet {
    bool enabled = false;
    std::string kind = "dense";  // dense | har_like
    int input = 0;
    std::vector<int> hidden;
    int classes = 2;
  } custom;

  // quantization
  int bits_weights = 4, bits_activations = 4, bits_inputs = 4, bits_bias = 4;
  QuantScheme scheme = QuantScheme::global_shared;
  RangePolicy policy = RangePolicy::ema;
  double ema_lambda = 0.99;
  double alpha_ramp = 0.6;
  double quant_delay = 0.0;

  // polarity applied to hidden layers
  Polarity polarity;

  // loss
  LossConfig loss;
  double constraint_start_frac = 0.3;  // N as a fraction of the step budget

  // training
  int steps = 1000, batch_size = 32, log_every = 25, eval_cap = 512;
  double lr = 1e-3;
  OptimizerKind optimizer = OptimizerKind::adam;

  // hardware
  int tile_rows = 128, tile_cols = 128;
  DeviceModel device;
  Frequency frequency = Frequency::mhz10;
  std::string catalog_path;  // optional periphery catalog override

  // dataset
  std::string dataset_kind = "synth_har";  // synth_har | synth_images | cifar10 | har_csv
  std::string dataset_path;
  int dataset_n = 1200;
  double dataset_noise = 0.1;
  int max_train = 0, max_test = 0;
  int har_window = 100, har_stride = 100;

  uint64_t seed = 1;
  std::string output_dir = "out";
  bool full = false;

  std::string canonical_json;  // normalized form used for hashing

  static ExperimentConfig from_json(const std::string& text);
  static ExperimentConfig from_file(const std::string& path);
  uint64_t hash() const;
};

NetworkGraph build_network_for(const ExperimentConfig& cfg);
Dataset load_dataset_for(const ExperimentConfig& cfg);
Hyper hyper_for(const ExperimentConfig& cfg);
PeripheryCatalog catalog_for(const ExperimentConfig& cfg);

// Every pipeline run drops a manifest with the config hash, seed and library
// version next to its outputs; identical manifests reproduce outputs
// bit-exactly.
void write_run_manifest(const ExperimentConfig& cfg, const std::string& command,
                        const std::vector<std::string>& outputs);

struct TrainRun {
  std::string model_path, metrics_path;
  double final_val_acc = 0.0;
  ActivationKind selected = ActivationKind::relu;
  std::string summary_json;
};
TrainRun run_train(const ExperimentConfig& cfg);

struct MapRun {
  std::string manifest_path;
  int64_t mismatches = 0;  // nonzero means the mandatory ideal check failed
  bool reconfigurable = false;
  std::string summary_json;
};
MapRun run_map(const ExperimentConfig& cfg, const std::string& model_path);

struct EstimateRun {
  CostReport report;
  std::string json_path, text_path;
  std::string summary_json;
};
// `source` is a trained model path or "preset:<row name>".
EstimateRun run_estimate(const ExperimentConfig& cfg, const std::string& source);

struct SweepRun {
  std::string csv_path;
  std::string summary_json;
};
// Unipolar-fraction study: one training run per fraction (fanned out
// concurrently, each with its own seed and output slot).
SweepRun run_sweep(const ExperimentConfig& cfg, const std::vector<double>& fractions);

struct ReportRun {
  std::string json_path, text_path;
  std::string summary_json;
};
ReportRun run_report(const ExperimentConfig& cfg);

}  // namespace xbt
