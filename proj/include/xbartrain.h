/* xbartrain C API
 *
 * Shared-library surface for the crossbar-aware quantized training and cost
 * estimation core. All objects are opaque handles created and destroyed
 * through these functions; every fallible call returns a status code from
 * xbt_status and leaves a description in xbt_last_error() on failure.
 * Strings returned through char** out-parameters are heap-allocated and must
 * be released with xbt_string_free().
 */
#ifndef XBARTRAIN_H
#define XBARTRAIN_H

#ifdef __cplusplus
extern "C" {
#endif

typedef enum xbt_status {
  XBT_OK = 0,
  XBT_E_ARGUMENT = 1,
  XBT_E_DIMENSION = 2,
  XBT_E_RANGE = 3,
  XBT_E_FORMAT = 4,
  XBT_E_MAPPING = 5,
  XBT_E_DEPLOYMENT = 6,
  XBT_E_CATALOG = 7,
  XBT_E_IO = 8,
  XBT_E_NUMERIC = 9,
  XBT_E_INTERNAL = 10
} xbt_status;

typedef struct xbt_config xbt_config;
typedef struct xbt_network xbt_network;
typedef struct xbt_dataset xbt_dataset;
typedef struct xbt_deployment xbt_deployment;
typedef struct xbt_report xbt_report;

const char* xbt_version(void);
/* Thread-local message describing the most recent failure. */
const char* xbt_last_error(void);
void xbt_string_free(char* s);

/* ---- experiment configuration (JSON; unknown keys are rejected) ---- */
int xbt_config_from_json(const char* json, xbt_config** out);
int xbt_config_from_file(const char* path, xbt_config** out);
int xbt_config_hash(const xbt_config* cfg, unsigned long long* out);
void xbt_config_free(xbt_config* cfg);

/* ---- networks ---- */
int xbt_network_reference(const char* name, unsigned long long seed, xbt_network** out);
int xbt_network_from_config(const xbt_config* cfg, xbt_network** out);
int xbt_network_load(const char* path, xbt_network** out);
int xbt_network_save(const xbt_network* net, const char* path);
int xbt_network_to_json(const xbt_network* net, char** json_out);
int xbt_network_param_count(const xbt_network* net, long long* out);
void xbt_network_free(xbt_network* net);

/* ---- datasets ---- */
int xbt_dataset_synth_har(unsigned long long seed, int n, int classes, double noise,
                          xbt_dataset** out);
int xbt_dataset_synth_images(unsigned long long seed, int n, int classes, double noise,
                             xbt_dataset** out);
int xbt_dataset_load_cifar10(const char* dir, int max_train, int max_test, xbt_dataset** out);
int xbt_dataset_load_har_csv(const char* path, int window, int stride, xbt_dataset** out);
int xbt_dataset_size(const xbt_dataset* ds, int* out);
void xbt_dataset_free(xbt_dataset* ds);

/* ---- training / mapping / estimation ---- */
/* Trains in place under the config's hyper-parameters; optionally returns the
 * metrics log as CSV text. */
int xbt_train(xbt_network* net, const xbt_dataset* data, const xbt_config* cfg,
              char** metrics_csv_out);
int xbt_network_accuracy(xbt_network* net, const xbt_dataset* ds, int quantized, double* out);

int xbt_map(const xbt_network* net, const xbt_config* cfg, xbt_deployment** out);
/* Number of elements where the analog path diverges from the digital
 * reference under an ideal device; 0 means exact. */
int xbt_deployment_verify(const xbt_deployment* dep, long long* mismatches_out);
int xbt_deployment_manifest(const xbt_deployment* dep, char** json_out);
int xbt_deployment_crossbars(const xbt_deployment* dep, long long* out);
int xbt_deployment_reconfigurable(const xbt_deployment* dep, int* out);
void xbt_deployment_free(xbt_deployment* dep);

int xbt_estimate(const xbt_deployment* dep, const char* catalog_json, xbt_report** out);
/* Published deployment rows, e.g. "cifar10-tf-8b", "har-ours-4b". */
int xbt_estimate_preset(const char* preset, const char* catalog_json, xbt_report** out);
int xbt_report_total_area_mm2(const xbt_report* r, double* out);
int xbt_report_total_energy_j(const xbt_report* r, int freq_mhz, double* out);
int xbt_report_json(const xbt_report* r, char** json_out);
int xbt_report_text(const xbt_report* r, char** text_out);
void xbt_report_free(xbt_report* r);

/* ---- whole-pipeline commands (what the CLI drives) ---- */
int xbt_run_train(const xbt_config* cfg, char** summary_json_out);
int xbt_run_map(const xbt_config* cfg, const char* model_path, char** summary_json_out);
/* source: trained model path, empty (uses <output_dir>/model.json), or
 * "preset:<row>" for a published deployment row. */
int xbt_run_estimate(const xbt_config* cfg, const char* source, char** summary_json_out);
/* fractions: comma-separated unipolar channel fractions, e.g. "0,0.5,1". */
int xbt_run_sweep(const xbt_config* cfg, const char* fractions, char** summary_json_out);
int xbt_run_report(const xbt_config* cfg, char** summary_json_out);

#ifdef __cplusplus
}
#endif

#endif /* XBARTRAIN_H */
