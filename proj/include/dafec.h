/* C API for the DaFeC pipeline library.
 *
 * All functions return a status code:
 *   0  DAFEC_OK       success
 *   1  DAFEC_E_USAGE  bad flag, key, or argument value
 *   2  DAFEC_E_DATA   dataset / artifact file problem
 *   3  DAFEC_E_NUM    numeric failure (non-finite loss or gradient)
 * On failure, dafec_last_error() returns a thread-local message.
 *
 * Configuration is a flat key/value store; keys mirror the config file
 * format (n, k, m, tau, anneal, anneal_T, clusters, lr, iters, episodes,
 * seed, no_pseudo, no_cpm_s, no_cpm_a, no_cpm_c, entropy_sign, eq9_literal,
 * and the synthetic-data keys d_in, source_classes, target_classes,
 * shared_fraction, samples_per_class, class_separation, noise_sigma,
 * rotation_angle, translation_magnitude, test_fraction).
 */
#ifndef DAFEC_H
#define DAFEC_H

#ifdef __cplusplus
extern "C" {
#endif

#define DAFEC_OK 0
#define DAFEC_E_USAGE 1
#define DAFEC_E_DATA 2
#define DAFEC_E_NUM 3

typedef struct dafec_config dafec_config;

const char* dafec_version(void);
const char* dafec_last_error(void);

dafec_config* dafec_config_create(void);
void dafec_config_destroy(dafec_config* cfg);
int dafec_config_set(dafec_config* cfg, const char* key, const char* value);
int dafec_config_load_file(dafec_config* cfg, const char* path);

/* Writes source.jsonl, target_unlabeled.jsonl, target_unlabeled.gold.jsonl
 * and target_test.jsonl under out_dir. */
int dafec_generate(const dafec_config* cfg, const char* out_dir);

/* Stage 1. Writes a checkpoint; trace_csv may be NULL. */
int dafec_train_extractor(const dafec_config* cfg, const char* source_path,
                          const char* target_path, const char* out_checkpoint,
                          const char* out_trace_csv);

/* Stage 2. Dumps one `id \t feature...` line per instance. */
int dafec_extract(const dafec_config* cfg, const char* checkpoint_path,
                  const char* target_path, const char* out_features);

/* Stage 3. Writes the cluster dump and the pseudo-labeled dataset. */
int dafec_mine(const dafec_config* cfg, const char* features_path,
               const char* target_path, const char* out_cluster_dump,
               const char* out_pseudo_dataset);

/* Stage 4. pseudo_path may be NULL (source-only training). */
int dafec_train_classifier(const dafec_config* cfg, const char* source_path,
                           const char* pseudo_path, const char* out_checkpoint);

int dafec_evaluate(const dafec_config* cfg, const char* checkpoint_path,
                   const char* test_path, const char* out_report_json,
                   const char* out_episodes_csv);

/* Stages 1-4 plus evaluation; writes all stage artifacts, report.json,
 * episodes.csv and a replayable manifest under out_dir. Reads the gold
 * sidecar next to target_path for the FMI figure when present. */
int dafec_run_all(const dafec_config* cfg, const char* source_path,
                  const char* target_path, const char* test_path,
                  const char* out_dir);

/* Ablation grid (full, -pseudo, -cpm_s, -cpm_a, -cpm_c, linear anneal);
 * one run directory per variant plus ablation.csv. */
int dafec_ablate(const dafec_config* cfg, const char* source_path,
                 const char* target_path, const char* test_path,
                 const char* out_dir);

/* Plot-ready CSVs from finished run directories. report_paths is a
 * NULL-terminated array; features_path / gold_path may be NULL. */
int dafec_emit_plot_data(const char* const* report_paths,
                         const char* features_path, const char* gold_path,
                         const char* out_dir);

#ifdef __cplusplus
}
#endif

#endif /* DAFEC_H */
