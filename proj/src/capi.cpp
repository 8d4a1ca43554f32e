#include "dafec.h"

#include <chrono>
#include <cstring>
#include <exception>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include "dafec/config.hpp"
#include "dafec/errors.hpp"
#include "dafec/metrics.hpp"
#include "dafec/pipeline.hpp"

namespace {

namespace fs = std::filesystem;
using namespace dafec;

thread_local std::string g_last_error;

int fail(int code, const std::string& msg) {
  g_last_error = msg;
  return code;
}

template <typename Fn>
int guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return DAFEC_OK;
  } catch (const NumericError& e) {
    return fail(DAFEC_E_NUM, e.what());
  } catch (const DataError& e) {
    return fail(DAFEC_E_DATA, e.what());
  } catch (const std::invalid_argument& e) {
    return fail(DAFEC_E_USAGE, e.what());
  } catch (const std::exception& e) {
    return fail(DAFEC_E_DATA, e.what());
  }
}

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      // training
      "n", "k", "m", "tau", "anneal", "anneal_T", "constant_lambda",
      "eq9_literal", "entropy_sign", "clusters", "lr", "iters", "episodes",
      "feature_dim", "hidden_dim", "disc_hidden_dim", "kmeans_max_iter",
      "kmeans_tol", "kmeans_restarts", "seed", "no_pseudo", "no_cpm_s",
      "no_cpm_a", "no_cpm_c", "warm_start_classifier", "early_stop",
      // synthetic data
      "d_in", "source_classes", "target_classes", "shared_fraction",
      "samples_per_class", "class_separation", "noise_sigma", "rotation_angle",
      "translation_magnitude", "test_fraction"};
  return keys;
}

void write_trace_csv(const metrics::LossTrace& tr, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot open trace file for writing: " + path);
  os << "iter,ce,dis,enc,entropy,lambda\n";
  os.precision(17);
  for (std::size_t i = 0; i < tr.ce.size(); ++i) {
    auto at = [&](const std::vector<double>& v) { return i < v.size() ? v[i] : 0.0; };
    os << i << "," << tr.ce[i] << "," << at(tr.dis) << "," << at(tr.enc) << ","
       << at(tr.entropy) << "," << at(tr.lambda) << "\n";
  }
}

void require(const void* p, const char* what) {
  if (!p) throw std::invalid_argument(std::string("null argument: ") + what);
}

}  // namespace

struct dafec_config {
  dafec::config::KvMap kv;
};

extern "C" {

const char* dafec_version(void) { return "1.0.0"; }

const char* dafec_last_error(void) { return g_last_error.c_str(); }

dafec_config* dafec_config_create(void) { return new dafec_config(); }

void dafec_config_destroy(dafec_config* cfg) { delete cfg; }

int dafec_config_set(dafec_config* cfg, const char* key, const char* value) {
  return guarded([&] {
    require(cfg, "cfg");
    require(key, "key");
    require(value, "value");
    if (!known_keys().count(key))
      throw std::invalid_argument(std::string("unknown config key: ") + key);
    // Validate eagerly so bad values surface at set time, and roll back so a
    // rejected value never sticks in the store.
    auto trial = cfg->kv;
    trial[key] = value;
    config::TrainConfig::from_map(trial);
    config::synthetic_from_map(trial);
    cfg->kv = std::move(trial);
  });
}

int dafec_config_load_file(dafec_config* cfg, const char* path) {
  return guarded([&] {
    require(cfg, "cfg");
    require(path, "path");
    auto kv = config::load_kv_file(path);
    auto trial = cfg->kv;
    for (const auto& [k, v] : kv) {
      if (!known_keys().count(k))
        throw std::invalid_argument("unknown config key in " + std::string(path) +
                                    ": " + k);
      trial[k] = v;
    }
    config::TrainConfig::from_map(trial);
    config::synthetic_from_map(trial);
    cfg->kv = std::move(trial);
  });
}

int dafec_generate(const dafec_config* cfg, const char* out_dir) {
  return guarded([&] {
    require(cfg, "cfg");
    require(out_dir, "out_dir");
    auto spec = config::synthetic_from_map(cfg->kv);
    synth::write_synthetic(synth::generate_synthetic(spec), out_dir);
  });
}

int dafec_train_extractor(const dafec_config* cfg, const char* source_path,
                          const char* target_path, const char* out_checkpoint,
                          const char* out_trace_csv) {
  return guarded([&] {
    require(cfg, "cfg");
    require(source_path, "source_path");
    require(target_path, "target_path");
    require(out_checkpoint, "out_checkpoint");
    auto tc = config::TrainConfig::from_map(cfg->kv);
    auto source = sampling::load_dataset(source_path);
    auto target = sampling::load_dataset(target_path);
    metrics::LossTrace trace;
    auto params = pipeline::train_extractor(source, target, tc, &trace);
    models::save_checkpoint(params, out_checkpoint);
    if (out_trace_csv) write_trace_csv(trace, out_trace_csv);
  });
}

int dafec_extract(const dafec_config* cfg, const char* checkpoint_path,
                  const char* target_path, const char* out_features) {
  return guarded([&] {
    require(cfg, "cfg");
    require(checkpoint_path, "checkpoint_path");
    require(target_path, "target_path");
    require(out_features, "out_features");
    auto params = models::load_checkpoint(checkpoint_path);
    auto target = sampling::load_dataset(target_path);
    pipeline::save_features(pipeline::extract_features(params, target), out_features);
  });
}

int dafec_mine(const dafec_config* cfg, const char* features_path,
               const char* target_path, const char* out_cluster_dump,
               const char* out_pseudo_dataset) {
  return guarded([&] {
    require(cfg, "cfg");
    require(features_path, "features_path");
    require(target_path, "target_path");
    require(out_cluster_dump, "out_cluster_dump");
    require(out_pseudo_dataset, "out_pseudo_dataset");
    auto tc = config::TrainConfig::from_map(cfg->kv);
    auto features = pipeline::load_features(features_path);
    auto target = sampling::load_dataset(target_path);
    sampling::Rng rng(sampling::derive_seed(tc.seed, 30));
    cluster::ClusterModel cm;
    auto pseudo = pipeline::mine_pseudo_labels(features, target, tc, rng, &cm);
    cluster::save_cluster_dump(cm, out_cluster_dump);
    sampling::save_dataset(pseudo, out_pseudo_dataset);
  });
}

int dafec_train_classifier(const dafec_config* cfg, const char* source_path,
                           const char* pseudo_path, const char* out_checkpoint) {
  return guarded([&] {
    require(cfg, "cfg");
    require(source_path, "source_path");
    require(out_checkpoint, "out_checkpoint");
    auto tc = config::TrainConfig::from_map(cfg->kv);
    auto source = sampling::load_dataset(source_path);
    sampling::Dataset merged =
        pseudo_path
            ? sampling::merge_datasets(source, sampling::load_dataset(pseudo_path))
            : source;
    auto params = pipeline::train_classifier(merged, tc);
    models::save_checkpoint(params, out_checkpoint);
  });
}

int dafec_evaluate(const dafec_config* cfg, const char* checkpoint_path,
                   const char* test_path, const char* out_report_json,
                   const char* out_episodes_csv) {
  return guarded([&] {
    require(cfg, "cfg");
    require(checkpoint_path, "checkpoint_path");
    require(test_path, "test_path");
    require(out_report_json, "out_report_json");
    auto tc = config::TrainConfig::from_map(cfg->kv);
    auto params = models::load_checkpoint(checkpoint_path);
    auto test = sampling::load_dataset(test_path);
    sampling::Rng rng(sampling::derive_seed(tc.seed, 40));
    auto report = pipeline::evaluate(params, test, tc.way, tc.shot,
                                     tc.query_per_class, tc.eval_episodes, rng);
    report.config = tc.to_map();
    report.seed = tc.seed;
    metrics::save_report(report, out_report_json);
    if (out_episodes_csv) metrics::save_episode_csv(report, out_episodes_csv);
  });
}

namespace {

void write_manifest(const dafec::config::KvMap& kv, const std::string& command,
                    const std::vector<std::pair<std::string, std::string>>& paths,
                    const std::string& out_dir) {
  dafec::config::KvMap manifest;
  manifest["command"] = command;
  for (const auto& [k, v] : paths) manifest[k] = v;
  manifest["out"] = out_dir;
  auto now = std::chrono::system_clock::now().time_since_epoch();
  manifest["timestamp_unix"] = std::to_string(
      std::chrono::duration_cast<std::chrono::seconds>(now).count());
  for (const auto& [k, v] : kv) manifest["config." + k] = v;
  dafec::config::save_kv_file(manifest,
                              (fs::path(out_dir) / "manifest.txt").string());
}

}  // namespace

int dafec_run_all(const dafec_config* cfg, const char* source_path,
                  const char* target_path, const char* test_path,
                  const char* out_dir) {
  return guarded([&] {
    require(cfg, "cfg");
    require(source_path, "source_path");
    require(target_path, "target_path");
    require(test_path, "test_path");
    require(out_dir, "out_dir");
    auto tc = config::TrainConfig::from_map(cfg->kv);
    auto source = sampling::load_dataset(source_path);
    auto target = sampling::load_dataset(target_path);
    auto test = sampling::load_dataset(test_path);
    std::map<std::string, std::string> gold;
    bool have_gold = false;
    std::string sidecar = metrics::gold_sidecar_path(target_path);
    if (fs::exists(sidecar)) {
      gold = metrics::load_gold_sidecar(sidecar);
      have_gold = true;
    }
    pipeline::RunPaths paths{out_dir};
    pipeline::run_all(source, target, test, tc, paths,
                      have_gold ? &gold : nullptr);
    write_manifest(cfg->kv, "run-all",
                   {{"source", source_path}, {"target", target_path},
                    {"test", test_path}},
                   out_dir);
  });
}

int dafec_ablate(const dafec_config* cfg, const char* source_path,
                 const char* target_path, const char* test_path,
                 const char* out_dir) {
  return guarded([&] {
    require(cfg, "cfg");
    require(source_path, "source_path");
    require(target_path, "target_path");
    require(test_path, "test_path");
    require(out_dir, "out_dir");
    auto tc = config::TrainConfig::from_map(cfg->kv);
    auto source = sampling::load_dataset(source_path);
    auto target = sampling::load_dataset(target_path);
    auto test = sampling::load_dataset(test_path);
    std::map<std::string, std::string> gold;
    bool have_gold = false;
    std::string sidecar = metrics::gold_sidecar_path(target_path);
    if (fs::exists(sidecar)) {
      gold = metrics::load_gold_sidecar(sidecar);
      have_gold = true;
    }
    auto rows = pipeline::ablate(source, target, test, tc, out_dir,
                                 have_gold ? &gold : nullptr);
    pipeline::save_ablation_csv(rows,
                                (fs::path(out_dir) / "ablation.csv").string());
    write_manifest(cfg->kv, "ablate",
                   {{"source", source_path}, {"target", target_path},
                    {"test", test_path}},
                   out_dir);
  });
}

int dafec_emit_plot_data(const char* const* report_paths,
                         const char* features_path, const char* gold_path,
                         const char* out_dir) {
  return guarded([&] {
    require(report_paths, "report_paths");
    require(out_dir, "out_dir");
    std::vector<std::string> reports;
    for (const char* const* p = report_paths; *p; ++p) reports.emplace_back(*p);
    pipeline::emit_plot_data(reports, features_path ? features_path : "",
                             gold_path ? gold_path : "", out_dir);
  });
}

}  // extern "C"
