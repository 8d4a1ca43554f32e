#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dafec/cluster.hpp"
#include "dafec/config.hpp"
#include "dafec/metrics.hpp"
#include "dafec/models.hpp"
#include "dafec/sampling.hpp"

namespace dafec::pipeline {

using config::TrainConfig;

// Stage 1: episodic training of the extractor with the clustering promotion
// mechanism (prototypical cross-entropy step, discriminator step, weighted
// adversarial + similarity-entropy step).
models::ExtractorParams train_extractor(const sampling::Dataset& source,
                                        const sampling::Dataset& target_unlabeled,
                                        const TrainConfig& cfg,
                                        metrics::LossTrace* trace = nullptr);

// Stage 2: deterministic batch encode of the unlabeled target pool.
std::vector<std::pair<std::string, Eigen::VectorXd>> extract_features(
    const models::ExtractorParams& extractor, const sampling::Dataset& target_unlabeled);

// Stage 3: k-means over the features, then relabel the pool with pseudo ids.
sampling::Dataset mine_pseudo_labels(
    const std::vector<std::pair<std::string, Eigen::VectorXd>>& features,
    const sampling::Dataset& target_unlabeled, const TrainConfig& cfg,
    sampling::Rng& rng, cluster::ClusterModel* model = nullptr);

// Stage 4: fresh prototypical-network encoder trained on the merged label
// space; warm start from `init` when provided.
models::ExtractorParams train_classifier(
    const sampling::Dataset& merged, const TrainConfig& cfg,
    metrics::LossTrace* trace = nullptr,
    const models::ExtractorParams* init = nullptr);

// Nearest-prototype evaluation over `episodes` sampled test episodes.
metrics::RunReport evaluate(const models::ExtractorParams& classifier,
                            const sampling::Dataset& test, int way, int shot,
                            int query_per_class, int episodes, sampling::Rng& rng);

struct RunPaths {
  std::string out_dir;  // empty: keep everything in memory
};

// Stages 1-4 plus evaluation. `gold` (hidden target labels, loaded by the
// reporting caller) is only used for the FMI figure in the report; training
// and mining never see it.
metrics::RunReport run_all(
    const sampling::Dataset& source, const sampling::Dataset& target_unlabeled,
    const sampling::Dataset& test, const TrainConfig& cfg, const RunPaths& paths,
    const std::map<std::string, std::string>* gold = nullptr);

struct AblationRow {
  std::string name;
  metrics::RunReport report;
};

// Ablation grid: full, -pseudo, -cpm_s, -cpm_a, -cpm_c (constant 0.5),
// linear annealing.
std::vector<AblationRow> ablate(
    const sampling::Dataset& source, const sampling::Dataset& target_unlabeled,
    const sampling::Dataset& test, const TrainConfig& cfg,
    const std::string& out_dir,
    const std::map<std::string, std::string>* gold = nullptr);

void save_ablation_csv(const std::vector<AblationRow>& rows, const std::string& path);

// Plot-ready CSVs from a finished run directory: loss traces, the lambda
// schedule, a DBI/FMI bar table, and a 2-D principal-component projection of
// the dumped target features colored by hidden gold label.
void emit_plot_data(const std::vector<std::string>& report_paths,
                    const std::string& features_path,
                    const std::string& gold_path, const std::string& out_dir);

void save_features(const std::vector<std::pair<std::string, Eigen::VectorXd>>& feats,
                   const std::string& path);
std::vector<std::pair<std::string, Eigen::VectorXd>> load_features(const std::string& path);

}  // namespace dafec::pipeline
