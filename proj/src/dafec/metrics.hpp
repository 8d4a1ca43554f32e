#pragma once

#include <Eigen/Dense>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace dafec::metrics {

struct EpisodeResult {
  int correct = 0;
  int total = 0;
  std::map<std::string, std::pair<int, int>> per_class;  // class -> (correct, total)
  double accuracy() const { return static_cast<double>(correct) / total; }
};

double accuracy(const std::vector<std::string>& preds,
                const std::vector<std::string>& golds);

// Mean and population standard deviation of per-episode accuracies, percent.
std::pair<double, double> aggregate(const std::vector<EpisodeResult>& results);

// Standard Davies-Bouldin index: mean over clusters of the worst
// (s_i + s_j) / d(c_i, c_j) ratio, s_i the mean member distance to the class
// centroid.
double davies_bouldin(const std::vector<Eigen::VectorXd>& features,
                      const std::vector<std::string>& labels);

// Pair-counting Fowlkes-Mallows index via a contingency table; 0 when no
// pair is co-clustered in both labelings.
double fowlkes_mallows(const std::vector<std::string>& pred,
                       const std::vector<std::string>& gold);

struct LossTrace {
  std::vector<double> ce;
  std::vector<double> dis;
  std::vector<double> enc;
  std::vector<double> entropy;
  std::vector<double> lambda;
};

struct RunReport {
  int way = 0;
  int shot = 0;
  double accuracy_mean = 0.0;  // percent
  double accuracy_std = 0.0;   // percent
  std::optional<double> dbi;
  std::optional<double> fmi;
  std::vector<double> episode_accuracies;
  LossTrace extractor_trace;
  LossTrace classifier_trace;
  std::vector<std::string> stage_log;
  std::map<std::string, std::string> config;
  std::uint64_t seed = 0;
};

void save_report(const RunReport& r, const std::string& json_path);
RunReport load_report(const std::string& json_path);
void save_episode_csv(const RunReport& r, const std::string& csv_path);

// The gold sidecar carries the hidden target labels. Only reporting code may
// call this; training and mining paths take datasets that never include it.
std::map<std::string, std::string> load_gold_sidecar(const std::string& path);
std::string gold_sidecar_path(const std::string& dataset_path);

}  // namespace dafec::metrics
