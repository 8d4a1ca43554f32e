#include "dafec/metrics.hpp"

#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <stdexcept>

#include "dafec/errors.hpp"

namespace dafec::metrics {

using nlohmann::json;

double accuracy(const std::vector<std::string>& preds,
                const std::vector<std::string>& golds) {
  if (preds.size() != golds.size())
    throw std::invalid_argument("accuracy: length mismatch");
  if (preds.empty()) throw std::invalid_argument("accuracy: empty input");
  int hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i)
    if (preds[i] == golds[i]) ++hits;
  return static_cast<double>(hits) / preds.size();
}

std::pair<double, double> aggregate(const std::vector<EpisodeResult>& results) {
  if (results.empty()) throw std::invalid_argument("aggregate: no results");
  double mean = 0.0;
  for (const auto& r : results) mean += r.accuracy();
  mean /= results.size();
  double var = 0.0;
  for (const auto& r : results) {
    double d = r.accuracy() - mean;
    var += d * d;
  }
  var /= results.size();
  return {100.0 * mean, 100.0 * std::sqrt(var)};
}

double davies_bouldin(const std::vector<Eigen::VectorXd>& features,
                      const std::vector<std::string>& labels) {
  if (features.size() != labels.size())
    throw std::invalid_argument("davies_bouldin: length mismatch");
  std::map<std::string, std::vector<int>> groups;
  for (std::size_t i = 0; i < labels.size(); ++i)
    groups[labels[i]].push_back(static_cast<int>(i));
  if (groups.size() < 2)
    throw std::invalid_argument("davies_bouldin: need >= 2 classes");

  std::vector<Eigen::VectorXd> centroids;
  std::vector<double> scatter;
  for (const auto& [cls, members] : groups) {
    Eigen::VectorXd c = Eigen::VectorXd::Zero(features.front().size());
    for (int i : members) c += features[i];
    c /= static_cast<double>(members.size());
    double s = 0.0;
    for (int i : members) s += (features[i] - c).norm();
    centroids.push_back(c);
    scatter.push_back(s / members.size());
  }

  const int k = static_cast<int>(centroids.size());
  double total = 0.0;
  for (int i = 0; i < k; ++i) {
    double worst = 0.0;
    for (int j = 0; j < k; ++j) {
      if (i == j) continue;
      double d = (centroids[i] - centroids[j]).norm();
      if (d == 0.0)
        throw NumericError("davies_bouldin: coincident centroids");
      worst = std::max(worst, (scatter[i] + scatter[j]) / d);
    }
    total += worst;
  }
  return total / k;
}

double fowlkes_mallows(const std::vector<std::string>& pred,
                       const std::vector<std::string>& gold) {
  if (pred.size() != gold.size())
    throw std::invalid_argument("fowlkes_mallows: length mismatch");
  if (pred.size() < 2)
    throw std::invalid_argument("fowlkes_mallows: need >= 2 points");

  // Contingency counts: n_pg per (pred, gold) cell, plus marginals.
  std::map<std::pair<std::string, std::string>, long long> cells;
  std::map<std::string, long long> pred_sizes, gold_sizes;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    ++cells[{pred[i], gold[i]}];
    ++pred_sizes[pred[i]];
    ++gold_sizes[gold[i]];
  }
  auto choose2 = [](long long n) { return n * (n - 1) / 2; };
  long long tp = 0;
  for (const auto& [_, n] : cells) tp += choose2(n);
  long long pred_pairs = 0, gold_pairs = 0;
  for (const auto& [_, n] : pred_sizes) pred_pairs += choose2(n);
  for (const auto& [_, n] : gold_sizes) gold_pairs += choose2(n);
  if (tp == 0) return 0.0;
  long long fp = pred_pairs - tp;
  long long fn = gold_pairs - tp;
  return static_cast<double>(tp) /
         std::sqrt(static_cast<double>(tp + fp) * static_cast<double>(tp + fn));
}

namespace {
json trace_json(const LossTrace& t) {
  json j;
  j["ce"] = t.ce;
  j["dis"] = t.dis;
  j["enc"] = t.enc;
  j["entropy"] = t.entropy;
  j["lambda"] = t.lambda;
  return j;
}

LossTrace trace_from_json(const json& j) {
  LossTrace t;
  t.ce = j.at("ce").get<std::vector<double>>();
  t.dis = j.at("dis").get<std::vector<double>>();
  t.enc = j.at("enc").get<std::vector<double>>();
  t.entropy = j.at("entropy").get<std::vector<double>>();
  t.lambda = j.at("lambda").get<std::vector<double>>();
  return t;
}
}  // namespace

void save_report(const RunReport& r, const std::string& json_path) {
  json j;
  j["format"] = "dafec-report-v1";
  j["setting"] = {{"way", r.way}, {"shot", r.shot}};
  j["accuracy_mean"] = r.accuracy_mean;
  j["accuracy_std"] = r.accuracy_std;
  if (r.dbi)
    j["dbi"] = *r.dbi;
  else
    j["dbi"] = nullptr;
  if (r.fmi)
    j["fmi"] = *r.fmi;
  else
    j["fmi"] = nullptr;
  j["episode_accuracies"] = r.episode_accuracies;
  j["extractor_trace"] = trace_json(r.extractor_trace);
  j["classifier_trace"] = trace_json(r.classifier_trace);
  j["stage_log"] = r.stage_log;
  j["config"] = r.config;
  j["seed"] = r.seed;
  std::ofstream os(json_path);
  if (!os) throw DataError("report: cannot open for writing: " + json_path);
  os << j.dump(2) << "\n";
}

RunReport load_report(const std::string& json_path) {
  std::ifstream is(json_path);
  if (!is) throw DataError("report: cannot open: " + json_path);
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw DataError("report: " + json_path + ": " + e.what());
  }
  RunReport r;
  r.way = j.at("setting").at("way").get<int>();
  r.shot = j.at("setting").at("shot").get<int>();
  r.accuracy_mean = j.at("accuracy_mean").get<double>();
  r.accuracy_std = j.at("accuracy_std").get<double>();
  if (!j.at("dbi").is_null()) r.dbi = j.at("dbi").get<double>();
  if (!j.at("fmi").is_null()) r.fmi = j.at("fmi").get<double>();
  r.episode_accuracies = j.at("episode_accuracies").get<std::vector<double>>();
  r.extractor_trace = trace_from_json(j.at("extractor_trace"));
  r.classifier_trace = trace_from_json(j.at("classifier_trace"));
  r.stage_log = j.at("stage_log").get<std::vector<std::string>>();
  r.config = j.at("config").get<std::map<std::string, std::string>>();
  r.seed = j.at("seed").get<std::uint64_t>();
  return r;
}

void save_episode_csv(const RunReport& r, const std::string& csv_path) {
  std::ofstream os(csv_path);
  if (!os) throw DataError("report: cannot open for writing: " + csv_path);
  os << "episode,accuracy\n";
  os.precision(17);
  for (std::size_t i = 0; i < r.episode_accuracies.size(); ++i)
    os << i << "," << r.episode_accuracies[i] << "\n";
}

std::map<std::string, std::string> load_gold_sidecar(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("gold sidecar: cannot open: " + path);
  std::map<std::string, std::string> gold;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      json rec = json::parse(line);
      gold[rec.at("id").get<std::string>()] = rec.at("label").get<std::string>();
    } catch (const json::exception& e) {
      throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return gold;
}

std::string gold_sidecar_path(const std::string& dataset_path) {
  const std::string suffix = ".jsonl";
  if (dataset_path.size() > suffix.size() &&
      dataset_path.compare(dataset_path.size() - suffix.size(), suffix.size(),
                           suffix) == 0)
    return dataset_path.substr(0, dataset_path.size() - suffix.size()) +
           ".gold.jsonl";
  return dataset_path + ".gold";
}

}  // namespace dafec::metrics
