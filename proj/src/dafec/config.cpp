#include "dafec/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "dafec/errors.hpp"

namespace dafec::config {

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? "" : s.substr(b, e - b + 1);
}

int get_int(const KvMap& kv, const std::string& key, int fallback) {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  try {
    return std::stoi(it->second);
  } catch (const std::exception&) {
    throw std::invalid_argument("config: bad integer for " + key + ": " + it->second);
  }
}

double get_double(const KvMap& kv, const std::string& key, double fallback) {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  try {
    return std::stod(it->second);
  } catch (const std::exception&) {
    throw std::invalid_argument("config: bad number for " + key + ": " + it->second);
  }
}

std::uint64_t get_u64(const KvMap& kv, const std::string& key, std::uint64_t fallback) {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  try {
    return std::stoull(it->second);
  } catch (const std::exception&) {
    throw std::invalid_argument("config: bad seed for " + key + ": " + it->second);
  }
}

bool get_bool(const KvMap& kv, const std::string& key, bool fallback) {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  if (it->second == "true" || it->second == "1") return true;
  if (it->second == "false" || it->second == "0") return false;
  throw std::invalid_argument("config: bad boolean for " + key + ": " + it->second);
}

std::string bool_str(bool b) { return b ? "true" : "false"; }

}  // namespace

KvMap load_kv_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("config: cannot open: " + path);
  KvMap kv;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw DataError(path + ":" + std::to_string(lineno) + ": expected key = value");
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

void save_kv_file(const KvMap& kv, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw DataError("config: cannot open for writing: " + path);
  for (const auto& [k, v] : kv) os << k << " = " << v << "\n";
}

losses::AnnealSchedule TrainConfig::schedule() const {
  losses::AnnealSchedule s;
  s.mode = no_cpm_c ? losses::AnnealMode::kConstant : anneal_mode;
  s.horizon = anneal_horizon;
  s.lambda0 = constant_lambda;
  s.literal = eq9_literal;
  return s;
}

KvMap TrainConfig::to_map() const {
  KvMap kv;
  kv["n"] = std::to_string(way);
  kv["k"] = std::to_string(shot);
  kv["m"] = std::to_string(query_per_class);
  kv["tau"] = std::to_string(tau);
  kv["anneal_T"] = std::to_string(anneal_horizon);
  kv["anneal"] = anneal_mode == losses::AnnealMode::kCosine     ? "cosine"
                 : anneal_mode == losses::AnnealMode::kLinear   ? "linear"
                                                                : "constant";
  kv["constant_lambda"] = std::to_string(constant_lambda);
  kv["eq9_literal"] = bool_str(eq9_literal);
  kv["entropy_sign"] =
      entropy_sign == losses::EntropySign::kAsWritten ? "as_written" : "negated";
  kv["clusters"] = std::to_string(clusters);
  kv["lr"] = std::to_string(lr);
  kv["iters"] = std::to_string(total_iters);
  kv["episodes"] = std::to_string(eval_episodes);
  kv["feature_dim"] = std::to_string(feature_dim);
  kv["hidden_dim"] = std::to_string(hidden_dim);
  kv["disc_hidden_dim"] = std::to_string(disc_hidden_dim);
  kv["kmeans_max_iter"] = std::to_string(kmeans_max_iter);
  kv["kmeans_tol"] = std::to_string(kmeans_tol);
  kv["kmeans_restarts"] = std::to_string(kmeans_restarts);
  kv["seed"] = std::to_string(seed);
  kv["no_pseudo"] = bool_str(no_pseudo);
  kv["no_cpm_s"] = bool_str(no_cpm_s);
  kv["no_cpm_a"] = bool_str(no_cpm_a);
  kv["no_cpm_c"] = bool_str(no_cpm_c);
  kv["warm_start_classifier"] = bool_str(warm_start_classifier);
  kv["early_stop"] = bool_str(early_stop);
  return kv;
}

TrainConfig TrainConfig::from_map(const KvMap& kv) {
  TrainConfig c;
  c.way = get_int(kv, "n", c.way);
  c.shot = get_int(kv, "k", c.shot);
  c.query_per_class = get_int(kv, "m", c.query_per_class);
  c.tau = get_double(kv, "tau", c.tau);
  c.anneal_horizon = get_int(kv, "anneal_T", c.anneal_horizon);
  if (auto it = kv.find("anneal"); it != kv.end()) {
    if (it->second == "cosine")
      c.anneal_mode = losses::AnnealMode::kCosine;
    else if (it->second == "linear")
      c.anneal_mode = losses::AnnealMode::kLinear;
    else if (it->second == "constant")
      c.anneal_mode = losses::AnnealMode::kConstant;
    else
      throw std::invalid_argument("config: unknown anneal mode: " + it->second);
  }
  c.constant_lambda = get_double(kv, "constant_lambda", c.constant_lambda);
  c.eq9_literal = get_bool(kv, "eq9_literal", c.eq9_literal);
  if (auto it = kv.find("entropy_sign"); it != kv.end()) {
    if (it->second == "as_written")
      c.entropy_sign = losses::EntropySign::kAsWritten;
    else if (it->second == "negated")
      c.entropy_sign = losses::EntropySign::kNegated;
    else
      throw std::invalid_argument("config: unknown entropy_sign: " + it->second);
  }
  c.clusters = get_int(kv, "clusters", c.clusters);
  c.lr = get_double(kv, "lr", c.lr);
  c.total_iters = get_int(kv, "iters", c.total_iters);
  c.eval_episodes = get_int(kv, "episodes", c.eval_episodes);
  c.feature_dim = get_int(kv, "feature_dim", c.feature_dim);
  c.hidden_dim = get_int(kv, "hidden_dim", c.hidden_dim);
  c.disc_hidden_dim = get_int(kv, "disc_hidden_dim", c.disc_hidden_dim);
  c.kmeans_max_iter = get_int(kv, "kmeans_max_iter", c.kmeans_max_iter);
  c.kmeans_tol = get_double(kv, "kmeans_tol", c.kmeans_tol);
  c.kmeans_restarts = get_int(kv, "kmeans_restarts", c.kmeans_restarts);
  c.seed = get_u64(kv, "seed", c.seed);
  c.no_pseudo = get_bool(kv, "no_pseudo", c.no_pseudo);
  c.no_cpm_s = get_bool(kv, "no_cpm_s", c.no_cpm_s);
  c.no_cpm_a = get_bool(kv, "no_cpm_a", c.no_cpm_a);
  c.no_cpm_c = get_bool(kv, "no_cpm_c", c.no_cpm_c);
  c.warm_start_classifier = get_bool(kv, "warm_start_classifier", c.warm_start_classifier);
  c.early_stop = get_bool(kv, "early_stop", c.early_stop);
  if (c.way < 2 || c.shot < 1 || c.query_per_class < 1)
    throw std::invalid_argument("config: episode shape must satisfy n >= 2, k >= 1, m >= 1");
  if (c.tau <= 0.0) throw std::invalid_argument("config: tau must be > 0");
  if (c.anneal_horizon < 1) throw std::invalid_argument("config: anneal_T must be >= 1");
  if (c.lr <= 0.0) throw std::invalid_argument("config: lr must be > 0");
  if (c.clusters < 1) throw std::invalid_argument("config: clusters must be >= 1");
  return c;
}

synth::SyntheticSpec synthetic_from_map(const KvMap& kv) {
  synth::SyntheticSpec s;
  s.d_in = get_int(kv, "d_in", s.d_in);
  s.source_classes = get_int(kv, "source_classes", s.source_classes);
  s.target_classes = get_int(kv, "target_classes", s.target_classes);
  s.shared_fraction = get_double(kv, "shared_fraction", s.shared_fraction);
  s.samples_per_class = get_int(kv, "samples_per_class", s.samples_per_class);
  s.class_separation = get_double(kv, "class_separation", s.class_separation);
  s.noise_sigma = get_double(kv, "noise_sigma", s.noise_sigma);
  s.rotation_angle = get_double(kv, "rotation_angle", s.rotation_angle);
  s.translation_magnitude =
      get_double(kv, "translation_magnitude", s.translation_magnitude);
  s.test_fraction = get_double(kv, "test_fraction", s.test_fraction);
  s.seed = get_u64(kv, "seed", s.seed);
  return s;
}

KvMap synthetic_to_map(const synth::SyntheticSpec& s) {
  KvMap kv;
  kv["d_in"] = std::to_string(s.d_in);
  kv["source_classes"] = std::to_string(s.source_classes);
  kv["target_classes"] = std::to_string(s.target_classes);
  kv["shared_fraction"] = std::to_string(s.shared_fraction);
  kv["samples_per_class"] = std::to_string(s.samples_per_class);
  kv["class_separation"] = std::to_string(s.class_separation);
  kv["noise_sigma"] = std::to_string(s.noise_sigma);
  kv["rotation_angle"] = std::to_string(s.rotation_angle);
  kv["translation_magnitude"] = std::to_string(s.translation_magnitude);
  kv["test_fraction"] = std::to_string(s.test_fraction);
  kv["seed"] = std::to_string(s.seed);
  return kv;
}

}  // namespace dafec::config
