#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "dafec/losses.hpp"
#include "dafec/synth.hpp"

namespace dafec::config {

using KvMap = std::map<std::string, std::string>;

// Flat `key = value` file; '#' starts a comment.
KvMap load_kv_file(const std::string& path);
void save_kv_file(const KvMap& kv, const std::string& path);

struct TrainConfig {
  int way = 5;
  int shot = 1;
  int query_per_class = 5;
  double tau = 2.0;
  int anneal_horizon = 6000;  // T
  losses::AnnealMode anneal_mode = losses::AnnealMode::kCosine;
  double constant_lambda = 0.5;
  bool eq9_literal = false;
  losses::EntropySign entropy_sign = losses::EntropySign::kAsWritten;
  int clusters = 10;  // N-tilde
  double lr = 0.1;
  int total_iters = 10000;
  int eval_episodes = 1000;
  int feature_dim = 32;
  int hidden_dim = 64;
  int disc_hidden_dim = 32;
  int kmeans_max_iter = 300;
  double kmeans_tol = 1e-6;
  int kmeans_restarts = 10;
  std::uint64_t seed = 1;
  bool no_pseudo = false;
  bool no_cpm_s = false;
  bool no_cpm_a = false;
  bool no_cpm_c = false;
  bool warm_start_classifier = false;
  bool early_stop = false;  // plateau on L_CE: 500 iters, 1e-4 threshold

  losses::AnnealSchedule schedule() const;
  KvMap to_map() const;
  static TrainConfig from_map(const KvMap& kv);
};

synth::SyntheticSpec synthetic_from_map(const KvMap& kv);
KvMap synthetic_to_map(const synth::SyntheticSpec& spec);

}  // namespace dafec::config
