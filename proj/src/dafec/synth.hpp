#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "dafec/sampling.hpp"

namespace dafec::synth {

// Two-domain Gaussian-blob benchmark. Target classes live in an affinely
// transformed copy of the source space (rotation + translation); a
// shared_fraction of them are transformed source classes, the rest fresh.
struct SyntheticSpec {
  int d_in = 16;
  int source_classes = 8;
  int target_classes = 6;
  double shared_fraction = 0.5;
  int samples_per_class = 60;
  double class_separation = 6.0;  // in units of noise_sigma
  double noise_sigma = 1.0;
  double rotation_angle = 0.7;      // radians, applied in consecutive planes
  double translation_magnitude = 8.0;
  double test_fraction = 1.0 / 3.0;  // per-target-class split into the test set
  std::uint64_t seed = 1;
};

struct SyntheticData {
  sampling::Dataset source;            // labeled, domain source
  sampling::Dataset target_unlabeled;  // labels stripped
  sampling::Dataset target_test;       // labeled, class ids disjoint from source
  std::map<std::string, std::string> gold;  // hidden labels of the unlabeled pool
};

SyntheticData generate_synthetic(const SyntheticSpec& spec);

// Writes source.jsonl, target_unlabeled.jsonl, target_unlabeled.gold.jsonl
// and target_test.jsonl under out_dir.
void write_synthetic(const SyntheticData& data, const std::string& out_dir);

}  // namespace dafec::synth
