#include "dafec/synth.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <random>
#include <stdexcept>

#include "dafec/errors.hpp"

namespace dafec::synth {

namespace {

using sampling::Rng;

Eigen::VectorXd gaussian(Eigen::Index d, double sigma, Rng& rng) {
  std::normal_distribution<double> n(0.0, sigma);
  Eigen::VectorXd v(d);
  for (Eigen::Index i = 0; i < d; ++i) v[i] = n(rng);
  return v;
}

// Centroids drawn uniformly in a cube, rejecting candidates closer than the
// configured separation to anything already placed.
Eigen::VectorXd place_centroid(const std::vector<Eigen::VectorXd>& existing,
                               Eigen::Index d, double separation, Rng& rng) {
  double half = std::max(separation * 1.5, separation);
  std::uniform_real_distribution<double> u(-half, half);
  for (int attempt = 0; attempt < 100000; ++attempt) {
    Eigen::VectorXd c(d);
    for (Eigen::Index i = 0; i < d; ++i) c[i] = u(rng);
    bool ok = true;
    for (const auto& e : existing)
      if ((c - e).norm() < separation) {
        ok = false;
        break;
      }
    if (ok) return c;
  }
  throw std::invalid_argument("generate_synthetic: cannot place centroids at requested separation");
}

// Proper rotation: Givens rotations by the same angle in consecutive
// coordinate planes (0,1), (2,3), ...
Eigen::MatrixXd rotation_matrix(Eigen::Index d, double angle) {
  Eigen::MatrixXd r = Eigen::MatrixXd::Identity(d, d);
  double c = std::cos(angle), s = std::sin(angle);
  for (Eigen::Index i = 0; i + 1 < d; i += 2) {
    Eigen::MatrixXd g = Eigen::MatrixXd::Identity(d, d);
    g(i, i) = c;
    g(i, i + 1) = -s;
    g(i + 1, i) = s;
    g(i + 1, i + 1) = c;
    r = g * r;
  }
  return r;
}

}  // namespace

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  if (spec.d_in < 1) throw std::invalid_argument("generate_synthetic: d_in must be >= 1");
  if (spec.source_classes < 2 || spec.target_classes < 2)
    throw std::invalid_argument("generate_synthetic: class counts must be >= 2");
  if (spec.shared_fraction < 0.0 || spec.shared_fraction > 1.0)
    throw std::invalid_argument("generate_synthetic: shared_fraction outside [0,1]");
  if (spec.noise_sigma <= 0.0)
    throw std::invalid_argument("generate_synthetic: noise_sigma must be > 0");
  if (spec.samples_per_class < 2)
    throw std::invalid_argument("generate_synthetic: samples_per_class must be >= 2");
  int shared = static_cast<int>(std::lround(spec.shared_fraction * spec.target_classes));
  if (shared > spec.source_classes)
    throw std::invalid_argument(
        "generate_synthetic: shared target classes exceed source classes");

  Rng rng(spec.seed);
  const Eigen::Index d = spec.d_in;
  const double sep = spec.class_separation * spec.noise_sigma;

  std::vector<Eigen::VectorXd> source_centroids;
  for (int c = 0; c < spec.source_classes; ++c)
    source_centroids.push_back(place_centroid(source_centroids, d, sep, rng));

  Eigen::MatrixXd rot = rotation_matrix(d, spec.rotation_angle);
  Eigen::VectorXd shift = gaussian(d, 1.0, rng);
  if (shift.norm() > 0.0) shift *= spec.translation_magnitude / shift.norm();

  // Shared target classes reuse the first `shared` source centroids under the
  // domain transform; the rest are fresh blobs placed in source space first,
  // then transformed.
  std::vector<Eigen::VectorXd> target_centroids;
  std::vector<Eigen::VectorXd> placement = source_centroids;
  for (int c = 0; c < spec.target_classes; ++c) {
    Eigen::VectorXd base;
    if (c < shared) {
      base = source_centroids[c];
    } else {
      base = place_centroid(placement, d, sep, rng);
      placement.push_back(base);
    }
    target_centroids.push_back(rot * base + shift);
  }

  std::vector<sampling::Instance> source_instances;
  for (int c = 0; c < spec.source_classes; ++c) {
    std::string cls = "src::c" + std::to_string(c);
    for (int s = 0; s < spec.samples_per_class; ++s) {
      sampling::Instance inst;
      inst.id = cls + "::s" + std::to_string(s);
      inst.features = source_centroids[c] + gaussian(d, spec.noise_sigma, rng);
      inst.label = cls;
      inst.domain = sampling::Domain::kSource;
      source_instances.push_back(std::move(inst));
    }
  }

  std::vector<sampling::Instance> pool_instances, test_instances;
  std::map<std::string, std::string> gold;
  int test_n = static_cast<int>(std::lround(spec.test_fraction * spec.samples_per_class));
  for (int c = 0; c < spec.target_classes; ++c) {
    std::string cls = "tgt::c" + std::to_string(c);
    for (int s = 0; s < spec.samples_per_class; ++s) {
      sampling::Instance inst;
      inst.id = cls + "::s" + std::to_string(s);
      inst.features = target_centroids[c] + gaussian(d, spec.noise_sigma, rng);
      inst.domain = sampling::Domain::kTarget;
      if (s < test_n) {
        inst.label = cls;
        test_instances.push_back(std::move(inst));
      } else {
        gold[inst.id] = cls;
        inst.label.reset();
        pool_instances.push_back(std::move(inst));
      }
    }
  }

  SyntheticData out;
  out.source = sampling::Dataset(std::move(source_instances));
  out.target_unlabeled = sampling::Dataset(std::move(pool_instances));
  out.target_test = sampling::Dataset(std::move(test_instances));
  out.gold = std::move(gold);
  return out;
}

void write_synthetic(const SyntheticData& data, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  fs::path dir(out_dir);
  sampling::save_dataset(data.source, (dir / "source.jsonl").string());
  sampling::save_dataset(data.target_unlabeled,
                         (dir / "target_unlabeled.jsonl").string());
  sampling::save_dataset(data.target_test, (dir / "target_test.jsonl").string());
  std::ofstream os(dir / "target_unlabeled.gold.jsonl");
  if (!os) throw DataError("generate_synthetic: cannot write gold sidecar");
  for (const auto& [id, label] : data.gold) {
    nlohmann::json rec;
    rec["id"] = id;
    rec["label"] = label;
    os << rec.dump() << "\n";
  }
}

}  // namespace dafec::synth
