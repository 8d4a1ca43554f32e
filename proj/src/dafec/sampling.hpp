#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace dafec::sampling {

using Rng = std::mt19937_64;

enum class Domain { kSource, kTarget };

std::string domain_name(Domain d);
Domain parse_domain(const std::string& s);

struct Instance {
  std::string id;
  Eigen::VectorXd features;
  std::optional<std::string> label;
  Domain domain = Domain::kSource;
};

// Immutable after construction; class_index maps label -> instance indices.
class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(std::vector<Instance> instances);

  const std::vector<Instance>& instances() const { return instances_; }
  const Instance& at(int i) const { return instances_.at(i); }
  int size() const { return static_cast<int>(instances_.size()); }
  int dim() const { return dim_; }
  // Ordered for deterministic iteration.
  const std::map<std::string, std::vector<int>>& class_index() const {
    return class_index_;
  }
  std::vector<std::string> class_ids() const;

 private:
  std::vector<Instance> instances_;
  std::map<std::string, std::vector<int>> class_index_;
  int dim_ = 0;
};

// N-way-K-shot episode; entries are indices into the source dataset.
struct Episode {
  int way = 0;
  int shot = 0;
  int query_per_class = 0;
  std::vector<std::string> classes;
  std::vector<std::vector<int>> support;  // [way][shot]
  std::vector<std::vector<int>> query;    // [way][query_per_class]
};

// Classes uniform without replacement, then instances per class uniform
// without replacement: first K to support, next M to query.
Episode sample_episode(const Dataset& ds, int way, int shot, int query_per_class,
                       Rng& rng);

// Uniform without replacement over the whole dataset; returns indices.
std::vector<int> sample_unlabeled(const Dataset& ds, int size, Rng& rng);

// Union of instances; label spaces must be disjoint.
Dataset merge_datasets(const Dataset& source, const Dataset& pseudo);

// Newline-delimited JSON records: {"id","domain","label","features"}.
Dataset load_dataset(const std::string& path);
void save_dataset(const Dataset& ds, const std::string& path);

// Uniform draw in [0, n) without the library distribution's unspecified
// state handling; used everywhere sampling must be reproducible.
int uniform_index(Rng& rng, int n);

// Splitmix-style seed derivation for independent substreams.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace dafec::sampling
