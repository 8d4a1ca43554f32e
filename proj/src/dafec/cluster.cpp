#include "dafec/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

#include "dafec/errors.hpp"

namespace dafec::cluster {

namespace {

int nearest_centroid(const Eigen::VectorXd& x,
                     const std::vector<Eigen::VectorXd>& centroids) {
  int best = 0;
  double best_d = (x - centroids[0]).squaredNorm();
  for (int c = 1; c < static_cast<int>(centroids.size()); ++c) {
    double d = (x - centroids[c]).squaredNorm();
    if (d < best_d) {  // strict: ties keep the lowest index
      best_d = d;
      best = c;
    }
  }
  return best;
}

// Weighted draw proportional to `weights` (k-means++ seeding).
int weighted_draw(const std::vector<double>& weights, double total,
                  sampling::Rng& rng) {
  double u = (static_cast<double>(rng()) /
              static_cast<double>(sampling::Rng::max())) * total;
  double acc = 0.0;
  for (int i = 0; i < static_cast<int>(weights.size()); ++i) {
    acc += weights[i];
    if (u <= acc) return i;
  }
  return static_cast<int>(weights.size()) - 1;
}

std::vector<Eigen::VectorXd> kmeanspp_seed(
    const std::vector<std::pair<std::string, Eigen::VectorXd>>& features, int k,
    sampling::Rng& rng) {
  std::vector<Eigen::VectorXd> centroids;
  centroids.push_back(features[sampling::uniform_index(
                                   rng, static_cast<int>(features.size()))]
                          .second);
  std::vector<double> d2(features.size());
  while (static_cast<int>(centroids.size()) < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < features.size(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : centroids)
        best = std::min(best, (features[i].second - c).squaredNorm());
      d2[i] = best;
      total += best;
    }
    if (total == 0.0) {
      // All remaining mass on existing centroids; any point works.
      centroids.push_back(
          features[sampling::uniform_index(rng, static_cast<int>(features.size()))]
              .second);
    } else {
      centroids.push_back(features[weighted_draw(d2, total, rng)].second);
    }
  }
  return centroids;
}

}  // namespace

ClusterModel kmeans(const std::vector<std::pair<std::string, Eigen::VectorXd>>& features,
                    int k, int max_iter, double tol, sampling::Rng& rng) {
  if (features.empty()) throw std::invalid_argument("kmeans: empty input");
  if (k < 1) throw std::invalid_argument("kmeans: k must be >= 1");
  if (max_iter < 1) throw std::invalid_argument("kmeans: max_iter must be >= 1");
  if (tol < 0.0) throw std::invalid_argument("kmeans: tol must be >= 0");
  {
    std::set<std::vector<double>> distinct;
    for (const auto& [id, f] : features)
      distinct.insert({f.data(), f.data() + f.size()});
    if (static_cast<int>(distinct.size()) < k)
      throw std::invalid_argument("kmeans: fewer distinct points than clusters");
  }

  const int n = static_cast<int>(features.size());
  const Eigen::Index dim = features.front().second.size();
  auto centroids = kmeanspp_seed(features, k, rng);
  std::vector<int> assign(n, 0);

  ClusterModel cm;
  cm.k = k;
  double prev_inertia = std::numeric_limits<double>::infinity();
  for (int it = 0; it < max_iter; ++it) {
    double inertia = 0.0;
    for (int i = 0; i < n; ++i) {
      assign[i] = nearest_centroid(features[i].second, centroids);
      inertia += (features[i].second - centroids[assign[i]]).squaredNorm();
    }
    if (inertia > prev_inertia + 1e-9)
      throw NumericError("kmeans: inertia increased across Lloyd iterations");
    cm.inertia_history.push_back(inertia);
    prev_inertia = inertia;

    std::vector<Eigen::VectorXd> next(k, Eigen::VectorXd::Zero(dim));
    std::vector<int> counts(k, 0);
    for (int i = 0; i < n; ++i) {
      next[assign[i]] += features[i].second;
      ++counts[assign[i]];
    }
    double movement = 0.0;
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        next[c] /= static_cast<double>(counts[c]);
      } else {
        // Reseed at the point farthest from its assigned centroid.
        int far = 0;
        double far_d = -1.0;
        for (int i = 0; i < n; ++i) {
          double d = (features[i].second - centroids[assign[i]]).squaredNorm();
          if (d > far_d) {
            far_d = d;
            far = i;
          }
        }
        next[c] = features[far].second;
        // Movement forced past tol so the repaired run keeps iterating, and
        // the monotonicity check restarts from the repaired configuration.
        movement = std::numeric_limits<double>::infinity();
        prev_inertia = std::numeric_limits<double>::infinity();
      }
      if (std::isfinite(movement))
        movement = std::max(movement, std::sqrt((next[c] - centroids[c]).squaredNorm()));
      centroids[c] = next[c];
    }
    if (movement < tol && it > 0) break;
  }

  // Single-point refinement: move a point to another cluster when the
  // inertia delta (with both centroids shifting) is negative. This escapes
  // partition-level local optima that batch reassignment cannot leave.
  {
    std::vector<int> counts(k, 0);
    std::vector<Eigen::VectorXd> sums(k, Eigen::VectorXd::Zero(dim));
    for (int i = 0; i < n; ++i) {
      assign[i] = nearest_centroid(features[i].second, centroids);
      ++counts[assign[i]];
      sums[assign[i]] += features[i].second;
    }
    for (int c = 0; c < k; ++c)
      if (counts[c] > 0) centroids[c] = sums[c] / counts[c];
    for (int pass = 0; pass < 100; ++pass) {
      bool moved = false;
      for (int i = 0; i < n; ++i) {
        int a = assign[i];
        if (counts[a] <= 1) continue;
        const Eigen::VectorXd& x = features[i].second;
        double removal = counts[a] / (counts[a] - 1.0) * (x - centroids[a]).squaredNorm();
        int best_b = -1;
        double best_gain = removal - 1e-12;
        for (int b = 0; b < k; ++b) {
          if (b == a) continue;
          double gain = counts[b] / (counts[b] + 1.0) * (x - centroids[b]).squaredNorm();
          if (gain < best_gain) {
            best_gain = gain;
            best_b = b;
          }
        }
        if (best_b >= 0) {
          sums[a] -= x;
          --counts[a];
          centroids[a] = sums[a] / counts[a];
          sums[best_b] += x;
          ++counts[best_b];
          centroids[best_b] = sums[best_b] / counts[best_b];
          assign[i] = best_b;
          moved = true;
        }
      }
      if (!moved) break;
    }
  }

  // Final assignment against the converged centroids.
  cm.centroids = centroids;
  cm.inertia = 0.0;
  for (int i = 0; i < n; ++i) {
    int c = nearest_centroid(features[i].second, centroids);
    cm.assignments[features[i].first] = c;
    cm.inertia += (features[i].second - centroids[c]).squaredNorm();
  }
  cm.inertia_history.push_back(cm.inertia);
  return cm;
}

ClusterModel kmeans_restarts(
    const std::vector<std::pair<std::string, Eigen::VectorXd>>& features, int k,
    int max_iter, double tol, sampling::Rng& rng, int restarts) {
  if (restarts < 1) throw std::invalid_argument("kmeans_restarts: restarts must be >= 1");
  ClusterModel best;
  bool have = false;
  for (int r = 0; r < restarts; ++r) {
    ClusterModel cm = kmeans(features, k, max_iter, tol, rng);
    if (!have || cm.inertia < best.inertia) {
      best = std::move(cm);
      have = true;
    }
  }
  return best;
}

std::string pseudo_class_id(int cluster_index) {
  return "pseudo::" + std::to_string(cluster_index);
}

sampling::Dataset assign_pseudo_labels(const ClusterModel& cm,
                                       const sampling::Dataset& target) {
  std::vector<sampling::Instance> out;
  out.reserve(target.size());
  for (const auto& inst : target.instances()) {
    auto it = cm.assignments.find(inst.id);
    if (it == cm.assignments.end())
      throw DataError("assign_pseudo_labels: no cluster for instance " + inst.id);
    sampling::Instance relabeled = inst;
    relabeled.label = pseudo_class_id(it->second);
    out.push_back(std::move(relabeled));
  }
  return sampling::Dataset(std::move(out));
}

void save_cluster_dump(const ClusterModel& cm, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw DataError("cluster dump: cannot open for writing: " + path);
  os.precision(17);
  os << "dafec-clusters v1\n";
  os << "k " << cm.k << "\n";
  os << "inertia " << cm.inertia << "\n";
  for (int c = 0; c < static_cast<int>(cm.centroids.size()); ++c) {
    os << "centroid " << c;
    for (Eigen::Index i = 0; i < cm.centroids[c].size(); ++i)
      os << " " << cm.centroids[c][i];
    os << "\n";
  }
  // Deterministic order for byte-stable artifacts.
  std::vector<std::pair<std::string, int>> rows(cm.assignments.begin(),
                                                cm.assignments.end());
  std::sort(rows.begin(), rows.end());
  for (const auto& [id, c] : rows) os << "assign " << id << " " << c << "\n";
}

ClusterModel load_cluster_dump(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cluster dump: cannot open: " + path);
  std::string magic, version;
  is >> magic >> version;
  if (magic != "dafec-clusters" || version != "v1")
    throw DataError("cluster dump: unrecognized header in " + path);
  ClusterModel cm;
  std::string tag;
  while (is >> tag) {
    if (tag == "k") {
      is >> cm.k;
    } else if (tag == "inertia") {
      is >> cm.inertia;
    } else if (tag == "centroid") {
      int idx;
      is >> idx;
      std::string rest;
      std::getline(is, rest);
      std::istringstream ls(rest);
      std::vector<double> vals;
      double v;
      while (ls >> v) vals.push_back(v);
      Eigen::VectorXd c(vals.size());
      for (std::size_t i = 0; i < vals.size(); ++i)
        c[static_cast<Eigen::Index>(i)] = vals[i];
      if (idx != static_cast<int>(cm.centroids.size()))
        throw DataError("cluster dump: out-of-order centroid in " + path);
      cm.centroids.push_back(std::move(c));
    } else if (tag == "assign") {
      std::string id;
      int c;
      is >> id >> c;
      cm.assignments[id] = c;
    } else {
      throw DataError("cluster dump: unknown record '" + tag + "' in " + path);
    }
  }
  return cm;
}

}  // namespace dafec::cluster
