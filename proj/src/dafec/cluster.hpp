#pragma once

#include <Eigen/Dense>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dafec/sampling.hpp"

namespace dafec::cluster {

struct ClusterModel {
  int k = 0;
  std::vector<Eigen::VectorXd> centroids;
  std::unordered_map<std::string, int> assignments;  // instance id -> cluster
  double inertia = 0.0;
  std::vector<double> inertia_history;  // per Lloyd iteration, audit only
};

// One Lloyd run with k-means++ seeding. Assignment ties break to the lowest
// cluster index; empty clusters are reseeded at the point farthest from its
// assigned centroid.
ClusterModel kmeans(const std::vector<std::pair<std::string, Eigen::VectorXd>>& features,
                    int k, int max_iter, double tol, sampling::Rng& rng);

// Best of `restarts` runs by inertia.
ClusterModel kmeans_restarts(
    const std::vector<std::pair<std::string, Eigen::VectorXd>>& features, int k,
    int max_iter, double tol, sampling::Rng& rng, int restarts);

// Reserved namespace keeps pseudo ids disjoint from any source class id.
std::string pseudo_class_id(int cluster_index);

// Relabel every target instance with its cluster's pseudo class id.
sampling::Dataset assign_pseudo_labels(const ClusterModel& cm,
                                       const sampling::Dataset& target);

// Textual audit dump: centroid table plus id -> cluster lines.
void save_cluster_dump(const ClusterModel& cm, const std::string& path);
ClusterModel load_cluster_dump(const std::string& path);

}  // namespace dafec::cluster
