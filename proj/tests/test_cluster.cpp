#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <vector>

#include "dafec/cluster.hpp"
#include "dafec/errors.hpp"
#include "dafec/numerics.hpp"

using namespace dafec;
using Eigen::VectorXd;

namespace {

using Features = std::vector<std::pair<std::string, VectorXd>>;

Features make_points(const std::vector<std::vector<double>>& coords) {
  Features f;
  for (std::size_t i = 0; i < coords.size(); ++i) {
    VectorXd v(static_cast<int>(coords[i].size()));
    for (std::size_t j = 0; j < coords[i].size(); ++j) v[static_cast<int>(j)] = coords[i][j];
    f.emplace_back("p" + std::to_string(i), v);
  }
  return f;
}

// Exact optimum by enumerating every assignment of n points to k clusters.
double exhaustive_best_inertia(const Features& pts, int k) {
  int n = static_cast<int>(pts.size());
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> assign(n, 0);
  long long total = 1;
  for (int i = 0; i < n; ++i) total *= k;
  for (long long code = 0; code < total; ++code) {
    long long c = code;
    for (int i = 0; i < n; ++i) {
      assign[i] = static_cast<int>(c % k);
      c /= k;
    }
    std::vector<VectorXd> sum(k, VectorXd::Zero(pts[0].second.size()));
    std::vector<int> count(k, 0);
    for (int i = 0; i < n; ++i) {
      sum[assign[i]] += pts[i].second;
      count[assign[i]]++;
    }
    bool all_used = true;
    for (int j = 0; j < k; ++j) all_used = all_used && count[j] > 0;
    if (!all_used) continue;
    double inertia = 0.0;
    for (int i = 0; i < n; ++i)
      inertia += numerics::euclidean_sq(pts[i].second, sum[assign[i]] / count[assign[i]]);
    best = std::min(best, inertia);
  }
  return best;
}

}  // namespace

TEST_CASE("k equal to n gives zero inertia") {
  auto pts = make_points({{0, 0}, {5, 1}, {-3, 2}, {8, 8}});
  sampling::Rng rng(1);
  auto cm = cluster::kmeans(pts, 4, 100, 1e-9, rng);
  CHECK(cm.inertia == doctest::Approx(0.0).epsilon(1e-12));
  std::vector<int> seen(4, 0);
  for (const auto& [id, c] : cm.assignments) seen[c]++;
  for (int s : seen) CHECK(s == 1);
}

TEST_CASE("k equal to one recovers the global mean") {
  auto pts = make_points({{0, 0}, {2, 0}, {0, 4}, {2, 4}});
  sampling::Rng rng(2);
  auto cm = cluster::kmeans(pts, 1, 100, 1e-9, rng);
  REQUIRE(cm.centroids.size() == 1);
  CHECK((cm.centroids[0] - Eigen::Vector2d(1.0, 2.0)).norm() < 1e-12);
  // Sum of squared distances to the mean: 4 * (1 + 4) = 20.
  CHECK(cm.inertia == doctest::Approx(20.0).epsilon(1e-12));
}

TEST_CASE("two separated pairs split cleanly") {
  auto pts = make_points({{0, 0}, {0, 1}, {10, 0}, {10, 1}});
  sampling::Rng rng(3);
  auto cm = cluster::kmeans_restarts(pts, 2, 100, 1e-9, rng, 5);
  CHECK(cm.inertia == doctest::Approx(1.0).epsilon(1e-12));
  std::vector<VectorXd> cs = cm.centroids;
  std::sort(cs.begin(), cs.end(), [](const VectorXd& a, const VectorXd& b) { return a[0] < b[0]; });
  CHECK((cs[0] - Eigen::Vector2d(0.0, 0.5)).norm() < 1e-12);
  CHECK((cs[1] - Eigen::Vector2d(10.0, 0.5)).norm() < 1e-12);
  CHECK(cm.assignments.at("p0") == cm.assignments.at("p1"));
  CHECK(cm.assignments.at("p2") == cm.assignments.at("p3"));
  CHECK(cm.assignments.at("p0") != cm.assignments.at("p2"));
}

TEST_CASE("restarts reach the exhaustive optimum on small instances") {
  std::mt19937_64 gen(2718);
  std::normal_distribution<double> d(0.0, 3.0);
  int solved = 0;
  const int trials = 100;
  for (int trial = 0; trial < trials; ++trial) {
    int n = 5 + static_cast<int>(gen() % 4);  // 5..8 points
    int k = 2 + static_cast<int>(gen() % 2);  // 2..3 clusters
    std::vector<std::vector<double>> coords;
    for (int i = 0; i < n; ++i) coords.push_back({d(gen), d(gen)});
    auto pts = make_points(coords);
    double best = exhaustive_best_inertia(pts, k);
    sampling::Rng rng(1000 + trial);
    auto cm = cluster::kmeans_restarts(pts, k, 200, 1e-10, rng, 50);
    if (cm.inertia <= best * (1.0 + 1e-9) + 1e-12) ++solved;
  }
  CHECK(solved == trials);
}

TEST_CASE("inertia history is monotone non-increasing") {
  std::mt19937_64 gen(9);
  std::normal_distribution<double> d(0.0, 5.0);
  std::vector<std::vector<double>> coords;
  for (int i = 0; i < 60; ++i) coords.push_back({d(gen), d(gen), d(gen)});
  auto pts = make_points(coords);
  sampling::Rng rng(4);
  auto cm = cluster::kmeans(pts, 6, 300, 1e-10, rng);
  REQUIRE(!cm.inertia_history.empty());
  for (std::size_t i = 1; i < cm.inertia_history.size(); ++i)
    CHECK(cm.inertia_history[i] <= cm.inertia_history[i - 1] + 1e-9);
  CHECK(cm.inertia == doctest::Approx(cm.inertia_history.back()).epsilon(1e-9));
}

TEST_CASE("converged model is a fixed point of one more Lloyd step") {
  std::mt19937_64 gen(13);
  std::normal_distribution<double> d(0.0, 4.0);
  std::vector<std::vector<double>> coords;
  for (int i = 0; i < 40; ++i) coords.push_back({d(gen), d(gen)});
  auto pts = make_points(coords);
  sampling::Rng rng(5);
  auto cm = cluster::kmeans(pts, 4, 300, 1e-12, rng);

  // Re-assign against the final centroids: nothing should move.
  for (const auto& [id, v] : pts) {
    int best = 0;
    double best_d = numerics::euclidean_sq(v, cm.centroids[0]);
    for (int j = 1; j < cm.k; ++j) {
      double dj = numerics::euclidean_sq(v, cm.centroids[j]);
      if (dj < best_d) {
        best_d = dj;
        best = j;
      }
    }
    CHECK(cm.assignments.at(id) == best);
  }
  // Centroids equal the means of their members.
  std::vector<VectorXd> sum(cm.k, VectorXd::Zero(2));
  std::vector<int> count(cm.k, 0);
  for (const auto& [id, v] : pts) {
    sum[cm.assignments.at(id)] += v;
    count[cm.assignments.at(id)]++;
  }
  for (int j = 0; j < cm.k; ++j) {
    REQUIRE(count[j] > 0);
    CHECK((cm.centroids[j] - sum[j] / count[j]).lpNorm<Eigen::Infinity>() < 1e-9);
  }
}

TEST_CASE("input validation") {
  auto pts = make_points({{0, 0}, {0, 0}, {1, 1}});
  sampling::Rng rng(6);
  // Only two distinct points, k = 3 is unsatisfiable.
  CHECK_THROWS_AS(cluster::kmeans(pts, 3, 100, 1e-9, rng), std::invalid_argument);
  CHECK_THROWS_AS(cluster::kmeans(pts, 0, 100, 1e-9, rng), std::invalid_argument);
  CHECK_THROWS_AS(cluster::kmeans(pts, 2, 0, 1e-9, rng), std::invalid_argument);
  CHECK_THROWS_AS(cluster::kmeans_restarts(pts, 2, 100, 1e-9, rng, 0),
                  std::invalid_argument);
}

TEST_CASE("pseudo labels use the reserved namespace") {
  CHECK(cluster::pseudo_class_id(0) == "pseudo::0");
  CHECK(cluster::pseudo_class_id(7) == "pseudo::7");

  auto pts = make_points({{0, 0}, {0, 1}, {10, 0}, {10, 1}});
  sampling::Rng rng(7);
  auto cm = cluster::kmeans_restarts(pts, 2, 100, 1e-9, rng, 5);

  std::vector<sampling::Instance> rows;
  for (const auto& [id, v] : pts)
    rows.push_back({id, v, std::nullopt, sampling::Domain::kTarget});
  sampling::Dataset target(std::move(rows));
  auto labeled = cluster::assign_pseudo_labels(cm, target);
  REQUIRE(labeled.size() == 4);
  for (int i = 0; i < 4; ++i) {
    REQUIRE(labeled.at(i).label.has_value());
    CHECK(*labeled.at(i).label ==
          cluster::pseudo_class_id(cm.assignments.at(labeled.at(i).id)));
  }
  CHECK(labeled.class_ids().size() == 2);

  std::vector<sampling::Instance> stranger = {
      {"nope", VectorXd::Zero(2), std::nullopt, sampling::Domain::kTarget}};
  sampling::Dataset unknown(std::move(stranger));
  CHECK_THROWS_AS(cluster::assign_pseudo_labels(cm, unknown), DataError);
}

TEST_CASE("cluster dump round trips") {
  std::mt19937_64 gen(21);
  std::normal_distribution<double> d(0.0, 2.0);
  std::vector<std::vector<double>> coords;
  for (int i = 0; i < 15; ++i) coords.push_back({d(gen), d(gen), d(gen)});
  auto pts = make_points(coords);
  sampling::Rng rng(8);
  auto cm = cluster::kmeans(pts, 3, 100, 1e-9, rng);

  std::string path = "test_clusters.tmp";
  cluster::save_cluster_dump(cm, path);
  auto back = cluster::load_cluster_dump(path);
  CHECK(back.k == cm.k);
  CHECK(back.inertia == doctest::Approx(cm.inertia).epsilon(1e-14));
  REQUIRE(back.centroids.size() == cm.centroids.size());
  for (std::size_t i = 0; i < cm.centroids.size(); ++i)
    CHECK((back.centroids[i] - cm.centroids[i]).norm() == 0.0);
  CHECK(back.assignments.size() == cm.assignments.size());
  for (const auto& [id, c] : cm.assignments) CHECK(back.assignments.at(id) == c);
  std::remove(path.c_str());
  CHECK_THROWS_AS(cluster::load_cluster_dump("no_such.clusters"), DataError);
}
