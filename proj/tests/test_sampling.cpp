#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>

#include "dafec/errors.hpp"
#include "dafec/sampling.hpp"

using namespace dafec;
using Eigen::VectorXd;

namespace {

sampling::Dataset toy_dataset(int classes, int per_class, int dim = 3,
                              sampling::Domain dom = sampling::Domain::kSource) {
  std::vector<sampling::Instance> rows;
  for (int c = 0; c < classes; ++c)
    for (int i = 0; i < per_class; ++i) {
      sampling::Instance ins;
      ins.id = "c" + std::to_string(c) + "s" + std::to_string(i);
      ins.features = VectorXd::Constant(dim, c + 0.1 * i);
      ins.label = "cls" + std::to_string(c);
      ins.domain = dom;
      rows.push_back(ins);
    }
  return sampling::Dataset(std::move(rows));
}

}  // namespace

TEST_CASE("dataset validation") {
  auto ds = toy_dataset(4, 5);
  CHECK(ds.size() == 20);
  CHECK(ds.dim() == 3);
  CHECK(ds.class_ids() == std::vector<std::string>{"cls0", "cls1", "cls2", "cls3"});
  CHECK(ds.class_index().at("cls2").size() == 5);

  std::vector<sampling::Instance> dup = {
      {"x", VectorXd::Ones(2), "a", sampling::Domain::kSource},
      {"x", VectorXd::Ones(2), "b", sampling::Domain::kSource}};
  CHECK_THROWS_AS(sampling::Dataset(std::move(dup)), DataError);

  std::vector<sampling::Instance> ragged = {
      {"x", VectorXd::Ones(2), "a", sampling::Domain::kSource},
      {"y", VectorXd::Ones(3), "b", sampling::Domain::kSource}};
  CHECK_THROWS_AS(sampling::Dataset(std::move(ragged)), DataError);
}

TEST_CASE("episode shape and disjointness over many draws") {
  auto ds = toy_dataset(8, 12);
  sampling::Rng rng(99);
  for (int e = 0; e < 1000; ++e) {
    auto ep = sampling::sample_episode(ds, 5, 2, 3, rng);
    REQUIRE(ep.classes.size() == 5);
    std::set<std::string> uniq(ep.classes.begin(), ep.classes.end());
    CHECK(uniq.size() == 5);
    std::set<int> seen;
    for (int c = 0; c < 5; ++c) {
      REQUIRE(ep.support[c].size() == 2);
      REQUIRE(ep.query[c].size() == 3);
      for (int i : ep.support[c]) {
        CHECK(ds.at(i).label == ep.classes[c]);
        CHECK(seen.insert(i).second);  // support and query never overlap
      }
      for (int i : ep.query[c]) {
        CHECK(ds.at(i).label == ep.classes[c]);
        CHECK(seen.insert(i).second);
      }
    }
  }
}

TEST_CASE("episode sampling is deterministic in the generator state") {
  auto ds = toy_dataset(8, 12);
  sampling::Rng a(7), b(7);
  for (int e = 0; e < 20; ++e) {
    auto ea = sampling::sample_episode(ds, 4, 1, 2, a);
    auto eb = sampling::sample_episode(ds, 4, 1, 2, b);
    CHECK(ea.classes == eb.classes);
    CHECK(ea.support == eb.support);
    CHECK(ea.query == eb.query);
  }
}

TEST_CASE("class selection is close to uniform") {
  auto ds = toy_dataset(10, 8);
  sampling::Rng rng(5);
  std::map<std::string, int> counts;
  const int episodes = 20000;
  for (int e = 0; e < episodes; ++e) {
    auto ep = sampling::sample_episode(ds, 5, 1, 1, rng);
    for (const auto& c : ep.classes) counts[c]++;
  }
  // Each class should appear in about half the episodes.
  for (const auto& [cls, n] : counts) {
    double frac = static_cast<double>(n) / episodes;
    CHECK(frac == doctest::Approx(0.5).epsilon(0.04));
  }
}

TEST_CASE("episode capacity errors name the shortfall") {
  auto ds = toy_dataset(3, 4);
  sampling::Rng rng(1);
  CHECK_THROWS_AS(sampling::sample_episode(ds, 4, 1, 1, rng), CapacityError);
  CHECK_THROWS_AS(sampling::sample_episode(ds, 2, 3, 2, rng), CapacityError);
  try {
    sampling::sample_episode(ds, 2, 3, 2, rng);
  } catch (const CapacityError& e) {
    CHECK(std::string(e.what()).find("cls") != std::string::npos);
  }
  CHECK_THROWS_AS(sampling::sample_episode(ds, 0, 1, 1, rng), std::invalid_argument);
}

TEST_CASE("forced exhaustion uses every instance exactly once") {
  // way * (shot + query) equals the class size, so each episode covering all
  // classes must partition the dataset.
  auto ds = toy_dataset(3, 4);
  sampling::Rng rng(2);
  auto ep = sampling::sample_episode(ds, 3, 2, 2, rng);
  std::set<int> used;
  for (int c = 0; c < 3; ++c) {
    for (int i : ep.support[c]) used.insert(i);
    for (int i : ep.query[c]) used.insert(i);
  }
  CHECK(used.size() == 12);
}

TEST_CASE("sample_unlabeled draws without replacement") {
  auto ds = toy_dataset(4, 5);
  sampling::Rng rng(3);
  auto idx = sampling::sample_unlabeled(ds, 7, rng);
  CHECK(idx.size() == 7);
  std::set<int> uniq(idx.begin(), idx.end());
  CHECK(uniq.size() == 7);
  auto all = sampling::sample_unlabeled(ds, 20, rng);
  CHECK(std::set<int>(all.begin(), all.end()).size() == 20);
  CHECK_THROWS_AS(sampling::sample_unlabeled(ds, 21, rng), CapacityError);
}

TEST_CASE("merge_datasets combines disjoint label spaces") {
  auto src = toy_dataset(4, 3);
  std::vector<sampling::Instance> pseudo_rows;
  for (int c = 0; c < 2; ++c)
    for (int i = 0; i < 3; ++i)
      pseudo_rows.push_back({"p" + std::to_string(c * 3 + i), VectorXd::Ones(3),
                             "pseudo::" + std::to_string(c), sampling::Domain::kTarget});
  sampling::Dataset pseudo(std::move(pseudo_rows));

  auto merged = sampling::merge_datasets(src, pseudo);
  CHECK(merged.size() == 18);
  CHECK(merged.class_ids().size() == 6);

  auto collide = toy_dataset(2, 2);  // reuses cls0/cls1
  CHECK_THROWS_AS(sampling::merge_datasets(src, collide), DataError);

  auto wrong_dim = toy_dataset(2, 2, 5);
  CHECK_THROWS_AS(sampling::merge_datasets(src, wrong_dim), DataError);
}

TEST_CASE("dataset files round trip") {
  std::vector<sampling::Instance> rows = {
      {"a1", VectorXd::LinSpaced(3, 0.0, 1.0), "a", sampling::Domain::kSource},
      {"u1", VectorXd::Constant(3, -2.5), std::nullopt, sampling::Domain::kTarget}};
  sampling::Dataset ds(std::move(rows));
  std::string path = "test_dataset.tmp.jsonl";
  sampling::save_dataset(ds, path);
  auto back = sampling::load_dataset(path);
  REQUIRE(back.size() == 2);
  CHECK(back.at(0).id == "a1");
  CHECK(back.at(0).label == "a");
  CHECK(back.at(0).domain == sampling::Domain::kSource);
  CHECK((back.at(0).features - ds.at(0).features).norm() == 0.0);
  CHECK(!back.at(1).label.has_value());
  CHECK(back.at(1).domain == sampling::Domain::kTarget);
  std::remove(path.c_str());
  CHECK_THROWS_AS(sampling::load_dataset("no_such_file.jsonl"), DataError);
}

TEST_CASE("uniform_index covers the range without bias artifacts") {
  sampling::Rng rng(11);
  std::vector<int> counts(5, 0);
  for (int i = 0; i < 50000; ++i) {
    int v = sampling::uniform_index(rng, 5);
    REQUIRE(v >= 0);
    REQUIRE(v < 5);
    counts[v]++;
  }
  for (int c : counts) CHECK(c == doctest::Approx(10000).epsilon(0.05));
  CHECK_THROWS_AS(sampling::uniform_index(rng, 0), std::invalid_argument);
}

TEST_CASE("derive_seed separates streams") {
  auto a = sampling::derive_seed(1, 10);
  auto b = sampling::derive_seed(1, 11);
  auto c = sampling::derive_seed(2, 10);
  CHECK(a != b);
  CHECK(a != c);
  CHECK(a == sampling::derive_seed(1, 10));
}
