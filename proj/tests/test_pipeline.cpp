#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "dafec/errors.hpp"
#include "dafec/pipeline.hpp"
#include "dafec/synth.hpp"

using namespace dafec;
namespace fs = std::filesystem;

namespace {

synth::SyntheticSpec tiny_spec() {
  synth::SyntheticSpec s;
  s.d_in = 6;
  s.source_classes = 4;
  s.target_classes = 3;
  s.samples_per_class = 15;
  s.seed = 5;
  return s;
}

config::TrainConfig tiny_cfg() {
  config::TrainConfig c;
  c.way = 3;
  c.shot = 1;
  c.query_per_class = 2;
  c.clusters = 3;
  c.total_iters = 30;
  c.anneal_horizon = 30;
  c.eval_episodes = 20;
  c.feature_dim = 8;
  c.hidden_dim = 12;
  c.disc_hidden_dim = 8;
  c.kmeans_restarts = 4;
  c.lr = 0.05;
  c.seed = 9;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

bool same_params(const models::ExtractorParams& a, const models::ExtractorParams& b) {
  if (a.layers.size() != b.layers.size()) return false;
  for (std::size_t i = 0; i < a.layers.size(); ++i)
    if (a.layers[i].W != b.layers[i].W || a.layers[i].b != b.layers[i].b) return false;
  return true;
}

}  // namespace

TEST_CASE("train_extractor is deterministic and CPM actually changes it") {
  auto data = synth::generate_synthetic(tiny_spec());
  auto cfg = tiny_cfg();

  auto a = pipeline::train_extractor(data.source, data.target_unlabeled, cfg);
  auto b = pipeline::train_extractor(data.source, data.target_unlabeled, cfg);
  CHECK(same_params(a, b));

  auto plain_cfg = cfg;
  plain_cfg.no_cpm_a = true;
  plain_cfg.no_cpm_s = true;
  metrics::LossTrace plain_trace;
  auto plain = pipeline::train_extractor(data.source, data.target_unlabeled,
                                         plain_cfg, &plain_trace);
  CHECK(!same_params(a, plain));
  // With both CPM terms off, only the prototype cross-entropy step runs.
  for (double v : plain_trace.dis) CHECK(v == 0.0);
  for (double v : plain_trace.enc) CHECK(v == 0.0);
  for (double v : plain_trace.entropy) CHECK(v == 0.0);
  for (double v : plain_trace.ce) CHECK(v > 0.0);
}

TEST_CASE("extractor trace carries the schedule and finite losses") {
  auto data = synth::generate_synthetic(tiny_spec());
  auto cfg = tiny_cfg();
  metrics::LossTrace trace;
  pipeline::train_extractor(data.source, data.target_unlabeled, cfg, &trace);
  auto sched = cfg.schedule();
  REQUIRE(trace.ce.size() == static_cast<std::size_t>(cfg.total_iters));
  REQUIRE(trace.lambda.size() == trace.ce.size());
  for (int t = 0; t < cfg.total_iters; ++t) {
    CHECK(trace.lambda[t] == losses::lambda_at(sched, t));
    CHECK(std::isfinite(trace.ce[t]));
    CHECK(std::isfinite(trace.dis[t]));
    CHECK(std::isfinite(trace.enc[t]));
    CHECK(std::isfinite(trace.entropy[t]));
  }

  auto bad = tiny_spec();
  bad.d_in = 5;
  auto other = synth::generate_synthetic(bad);
  CHECK_THROWS_AS(
      pipeline::train_extractor(data.source, other.target_unlabeled, cfg),
      std::invalid_argument);
}

TEST_CASE("extract_features matches per-instance encoding") {
  auto data = synth::generate_synthetic(tiny_spec());
  auto ext = models::init_extractor({6, 12, 8}, 77);
  auto feats = pipeline::extract_features(ext, data.target_unlabeled);
  REQUIRE(static_cast<int>(feats.size()) == data.target_unlabeled.size());
  for (int i = 0; i < data.target_unlabeled.size(); ++i) {
    CHECK(feats[i].first == data.target_unlabeled.at(i).id);
    CHECK((feats[i].second -
           models::encode(ext, data.target_unlabeled.at(i).features))
              .norm() == 0.0);
  }
  auto again = pipeline::extract_features(ext, data.target_unlabeled);
  for (std::size_t i = 0; i < feats.size(); ++i)
    CHECK(feats[i].second == again[i].second);
}

TEST_CASE("mine_pseudo_labels covers the pool with reserved class ids") {
  auto data = synth::generate_synthetic(tiny_spec());
  auto ext = models::init_extractor({6, 12, 8}, 78);
  auto feats = pipeline::extract_features(ext, data.target_unlabeled);
  auto cfg = tiny_cfg();
  sampling::Rng rng(3);
  cluster::ClusterModel cm;
  auto pseudo = pipeline::mine_pseudo_labels(feats, data.target_unlabeled, cfg, rng, &cm);
  CHECK(pseudo.size() == data.target_unlabeled.size());
  CHECK(cm.k == cfg.clusters);
  for (const auto& inst : pseudo.instances()) {
    REQUIRE(inst.label.has_value());
    CHECK(inst.label->rfind("pseudo::", 0) == 0);
  }
  CHECK(static_cast<int>(pseudo.class_ids().size()) <= cfg.clusters);
}

TEST_CASE("a constant-feature classifier scores exactly chance") {
  auto data = synth::generate_synthetic(tiny_spec());
  models::ExtractorParams collapsed;
  collapsed.layers.push_back({Eigen::MatrixXd::Zero(8, 6), Eigen::VectorXd::Zero(8)});
  sampling::Rng rng(4);
  auto report = pipeline::evaluate(collapsed, data.target_test, 3, 1, 2, 25, rng);
  // Every query ties to every prototype; the tie-break always answers the
  // first class, so accuracy is exactly 1/way.
  CHECK(report.accuracy_mean == doctest::Approx(100.0 / 3).epsilon(1e-12));
}

TEST_CASE("run_all produces a coherent report and byte-stable artifacts") {
  auto data = synth::generate_synthetic(tiny_spec());
  auto cfg = tiny_cfg();
  fs::path dir_a = "test_run_a.tmp";
  fs::path dir_b = "test_run_b.tmp";
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);

  auto report = pipeline::run_all(data.source, data.target_unlabeled,
                                  data.target_test, cfg, {dir_a.string()}, &data.gold);
  CHECK(report.way == cfg.way);
  CHECK(report.seed == cfg.seed);
  CHECK(report.dbi.has_value());
  CHECK(report.fmi.has_value());
  CHECK(*report.fmi >= 0.0);
  CHECK(*report.fmi <= 1.0);
  CHECK(report.episode_accuracies.size() == static_cast<std::size_t>(cfg.eval_episodes));
  std::vector<std::string> expect_stages = {"stage1:train_extractor",
                                            "stage2:extract_features",
                                            "stage3:mine_pseudo_labels",
                                            "stage4:train_classifier", "evaluate"};
  CHECK(report.stage_log == expect_stages);
  for (const char* f : {"extractor_checkpoint.txt", "features.tsv", "clusters.txt",
                        "classifier_checkpoint.txt", "report.json", "episodes.csv"})
    CHECK(fs::exists(dir_a / f));

  pipeline::run_all(data.source, data.target_unlabeled, data.target_test, cfg,
                    {dir_b.string()}, &data.gold);
  for (const char* f : {"report.json", "episodes.csv", "features.tsv", "clusters.txt"})
    CHECK(slurp(dir_a / f) == slurp(dir_b / f));
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
}

TEST_CASE("training and mining never see the hidden labels") {
  // The guard is structural: stages 1-3 accept only the unlabeled pool, and
  // the FMI figure appears in the report iff the caller supplies the sidecar.
  auto data = synth::generate_synthetic(tiny_spec());
  for (const auto& inst : data.target_unlabeled.instances())
    CHECK(!inst.label.has_value());
  CHECK(data.target_unlabeled.class_index().empty());

  auto cfg = tiny_cfg();
  auto blind = pipeline::run_all(data.source, data.target_unlabeled,
                                 data.target_test, cfg, {});
  CHECK(!blind.fmi.has_value());
  CHECK(blind.dbi.has_value());

  // A sidecar that does not cover the pool is rejected at report time.
  std::map<std::string, std::string> partial = {{"bogus-id", "a"}};
  CHECK_THROWS_AS(pipeline::run_all(data.source, data.target_unlabeled,
                                    data.target_test, cfg, {}, &partial),
                  DataError);
}

TEST_CASE("no_pseudo skips the promotion stages") {
  auto data = synth::generate_synthetic(tiny_spec());
  auto cfg = tiny_cfg();
  cfg.no_pseudo = true;
  auto report = pipeline::run_all(data.source, data.target_unlabeled,
                                  data.target_test, cfg, {}, &data.gold);
  CHECK(!report.dbi.has_value());
  CHECK(!report.fmi.has_value());
  CHECK(report.stage_log.front() == "stage1:skipped(no_pseudo)");
  CHECK(report.extractor_trace.ce.empty());
  CHECK(!report.classifier_trace.ce.empty());
}

TEST_CASE("ablation grid covers every variant") {
  auto data = synth::generate_synthetic(tiny_spec());
  auto cfg = tiny_cfg();
  cfg.total_iters = 10;
  cfg.anneal_horizon = 10;
  cfg.eval_episodes = 5;
  fs::path dir = "test_ablate.tmp";
  fs::remove_all(dir);
  auto rows = pipeline::ablate(data.source, data.target_unlabeled, data.target_test,
                               cfg, dir.string(), &data.gold);
  REQUIRE(rows.size() == 6);
  std::vector<std::string> names;
  for (const auto& r : rows) names.push_back(r.name);
  CHECK(names == std::vector<std::string>{"full", "no_pseudo", "no_cpm_s", "no_cpm_a",
                                          "no_cpm_c", "linear_anneal"});
  for (const auto& r : rows) {
    if (r.name == "no_pseudo") continue;
    CHECK(fs::exists(dir / r.name / "report.json"));
  }

  fs::path csv = dir / "ablation.tmp.csv";
  pipeline::save_ablation_csv(rows, csv.string());
  std::ifstream is(csv);
  std::string header;
  std::getline(is, header);
  CHECK(header == "variant,accuracy_mean,accuracy_std,dbi,fmi");
  int lines = 0;
  for (std::string l; std::getline(is, l);)
    if (!l.empty()) ++lines;
  CHECK(lines == 6);
  fs::remove_all(dir);
}

TEST_CASE("features round trip and plot data emission") {
  auto data = synth::generate_synthetic(tiny_spec());
  auto cfg = tiny_cfg();
  fs::path dir = "test_plot_run.tmp";
  fs::remove_all(dir);
  pipeline::run_all(data.source, data.target_unlabeled, data.target_test, cfg,
                    {dir.string()}, &data.gold);

  auto feats = pipeline::load_features((dir / "features.tsv").string());
  CHECK(static_cast<int>(feats.size()) == data.target_unlabeled.size());
  pipeline::save_features(feats, (dir / "features2.tsv").string());
  CHECK(slurp(dir / "features.tsv") == slurp(dir / "features2.tsv"));

  fs::path gold_path = dir / "gold.jsonl";
  {
    std::ofstream os(gold_path);
    for (const auto& [id, label] : data.gold)
      os << "{\"id\":\"" << id << "\",\"label\":\"" << label << "\"}\n";
  }
  fs::path plots = dir / "plots";
  pipeline::emit_plot_data({(dir / "report.json").string()},
                           (dir / "features.tsv").string(), gold_path.string(),
                           plots.string());
  for (const char* f :
       {"loss_traces.csv", "lambda_schedule.csv", "cluster_quality.csv", "pca_scatter.csv"})
    CHECK(fs::exists(plots / f));

  // Schedule endpoints in the emitted table.
  std::ifstream is(plots / "lambda_schedule.csv");
  std::string line;
  std::getline(is, line);
  CHECK(line == "t,lambda");
  std::vector<std::string> rows;
  while (std::getline(is, line))
    if (!line.empty()) rows.push_back(line);
  CHECK(rows.front() == "0,0");
  CHECK(rows.back() == std::to_string(cfg.anneal_horizon) + ",1");
  fs::remove_all(dir);
}
