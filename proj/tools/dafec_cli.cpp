// Command-line front end for the DaFeC pipeline. Links only the C API.

#include <cstdio>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "dafec.h"

namespace {

struct CommonOpts {
  std::string config_path;
  std::vector<std::pair<std::string, std::string>> sets;
};

using ConfigPtr = std::unique_ptr<dafec_config, decltype(&dafec_config_destroy)>;

void add_common(CLI::App* cmd, CommonOpts& common) {
  cmd->add_option("--config", common.config_path, "Key-value config file");
  auto kv = [&common, cmd](const std::string& flag, const std::string& key,
                           const std::string& help) {
    cmd->add_option_function<std::string>(
        flag, [&common, key](const std::string& v) { common.sets.emplace_back(key, v); },
        help);
  };
  auto flag = [&common, cmd](const std::string& name, const std::string& key,
                             const std::string& help) {
    cmd->add_flag_callback(
        name, [&common, key] { common.sets.emplace_back(key, "true"); }, help);
  };
  kv("--seed", "seed", "Run seed");
  kv("--n", "n", "Episode way N");
  kv("--k", "k", "Support shots K per class");
  kv("--m", "m", "Queries M per class");
  kv("--tau", "tau", "Similarity-entropy temperature");
  kv("--anneal", "anneal", "Anneal mode: cosine, linear, constant");
  kv("--anneal-T", "anneal_T", "Anneal horizon T");
  kv("--clusters", "clusters", "Cluster count for the miner");
  kv("--iters", "iters", "Training iterations");
  kv("--episodes", "episodes", "Evaluation episode count");
  kv("--lr", "lr", "SGD learning rate");
  kv("--entropy-sign", "entropy_sign", "as_written or negated");
  flag("--no-pseudo", "no_pseudo", "Skip pseudo-labeled data (stages 1-3)");
  flag("--no-cpm-s", "no_cpm_s", "Drop the similarity entropy loss");
  flag("--no-cpm-a", "no_cpm_a", "Drop adversarial alignment");
  flag("--no-cpm-c", "no_cpm_c", "Constant loss weights instead of annealing");
  flag("--eq9-literal", "eq9_literal", "Audit: schedule exactly as printed");
  cmd->add_option_function<std::vector<std::string>>(
      "--set",
      [&common](const std::vector<std::string>& pairs) {
        for (const auto& p : pairs) {
          auto eq = p.find('=');
          if (eq == std::string::npos)
            throw CLI::ValidationError("--set expects key=value, got: " + p);
          common.sets.emplace_back(p.substr(0, eq), p.substr(eq + 1));
        }
      },
      "Extra config entries, key=value");
}

int apply_config(dafec_config* cfg, const CommonOpts& common) {
  if (!common.config_path.empty()) {
    int rc = dafec_config_load_file(cfg, common.config_path.c_str());
    if (rc != DAFEC_OK) return rc;
  }
  for (const auto& [k, v] : common.sets) {
    int rc = dafec_config_set(cfg, k.c_str(), v.c_str());
    if (rc != DAFEC_OK) return rc;
  }
  return DAFEC_OK;
}

int report(int rc, const char* what) {
  if (rc != DAFEC_OK)
    std::fprintf(stderr, "dafec: %s failed: %s\n", what, dafec_last_error());
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DaFeC: pseudo-label domain adaptation for few-shot classification"};
  app.require_subcommand(1);

  ConfigPtr cfg(dafec_config_create(), &dafec_config_destroy);

  CommonOpts common;
  std::string out_dir, source, target, test, checkpoint, features;
  std::string out_checkpoint, out_features, out_clusters, out_pseudo;
  std::string out_report, out_csv, out_trace, pseudo_path, gold_path;
  std::vector<std::string> report_paths;

  auto* generate = app.add_subcommand("generate", "Write a synthetic two-domain benchmark");
  add_common(generate, common);
  generate->add_option("--out", out_dir, "Output directory")->required();

  auto* trainx = app.add_subcommand("train-extractor", "Stage 1: CPM extractor training");
  add_common(trainx, common);
  trainx->add_option("source", source, "Labeled source dataset")->required();
  trainx->add_option("target", target, "Unlabeled target dataset")->required();
  trainx->add_option("--out-checkpoint", out_checkpoint)->required();
  trainx->add_option("--trace", out_trace, "Loss trace CSV");

  auto* extract = app.add_subcommand("extract", "Stage 2: encode target features");
  add_common(extract, common);
  extract->add_option("checkpoint", checkpoint)->required();
  extract->add_option("target", target)->required();
  extract->add_option("--out", out_features, "Feature dump")->required();

  auto* mine = app.add_subcommand("mine", "Stage 3: k-means pseudo-labels");
  add_common(mine, common);
  mine->add_option("features", features)->required();
  mine->add_option("target", target)->required();
  mine->add_option("--out-clusters", out_clusters)->required();
  mine->add_option("--out-pseudo", out_pseudo)->required();

  auto* trainc = app.add_subcommand("train-classifier", "Stage 4: few-shot classifier");
  add_common(trainc, common);
  trainc->add_option("source", source)->required();
  trainc->add_option("--pseudo", pseudo_path, "Pseudo-labeled dataset to merge in");
  trainc->add_option("--out-checkpoint", out_checkpoint)->required();

  auto* evaluate = app.add_subcommand("evaluate", "N-way-K-shot evaluation");
  add_common(evaluate, common);
  evaluate->add_option("checkpoint", checkpoint)->required();
  evaluate->add_option("test", test)->required();
  evaluate->add_option("--out-report", out_report)->required();
  evaluate->add_option("--out-csv", out_csv, "Per-episode accuracy CSV");

  auto* runall = app.add_subcommand("run-all", "Full four-stage pipeline + evaluation");
  add_common(runall, common);
  runall->add_option("source", source)->required();
  runall->add_option("target", target)->required();
  runall->add_option("test", test)->required();
  runall->add_option("--out", out_dir)->required();

  auto* ablate = app.add_subcommand("ablate", "Ablation grid with a comparison table");
  add_common(ablate, common);
  ablate->add_option("source", source)->required();
  ablate->add_option("target", target)->required();
  ablate->add_option("test", test)->required();
  ablate->add_option("--out", out_dir)->required();

  auto* plot = app.add_subcommand("plot-data", "Plot-ready CSVs from finished runs");
  plot->add_option("--report", report_paths, "report.json paths")->required();
  plot->add_option("--features", features, "Feature dump for the 2-D projection");
  plot->add_option("--gold", gold_path, "Hidden gold sidecar for colors");
  plot->add_option("--out", out_dir)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  if (!plot->parsed()) {
    int rc = apply_config(cfg.get(), common);
    if (rc != DAFEC_OK) return report(rc, "config");
  }

  if (generate->parsed())
    return report(dafec_generate(cfg.get(), out_dir.c_str()), "generate");
  if (trainx->parsed())
    return report(
        dafec_train_extractor(cfg.get(), source.c_str(), target.c_str(),
                              out_checkpoint.c_str(),
                              out_trace.empty() ? nullptr : out_trace.c_str()),
        "train-extractor");
  if (extract->parsed())
    return report(dafec_extract(cfg.get(), checkpoint.c_str(), target.c_str(),
                                out_features.c_str()),
                  "extract");
  if (mine->parsed())
    return report(dafec_mine(cfg.get(), features.c_str(), target.c_str(),
                             out_clusters.c_str(), out_pseudo.c_str()),
                  "mine");
  if (trainc->parsed())
    return report(dafec_train_classifier(
                      cfg.get(), source.c_str(),
                      pseudo_path.empty() ? nullptr : pseudo_path.c_str(),
                      out_checkpoint.c_str()),
                  "train-classifier");
  if (evaluate->parsed())
    return report(dafec_evaluate(cfg.get(), checkpoint.c_str(), test.c_str(),
                                 out_report.c_str(),
                                 out_csv.empty() ? nullptr : out_csv.c_str()),
                  "evaluate");
  if (runall->parsed())
    return report(dafec_run_all(cfg.get(), source.c_str(), target.c_str(),
                                test.c_str(), out_dir.c_str()),
                  "run-all");
  if (ablate->parsed())
    return report(dafec_ablate(cfg.get(), source.c_str(), target.c_str(),
                               test.c_str(), out_dir.c_str()),
                  "ablate");
  if (plot->parsed()) {
    std::vector<const char*> reports;
    for (const auto& r : report_paths) reports.push_back(r.c_str());
    reports.push_back(nullptr);
    return report(
        dafec_emit_plot_data(reports.data(),
                             features.empty() ? nullptr : features.c_str(),
                             gold_path.empty() ? nullptr : gold_path.c_str(),
                             out_dir.c_str()),
        "plot-data");
  }
  return 1;
}
