#include "dafec/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "dafec/errors.hpp"
#include "dafec/losses.hpp"
#include "dafec/numerics.hpp"

namespace dafec::pipeline {

namespace fs = std::filesystem;
using sampling::Rng;

namespace {

void require_finite(double loss, const char* term, int iter) {
  if (!std::isfinite(loss))
    throw NumericError(std::string("train: non-finite ") + term +
                       " at iteration " + std::to_string(iter));
}

// One prototypical cross-entropy update. Returns the loss value.
double ce_step(models::ExtractorParams& theta, const sampling::Dataset& ds,
               const sampling::Episode& ep, double lr, int iter) {
  ad::Tape tape;
  auto staged = models::stage(tape, theta);
  std::vector<std::vector<ad::Var>> support;
  for (const auto& cls_members : ep.support) {
    std::vector<ad::Var> feats;
    for (int idx : cls_members)
      feats.push_back(models::encode(tape, staged, tape.leaf(ds.at(idx).features)));
    support.push_back(std::move(feats));
  }
  std::vector<std::pair<ad::Var, int>> queries;
  for (int c = 0; c < ep.way; ++c)
    for (int idx : ep.query[c])
      queries.emplace_back(models::encode(tape, staged, tape.leaf(ds.at(idx).features)), c);
  ad::Var loss = losses::proto_ce_loss(tape, support, queries);
  double value = tape.value_scalar(loss);
  require_finite(value, "L_CE", iter);
  tape.backward(loss);
  models::sgd_from_tape(theta, tape, staged, {lr});
  return value;
}

struct EpisodicLoop {
  models::ExtractorParams params;
  metrics::LossTrace trace;
};

// Shared CE-only training loop (stage 4, and stage 1's first step reuses
// ce_step directly).
EpisodicLoop train_protonet(const sampling::Dataset& ds, const TrainConfig& cfg,
                            std::uint64_t init_seed, std::uint64_t sample_seed,
                            const models::ExtractorParams* warm_start) {
  EpisodicLoop out;
  out.params = warm_start
                   ? *warm_start
                   : models::init_extractor(
                         {ds.dim(), cfg.hidden_dim, cfg.feature_dim}, init_seed);
  Rng rng(sample_seed);
  double best_ce = std::numeric_limits<double>::infinity();
  int since_best = 0;
  for (int t = 0; t < cfg.total_iters; ++t) {
    auto ep = sampling::sample_episode(ds, cfg.way, cfg.shot, cfg.query_per_class, rng);
    double ce = ce_step(out.params, ds, ep, cfg.lr, t);
    out.trace.ce.push_back(ce);
    if (cfg.early_stop) {
      if (ce < best_ce - 1e-4) {
        best_ce = ce;
        since_best = 0;
      } else if (++since_best >= 500) {
        break;
      }
    }
  }
  return out;
}

}  // namespace

models::ExtractorParams train_extractor(const sampling::Dataset& source,
                                        const sampling::Dataset& target_unlabeled,
                                        const TrainConfig& cfg,
                                        metrics::LossTrace* trace) {
  if (source.class_index().empty())
    throw std::invalid_argument("train_extractor: source dataset is unlabeled");
  if (source.dim() != target_unlabeled.dim())
    throw std::invalid_argument("train_extractor: source/target dimension mismatch");

  auto theta = models::init_extractor(
      {source.dim(), cfg.hidden_dim, cfg.feature_dim},
      sampling::derive_seed(cfg.seed, 11));
  auto phi = models::init_discriminator(cfg.feature_dim, cfg.disc_hidden_dim,
                                        sampling::derive_seed(cfg.seed, 12));
  Rng rng(sampling::derive_seed(cfg.seed, 10));
  auto sched = cfg.schedule();
  const bool use_a = !cfg.no_cpm_a;
  const bool use_s = !cfg.no_cpm_s;

  double best_ce = std::numeric_limits<double>::infinity();
  int since_best = 0;
  for (int t = 0; t < cfg.total_iters; ++t) {
    auto ep = sampling::sample_episode(source, cfg.way, cfg.shot, cfg.query_per_class, rng);
    double ce = ce_step(theta, source, ep, cfg.lr, t);
    double lambda = losses::lambda_at(sched, t);
    double dis_v = 0.0, enc_v = 0.0, ent_v = 0.0;

    if (use_a || use_s) {
      auto batch = sampling::sample_unlabeled(target_unlabeled,
                                              cfg.way * cfg.shot, rng);
      std::vector<int> support_flat;
      for (const auto& cls : ep.support)
        support_flat.insert(support_flat.end(), cls.begin(), cls.end());

      if (use_a) {
        // Discriminator update on detached features.
        ad::Tape tape;
        auto dphi = models::stage(tape, phi);
        std::vector<ad::Var> src_p, tgt_p;
        for (int idx : support_flat)
          src_p.push_back(models::discriminate(
              tape, dphi, tape.leaf(models::encode(theta, source.at(idx).features))));
        for (int idx : batch)
          tgt_p.push_back(models::discriminate(
              tape, dphi,
              tape.leaf(models::encode(theta, target_unlabeled.at(idx).features))));
        ad::Var dis = losses::discriminator_loss(tape, src_p, tgt_p);
        dis_v = tape.value_scalar(dis);
        require_finite(dis_v, "L_Dis", t);
        tape.backward(dis);
        models::sgd_from_tape(phi, tape, dphi, {cfg.lr});
      }

      // Extractor update on (1 - lambda) L_Enc + lambda L_Entropy; the
      // discriminator parameters are staged but left untouched.
      ad::Tape tape;
      auto stheta = models::stage(tape, theta);
      std::vector<ad::Var> target_feats;
      for (int idx : batch)
        target_feats.push_back(models::encode(
            tape, stheta, tape.leaf(target_unlabeled.at(idx).features)));
      std::vector<ad::Var> terms;
      if (use_a) {
        auto dphi = models::stage(tape, phi);
        std::vector<ad::Var> src_p, tgt_p;
        for (int idx : support_flat)
          src_p.push_back(models::discriminate(
              tape, dphi,
              models::encode(tape, stheta, tape.leaf(source.at(idx).features))));
        for (ad::Var f : target_feats)
          tgt_p.push_back(models::discriminate(tape, dphi, f));
        ad::Var enc = losses::extractor_adv_loss(tape, src_p, tgt_p);
        enc_v = tape.value_scalar(enc);
        require_finite(enc_v, "L_Enc", t);
        terms.push_back(tape.scale(enc, 1.0 - lambda));
      }
      if (use_s) {
        ad::Var ent = losses::similarity_entropy_loss(tape, target_feats, cfg.tau,
                                                      cfg.entropy_sign);
        ent_v = tape.value_scalar(ent);
        require_finite(ent_v, "L_Entropy", t);
        terms.push_back(tape.scale(ent, lambda));
      }
      ad::Var obj = terms.size() == 1 ? terms[0] : tape.add(terms[0], terms[1]);
      tape.backward(obj);
      models::sgd_from_tape(theta, tape, stheta, {cfg.lr});
    }

    if (trace) {
      trace->ce.push_back(ce);
      trace->dis.push_back(dis_v);
      trace->enc.push_back(enc_v);
      trace->entropy.push_back(ent_v);
      trace->lambda.push_back(lambda);
    }
    if (cfg.early_stop) {
      if (ce < best_ce - 1e-4) {
        best_ce = ce;
        since_best = 0;
      } else if (++since_best >= 500) {
        break;
      }
    }
  }
  return theta;
}

std::vector<std::pair<std::string, Eigen::VectorXd>> extract_features(
    const models::ExtractorParams& extractor,
    const sampling::Dataset& target_unlabeled) {
  std::vector<std::pair<std::string, Eigen::VectorXd>> out;
  out.reserve(target_unlabeled.size());
  for (const auto& inst : target_unlabeled.instances())
    out.emplace_back(inst.id, models::encode(extractor, inst.features));
  return out;
}

sampling::Dataset mine_pseudo_labels(
    const std::vector<std::pair<std::string, Eigen::VectorXd>>& features,
    const sampling::Dataset& target_unlabeled, const TrainConfig& cfg,
    sampling::Rng& rng, cluster::ClusterModel* model) {
  auto cm = cluster::kmeans_restarts(features, cfg.clusters, cfg.kmeans_max_iter,
                                     cfg.kmeans_tol, rng, cfg.kmeans_restarts);
  auto pseudo = cluster::assign_pseudo_labels(cm, target_unlabeled);
  if (model) *model = std::move(cm);
  return pseudo;
}

models::ExtractorParams train_classifier(const sampling::Dataset& merged,
                                         const TrainConfig& cfg,
                                         metrics::LossTrace* trace,
                                         const models::ExtractorParams* init) {
  if (merged.class_index().empty())
    throw std::invalid_argument("train_classifier: dataset is unlabeled");
  auto loop = train_protonet(merged, cfg, sampling::derive_seed(cfg.seed, 20),
                             sampling::derive_seed(cfg.seed, 21), init);
  if (trace) *trace = std::move(loop.trace);
  return loop.params;
}

metrics::RunReport evaluate(const models::ExtractorParams& classifier,
                            const sampling::Dataset& test, int way, int shot,
                            int query_per_class, int episodes, sampling::Rng& rng) {
  if (episodes < 1) throw std::invalid_argument("evaluate: episodes must be >= 1");
  metrics::RunReport report;
  report.way = way;
  report.shot = shot;
  std::vector<metrics::EpisodeResult> results;
  for (int e = 0; e < episodes; ++e) {
    auto ep = sampling::sample_episode(test, way, shot, query_per_class, rng);
    std::vector<Eigen::VectorXd> protos;
    for (int c = 0; c < way; ++c) {
      Eigen::VectorXd mean = Eigen::VectorXd::Zero(classifier.out_dim());
      for (int idx : ep.support[c])
        mean += models::encode(classifier, test.at(idx).features);
      protos.push_back(mean / static_cast<double>(shot));
    }
    metrics::EpisodeResult r;
    for (int c = 0; c < way; ++c) {
      for (int idx : ep.query[c]) {
        Eigen::VectorXd f = models::encode(classifier, test.at(idx).features);
        int best = 0;
        double best_d = (f - protos[0]).squaredNorm();
        for (int j = 1; j < way; ++j) {
          double d = (f - protos[j]).squaredNorm();
          if (d < best_d) {  // ties keep the lowest class index
            best_d = d;
            best = j;
          }
        }
        auto& pc = r.per_class[ep.classes[c]];
        ++pc.second;
        ++r.total;
        if (best == c) {
          ++pc.first;
          ++r.correct;
        }
      }
    }
    report.episode_accuracies.push_back(r.accuracy());
    results.push_back(std::move(r));
  }
  std::tie(report.accuracy_mean, report.accuracy_std) = metrics::aggregate(results);
  return report;
}

metrics::RunReport run_all(const sampling::Dataset& source,
                           const sampling::Dataset& target_unlabeled,
                           const sampling::Dataset& test, const TrainConfig& cfg,
                           const RunPaths& paths,
                           const std::map<std::string, std::string>* gold) {
  fs::path dir;
  const bool write = !paths.out_dir.empty();
  if (write) {
    dir = paths.out_dir;
    fs::create_directories(dir);
  }

  metrics::LossTrace extractor_trace, classifier_trace;
  std::vector<std::string> stage_log;
  std::optional<double> dbi, fmi;
  sampling::Dataset merged;
  models::ExtractorParams extractor;
  bool have_extractor = false;

  if (cfg.no_pseudo) {
    // Stages 1-3 produce only the pseudo-labeled data, so the ablation skips
    // them entirely and trains the classifier on the source set alone.
    stage_log.push_back("stage1:skipped(no_pseudo)");
    stage_log.push_back("stage2:skipped(no_pseudo)");
    stage_log.push_back("stage3:skipped(no_pseudo)");
    merged = source;
  } else {
    stage_log.push_back("stage1:train_extractor");
    extractor = train_extractor(source, target_unlabeled, cfg, &extractor_trace);
    have_extractor = true;
    if (write)
      models::save_checkpoint(extractor, (dir / "extractor_checkpoint.txt").string());

    stage_log.push_back("stage2:extract_features");
    auto features = extract_features(extractor, target_unlabeled);
    if (write) save_features(features, (dir / "features.tsv").string());

    stage_log.push_back("stage3:mine_pseudo_labels");
    Rng mine_rng(sampling::derive_seed(cfg.seed, 30));
    cluster::ClusterModel cm;
    auto pseudo = mine_pseudo_labels(features, target_unlabeled, cfg, mine_rng, &cm);
    if (write) cluster::save_cluster_dump(cm, (dir / "clusters.txt").string());

    std::vector<Eigen::VectorXd> feat_vecs;
    std::vector<std::string> pseudo_labels;
    for (const auto& [id, f] : features) {
      feat_vecs.push_back(f);
      pseudo_labels.push_back(cluster::pseudo_class_id(cm.assignments.at(id)));
    }
    try {
      dbi = metrics::davies_bouldin(feat_vecs, pseudo_labels);
    } catch (const std::invalid_argument&) {
      // Fewer than two nonempty clusters; leave the index unset.
    }
    if (gold) {
      std::vector<std::string> gold_labels;
      for (const auto& [id, f] : features) {
        auto it = gold->find(id);
        if (it == gold->end())
          throw DataError("run_all: gold sidecar missing instance " + id);
        gold_labels.push_back(it->second);
      }
      fmi = metrics::fowlkes_mallows(pseudo_labels, gold_labels);
    }
    merged = sampling::merge_datasets(source, pseudo);
  }

  stage_log.push_back("stage4:train_classifier");
  auto classifier = train_classifier(
      merged, cfg, &classifier_trace,
      cfg.warm_start_classifier && have_extractor ? &extractor : nullptr);
  if (write)
    models::save_checkpoint(classifier, (dir / "classifier_checkpoint.txt").string());

  stage_log.push_back("evaluate");
  Rng eval_rng(sampling::derive_seed(cfg.seed, 40));
  auto report = evaluate(classifier, test, cfg.way, cfg.shot, cfg.query_per_class,
                         cfg.eval_episodes, eval_rng);
  report.dbi = dbi;
  report.fmi = fmi;
  report.extractor_trace = std::move(extractor_trace);
  report.classifier_trace = std::move(classifier_trace);
  report.stage_log = std::move(stage_log);
  report.config = cfg.to_map();
  report.seed = cfg.seed;
  if (write) {
    metrics::save_report(report, (dir / "report.json").string());
    metrics::save_episode_csv(report, (dir / "episodes.csv").string());
  }
  return report;
}

std::vector<AblationRow> ablate(const sampling::Dataset& source,
                                const sampling::Dataset& target_unlabeled,
                                const sampling::Dataset& test, const TrainConfig& cfg,
                                const std::string& out_dir,
                                const std::map<std::string, std::string>* gold) {
  struct Variant {
    std::string name;
    void (*tweak)(TrainConfig&);
  };
  const Variant variants[] = {
      {"full", [](TrainConfig&) {}},
      {"no_pseudo", [](TrainConfig& c) { c.no_pseudo = true; }},
      {"no_cpm_s", [](TrainConfig& c) { c.no_cpm_s = true; }},
      {"no_cpm_a", [](TrainConfig& c) { c.no_cpm_a = true; }},
      {"no_cpm_c", [](TrainConfig& c) { c.no_cpm_c = true; }},
      {"linear_anneal",
       [](TrainConfig& c) { c.anneal_mode = losses::AnnealMode::kLinear; }},
  };
  std::vector<AblationRow> rows;
  for (const auto& v : variants) {
    TrainConfig vc = cfg;
    v.tweak(vc);
    RunPaths paths;
    if (!out_dir.empty()) paths.out_dir = (fs::path(out_dir) / v.name).string();
    rows.push_back({v.name, run_all(source, target_unlabeled, test, vc, paths, gold)});
  }
  return rows;
}

void save_ablation_csv(const std::vector<AblationRow>& rows, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw DataError("ablation: cannot open for writing: " + path);
  os << "variant,accuracy_mean,accuracy_std,dbi,fmi\n";
  os.precision(17);
  for (const auto& row : rows) {
    os << row.name << "," << row.report.accuracy_mean << ","
       << row.report.accuracy_std << ",";
    if (row.report.dbi) os << *row.report.dbi;
    os << ",";
    if (row.report.fmi) os << *row.report.fmi;
    os << "\n";
  }
}

void save_features(const std::vector<std::pair<std::string, Eigen::VectorXd>>& feats,
                   const std::string& path) {
  std::ofstream os(path);
  if (!os) throw DataError("features: cannot open for writing: " + path);
  os.precision(17);
  for (const auto& [id, f] : feats) {
    os << id;
    for (Eigen::Index i = 0; i < f.size(); ++i) os << "\t" << f[i];
    os << "\n";
  }
}

std::vector<std::pair<std::string, Eigen::VectorXd>> load_features(
    const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("features: cannot open: " + path);
  std::vector<std::pair<std::string, Eigen::VectorXd>> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string id;
    ls >> id;
    std::vector<double> vals;
    double v;
    while (ls >> v) vals.push_back(v);
    Eigen::VectorXd f(vals.size());
    for (std::size_t i = 0; i < vals.size(); ++i)
      f[static_cast<Eigen::Index>(i)] = vals[i];
    out.emplace_back(id, std::move(f));
  }
  return out;
}

void emit_plot_data(const std::vector<std::string>& report_paths,
                    const std::string& features_path, const std::string& gold_path,
                    const std::string& out_dir) {
  if (report_paths.empty())
    throw std::invalid_argument("emit_plot_data: need at least one report");
  fs::create_directories(out_dir);
  fs::path dir(out_dir);

  std::vector<metrics::RunReport> reports;
  for (const auto& p : report_paths) reports.push_back(metrics::load_report(p));

  {
    const auto& tr = reports.front().extractor_trace;
    std::ofstream os(dir / "loss_traces.csv");
    if (!os) throw DataError("emit_plot_data: cannot write loss_traces.csv");
    os << "iter,ce,dis,enc,entropy,lambda\n";
    os.precision(17);
    for (std::size_t i = 0; i < tr.ce.size(); ++i)
      os << i << "," << tr.ce[i] << "," << tr.dis[i] << "," << tr.enc[i] << ","
         << tr.entropy[i] << "," << tr.lambda[i] << "\n";
  }
  {
    // Schedule rebuilt from the run's config so the endpoints are exact.
    auto cfg = TrainConfig::from_map(reports.front().config);
    auto sched = cfg.schedule();
    std::ofstream os(dir / "lambda_schedule.csv");
    if (!os) throw DataError("emit_plot_data: cannot write lambda_schedule.csv");
    os << "t,lambda\n";
    os.precision(17);
    int T = sched.horizon;
    int points = std::min(T, 100);
    for (int i = 0; i <= points; ++i) {
      int t = static_cast<int>(std::llround(static_cast<double>(i) * T / points));
      os << t << "," << losses::lambda_at(sched, t) << "\n";
    }
  }
  {
    std::ofstream os(dir / "cluster_quality.csv");
    if (!os) throw DataError("emit_plot_data: cannot write cluster_quality.csv");
    os << "run,accuracy_mean,dbi,fmi\n";
    os.precision(17);
    for (std::size_t i = 0; i < reports.size(); ++i) {
      os << fs::path(report_paths[i]).parent_path().filename().string() << ","
         << reports[i].accuracy_mean << ",";
      if (reports[i].dbi) os << *reports[i].dbi;
      os << ",";
      if (reports[i].fmi) os << *reports[i].fmi;
      os << "\n";
    }
  }
  if (!features_path.empty()) {
    auto feats = load_features(features_path);
    if (feats.size() < 2)
      throw DataError("emit_plot_data: too few features for a projection");
    std::map<std::string, std::string> gold;
    if (!gold_path.empty()) gold = metrics::load_gold_sidecar(gold_path);
    Eigen::MatrixXd m(feats.size(), feats.front().second.size());
    for (std::size_t i = 0; i < feats.size(); ++i)
      m.row(static_cast<Eigen::Index>(i)) = feats[i].second.transpose();
    Eigen::MatrixXd comps = numerics::principal_components(m, 2, 1e-8);
    Eigen::RowVectorXd mean = m.colwise().mean();
    std::ofstream os(dir / "pca_scatter.csv");
    if (!os) throw DataError("emit_plot_data: cannot write pca_scatter.csv");
    os << "id,pc1,pc2,gold\n";
    os.precision(17);
    for (std::size_t i = 0; i < feats.size(); ++i) {
      Eigen::VectorXd centered = feats[i].second - mean.transpose();
      os << feats[i].first << "," << comps.row(0).dot(centered) << ","
         << comps.row(1).dot(centered) << ",";
      auto it = gold.find(feats[i].first);
      os << (it == gold.end() ? "" : it->second) << "\n";
    }
  }
}

}  // namespace dafec::pipeline
