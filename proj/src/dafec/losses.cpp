#include "dafec/losses.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "dafec/errors.hpp"
#include "dafec/numerics.hpp"

namespace dafec::losses {

double lambda_at(const AnnealSchedule& sched, int t) {
  if (t < 0) throw std::invalid_argument("lambda_at: t must be >= 0");
  if (sched.horizon < 1) throw std::invalid_argument("lambda_at: horizon must be >= 1");
  switch (sched.mode) {
    case AnnealMode::kConstant:
      if (sched.lambda0 < 0.0 || sched.lambda0 > 1.0)
        throw std::invalid_argument("lambda_at: constant lambda outside [0,1]");
      return sched.lambda0;
    case AnnealMode::kLinear:
      return std::min(1.0, static_cast<double>(t) / sched.horizon);
    case AnnealMode::kCosine: {
      if (t > sched.horizon) return 1.0;
      double c = std::cos(std::numbers::pi * t / sched.horizon);
      // Printed form starts at -1 and jumps to 1 at the horizon; corrected
      // form rises smoothly 0 -> 1.
      return sched.literal ? -(c + 1.0) / 2.0 : (1.0 - c) / 2.0;
    }
  }
  throw std::logic_error("lambda_at: unknown mode");
}

double combined_extractor_objective(double ce, double adv, double ent, double lambda) {
  if (lambda < 0.0 || lambda > 1.0)
    throw std::invalid_argument("combined objective: lambda outside [0,1]");
  return ce + (1.0 - lambda) * adv + lambda * ent;
}

std::map<std::string, Eigen::VectorXd> prototypes(
    const std::vector<std::pair<std::string, std::vector<Eigen::VectorXd>>>& support) {
  std::map<std::string, Eigen::VectorXd> out;
  for (const auto& [cls, feats] : support) {
    if (feats.empty()) throw std::invalid_argument("prototypes: empty class " + cls);
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(feats.front().size());
    for (const auto& f : feats) {
      if (f.size() != mean.size())
        throw std::invalid_argument("prototypes: dimension mismatch in class " + cls);
      mean += f;
    }
    out[cls] = mean / static_cast<double>(feats.size());
  }
  return out;
}

Eigen::VectorXd proto_log_probs(const Eigen::VectorXd& q,
                                const std::vector<Eigen::VectorXd>& protos) {
  if (protos.size() < 2)
    throw std::invalid_argument("proto_log_probs: need >= 2 prototypes");
  Eigen::VectorXd neg_d(protos.size());
  for (std::size_t i = 0; i < protos.size(); ++i)
    neg_d[i] = -numerics::euclidean_sq(q, protos[i]);
  double m = neg_d.maxCoeff();
  double lse = m + std::log((neg_d.array() - m).exp().sum());
  return neg_d.array() - lse;
}

double proto_ce_loss(
    const std::vector<std::pair<std::string, std::vector<Eigen::VectorXd>>>& support,
    const std::vector<std::pair<std::string, Eigen::VectorXd>>& queries) {
  if (queries.empty()) throw std::invalid_argument("proto_ce_loss: no queries");
  auto protos = prototypes(support);
  std::vector<Eigen::VectorXd> ordered;
  std::map<std::string, int> index;
  for (const auto& [cls, proto] : protos) {
    index[cls] = static_cast<int>(ordered.size());
    ordered.push_back(proto);
  }
  double total = 0.0;
  for (const auto& [cls, q] : queries) {
    auto it = index.find(cls);
    if (it == index.end())
      throw std::invalid_argument("proto_ce_loss: query label not in support: " + cls);
    total -= proto_log_probs(q, ordered)[it->second];
  }
  return total / static_cast<double>(queries.size());
}

double similarity_entropy_loss(const std::vector<Eigen::VectorXd>& batch, double tau,
                               EntropySign sign) {
  if (batch.size() < 2)
    throw std::invalid_argument("similarity_entropy_loss: batch size must be >= 2");
  if (tau <= 0.0) throw std::invalid_argument("similarity_entropy_loss: tau must be > 0");
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    Eigen::VectorXd v(batch.size() - 1);
    Eigen::Index at = 0;
    for (std::size_t j = 0; j < batch.size(); ++j) {
      if (j == i) continue;
      double d = numerics::euclidean_sq(batch[i], batch[j]);
      v[at++] = sign == EntropySign::kAsWritten ? d : -d;
    }
    total += numerics::shannon_entropy(numerics::softmax(v, tau));
  }
  return total / static_cast<double>(batch.size());
}

namespace {
double mean_log(const std::vector<double>& probs, bool one_minus) {
  if (probs.empty()) throw std::invalid_argument("adversarial loss: empty batch");
  double total = 0.0;
  for (double p : probs) {
    double q = one_minus ? 1.0 - p : p;
    if (q <= 0.0 || p <= 0.0 || p >= 1.0)
      throw NumericError("adversarial loss: probability outside (0,1)");
    total += std::log(q);
  }
  return total / static_cast<double>(probs.size());
}
}  // namespace

double discriminator_loss(const std::vector<double>& src_probs,
                          const std::vector<double>& tgt_probs) {
  return -mean_log(src_probs, false) - mean_log(tgt_probs, true);
}

double extractor_adv_loss(const std::vector<double>& src_probs,
                          const std::vector<double>& tgt_probs) {
  return -mean_log(src_probs, true) - mean_log(tgt_probs, false);
}

ad::Var proto_ce_loss(ad::Tape& t, const std::vector<std::vector<ad::Var>>& support,
                      const std::vector<std::pair<ad::Var, int>>& queries) {
  if (support.size() < 2)
    throw std::invalid_argument("proto_ce_loss: need >= 2 classes");
  if (queries.empty()) throw std::invalid_argument("proto_ce_loss: no queries");
  std::vector<ad::Var> protos;
  for (const auto& feats : support) {
    if (feats.empty()) throw std::invalid_argument("proto_ce_loss: empty support class");
    ad::Var acc = feats[0];
    for (std::size_t j = 1; j < feats.size(); ++j) acc = t.add(acc, feats[j]);
    protos.push_back(t.scale(acc, 1.0 / static_cast<double>(feats.size())));
  }
  std::vector<ad::Var> terms;
  for (const auto& [q, cls] : queries) {
    if (cls < 0 || cls >= static_cast<int>(protos.size()))
      throw std::invalid_argument("proto_ce_loss: query class index out of range");
    std::vector<ad::Var> neg_d;
    for (const auto& c : protos) neg_d.push_back(t.neg(t.squared_distance(q, c)));
    ad::Var v = t.concat(neg_d);
    // -log P(y|q) = d_y + logsumexp(-d)
    terms.push_back(t.sub(t.logsumexp(v), t.pick(v, cls)));
  }
  return t.mean(terms);
}

ad::Var similarity_entropy_loss(ad::Tape& t, const std::vector<ad::Var>& batch,
                                double tau, EntropySign sign) {
  if (batch.size() < 2)
    throw std::invalid_argument("similarity_entropy_loss: batch size must be >= 2");
  if (tau <= 0.0) throw std::invalid_argument("similarity_entropy_loss: tau must be > 0");
  std::vector<ad::Var> terms;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    std::vector<ad::Var> dists;
    for (std::size_t j = 0; j < batch.size(); ++j) {
      if (j == i) continue;
      ad::Var d = t.squared_distance(batch[i], batch[j]);
      dists.push_back(sign == EntropySign::kAsWritten ? d : t.neg(d));
    }
    terms.push_back(t.softmax_entropy(t.concat(dists), tau));
  }
  return t.mean(terms);
}

namespace {
ad::Var mean_log_ad(ad::Tape& t, const std::vector<ad::Var>& probs, bool one_minus) {
  if (probs.empty()) throw std::invalid_argument("adversarial loss: empty batch");
  std::vector<ad::Var> logs;
  for (ad::Var p : probs)
    logs.push_back(t.log(one_minus ? t.affine(p, -1.0, 1.0) : p));
  return t.mean(logs);
}
}  // namespace

ad::Var discriminator_loss(ad::Tape& t, const std::vector<ad::Var>& src_probs,
                           const std::vector<ad::Var>& tgt_probs) {
  return t.neg(t.add(mean_log_ad(t, src_probs, false), mean_log_ad(t, tgt_probs, true)));
}

ad::Var extractor_adv_loss(ad::Tape& t, const std::vector<ad::Var>& src_probs,
                           const std::vector<ad::Var>& tgt_probs) {
  return t.neg(t.add(mean_log_ad(t, src_probs, true), mean_log_ad(t, tgt_probs, false)));
}

}  // namespace dafec::losses
