#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "dafec/ad.hpp"

namespace dafec::losses {

enum class AnnealMode { kCosine, kLinear, kConstant };

struct AnnealSchedule {
  AnnealMode mode = AnnealMode::kCosine;
  int horizon = 6000;  // T
  double lambda0 = 0.5;  // constant mode only
  // Audit toggle: use the schedule exactly as printed, lambda(0) = -1 with a
  // jump to 1 past the horizon, instead of the smooth corrected form.
  bool literal = false;
};

// Entropy weight at iteration t. Corrected cosine form rises smoothly 0 -> 1.
double lambda_at(const AnnealSchedule& sched, int t);

double combined_extractor_objective(double ce, double adv, double ent, double lambda);

enum class EntropySign { kAsWritten, kNegated };

// --- plain evaluations (no gradients) ---

std::map<std::string, Eigen::VectorXd> prototypes(
    const std::vector<std::pair<std::string, std::vector<Eigen::VectorXd>>>& support);

// log P(class i | q) = -d(q, c_i) - logsumexp_j(-d(q, c_j))
Eigen::VectorXd proto_log_probs(const Eigen::VectorXd& q,
                                const std::vector<Eigen::VectorXd>& protos);

// Mean over queries of -log P(gold | q). Query labels must appear in support.
double proto_ce_loss(
    const std::vector<std::pair<std::string, std::vector<Eigen::VectorXd>>>& support,
    const std::vector<std::pair<std::string, Eigen::VectorXd>>& queries);

double similarity_entropy_loss(const std::vector<Eigen::VectorXd>& batch, double tau,
                               EntropySign sign = EntropySign::kAsWritten);

double discriminator_loss(const std::vector<double>& src_probs,
                          const std::vector<double>& tgt_probs);
double extractor_adv_loss(const std::vector<double>& src_probs,
                          const std::vector<double>& tgt_probs);

// --- tape versions used by the training steps ---

// support: per-class feature vars (class order fixed); queries carry the
// index of their class within that order.
ad::Var proto_ce_loss(ad::Tape& t, const std::vector<std::vector<ad::Var>>& support,
                      const std::vector<std::pair<ad::Var, int>>& queries);

ad::Var similarity_entropy_loss(ad::Tape& t, const std::vector<ad::Var>& batch,
                                double tau, EntropySign sign = EntropySign::kAsWritten);

ad::Var discriminator_loss(ad::Tape& t, const std::vector<ad::Var>& src_probs,
                           const std::vector<ad::Var>& tgt_probs);
ad::Var extractor_adv_loss(ad::Tape& t, const std::vector<ad::Var>& src_probs,
                           const std::vector<ad::Var>& tgt_probs);

}  // namespace dafec::losses
