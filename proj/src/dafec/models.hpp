#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "dafec/ad.hpp"

namespace dafec::models {

struct OptimizerState {
  double lr = 0.1;  // plain SGD, no per-parameter state
};

struct LayerParams {
  Eigen::MatrixXd W;
  Eigen::VectorXd b;
};

// Fully connected feature extractor: tanh between layers, last layer linear.
struct ExtractorParams {
  std::vector<LayerParams> layers;
  int in_dim() const { return static_cast<int>(layers.front().W.cols()); }
  int out_dim() const { return static_cast<int>(layers.back().W.rows()); }
  std::size_t param_count() const;
};

// Two-layer domain discriminator: tanh hidden, sigmoid output.
struct DiscriminatorParams {
  LayerParams hidden;
  LayerParams out;  // 1 x hidden_dim
  int in_dim() const { return static_cast<int>(hidden.W.cols()); }
};

// Fan-in scaled uniform weights, zero biases, deterministic given seed.
ExtractorParams init_extractor(const std::vector<int>& arch, std::uint64_t seed);
DiscriminatorParams init_discriminator(int d_f, int hidden_dim, std::uint64_t seed);

Eigen::VectorXd encode(const ExtractorParams& p, const Eigen::VectorXd& x);
double discriminate(const DiscriminatorParams& p, const Eigen::VectorXd& f);

// p <- p - lr * g. Rejects non-finite gradients.
void sgd_step(Eigen::Ref<Eigen::VectorXd> params, const Eigen::VectorXd& grads,
              const OptimizerState& opt);

// --- tape staging for training steps ---

struct StagedLayer {
  ad::Var W;
  ad::Var b;
};

struct StagedExtractor {
  std::vector<StagedLayer> layers;
};

struct StagedDiscriminator {
  StagedLayer hidden;
  StagedLayer out;
};

StagedExtractor stage(ad::Tape& t, const ExtractorParams& p);
StagedDiscriminator stage(ad::Tape& t, const DiscriminatorParams& p);
ad::Var encode(ad::Tape& t, const StagedExtractor& e, ad::Var x);
ad::Var discriminate(ad::Tape& t, const StagedDiscriminator& d, ad::Var f);

// Apply SGD from the tape's accumulated gradients (after backward()).
void sgd_from_tape(ExtractorParams& p, const ad::Tape& t,
                   const StagedExtractor& staged, const OptimizerState& opt);
void sgd_from_tape(DiscriminatorParams& p, const ad::Tape& t,
                   const StagedDiscriminator& staged, const OptimizerState& opt);

// Textual checkpoint with named tensors and a versioned header.
void save_checkpoint(const ExtractorParams& p, const std::string& path);
ExtractorParams load_checkpoint(const std::string& path);

}  // namespace dafec::models
