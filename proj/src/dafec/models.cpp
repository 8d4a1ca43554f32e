#include "dafec/models.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "dafec/errors.hpp"

namespace dafec::models {

namespace {
constexpr double kProbClamp = 1e-12;

LayerParams init_layer(int fan_out, int fan_in, std::mt19937_64& rng) {
  double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  LayerParams l;
  l.W.resize(fan_out, fan_in);
  for (int i = 0; i < fan_out; ++i)
    for (int j = 0; j < fan_in; ++j) l.W(i, j) = dist(rng);
  l.b = Eigen::VectorXd::Zero(fan_out);
  return l;
}
}  // namespace

std::size_t ExtractorParams::param_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.W.size() + l.b.size();
  return n;
}

ExtractorParams init_extractor(const std::vector<int>& arch, std::uint64_t seed) {
  if (arch.size() < 2) throw std::invalid_argument("init_extractor: architecture needs >= 2 dims");
  for (int d : arch)
    if (d < 1) throw std::invalid_argument("init_extractor: all dims must be >= 1");
  std::mt19937_64 rng(seed);
  ExtractorParams p;
  for (std::size_t i = 0; i + 1 < arch.size(); ++i)
    p.layers.push_back(init_layer(arch[i + 1], arch[i], rng));
  return p;
}

DiscriminatorParams init_discriminator(int d_f, int hidden_dim, std::uint64_t seed) {
  if (d_f < 1 || hidden_dim < 1)
    throw std::invalid_argument("init_discriminator: dims must be >= 1");
  std::mt19937_64 rng(seed);
  DiscriminatorParams p;
  p.hidden = init_layer(hidden_dim, d_f, rng);
  p.out = init_layer(1, hidden_dim, rng);
  return p;
}

Eigen::VectorXd encode(const ExtractorParams& p, const Eigen::VectorXd& x) {
  if (x.size() != p.in_dim())
    throw std::invalid_argument("encode: input dimension mismatch");
  Eigen::VectorXd h = x;
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    h = p.layers[i].W * h + p.layers[i].b;
    if (i + 1 < p.layers.size()) h = h.array().tanh();
  }
  return h;
}

double discriminate(const DiscriminatorParams& p, const Eigen::VectorXd& f) {
  if (f.size() != p.in_dim())
    throw std::invalid_argument("discriminate: input dimension mismatch");
  Eigen::VectorXd h = (p.hidden.W * f + p.hidden.b).array().tanh();
  double z = (p.out.W * h + p.out.b)(0);
  double s = 1.0 / (1.0 + std::exp(-z));
  return std::min(1.0 - kProbClamp, std::max(kProbClamp, s));
}

void sgd_step(Eigen::Ref<Eigen::VectorXd> params, const Eigen::VectorXd& grads,
              const OptimizerState& opt) {
  if (params.size() != grads.size())
    throw std::invalid_argument("sgd_step: shape mismatch");
  if (!grads.allFinite()) throw NumericError("sgd_step: non-finite gradient");
  params -= opt.lr * grads;
}

StagedExtractor stage(ad::Tape& t, const ExtractorParams& p) {
  StagedExtractor s;
  for (const auto& l : p.layers) s.layers.push_back({t.leaf(l.W), t.leaf(l.b)});
  return s;
}

StagedDiscriminator stage(ad::Tape& t, const DiscriminatorParams& p) {
  return {{t.leaf(p.hidden.W), t.leaf(p.hidden.b)},
          {t.leaf(p.out.W), t.leaf(p.out.b)}};
}

ad::Var encode(ad::Tape& t, const StagedExtractor& e, ad::Var x) {
  ad::Var h = x;
  for (std::size_t i = 0; i < e.layers.size(); ++i) {
    h = t.add(t.matvec(e.layers[i].W, h), e.layers[i].b);
    if (i + 1 < e.layers.size()) h = t.tanh(h);
  }
  return h;
}

ad::Var discriminate(ad::Tape& t, const StagedDiscriminator& d, ad::Var f) {
  ad::Var h = t.tanh(t.add(t.matvec(d.hidden.W, f), d.hidden.b));
  ad::Var z = t.add(t.matvec(d.out.W, h), d.out.b);
  return t.sigmoid(z);
}

namespace {
void apply(Eigen::MatrixXd& W, const Eigen::MatrixXd& g, const OptimizerState& o) {
  if (!g.allFinite()) throw NumericError("sgd_from_tape: non-finite gradient");
  W -= o.lr * g;
}
void apply(Eigen::VectorXd& b, const Eigen::VectorXd& g, const OptimizerState& o) {
  if (!g.allFinite()) throw NumericError("sgd_from_tape: non-finite gradient");
  b -= o.lr * g;
}
}  // namespace

void sgd_from_tape(ExtractorParams& p, const ad::Tape& t,
                   const StagedExtractor& staged, const OptimizerState& opt) {
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    apply(p.layers[i].W, t.grad_matrix(staged.layers[i].W), opt);
    apply(p.layers[i].b, t.grad(staged.layers[i].b), opt);
  }
}

void sgd_from_tape(DiscriminatorParams& p, const ad::Tape& t,
                   const StagedDiscriminator& staged, const OptimizerState& opt) {
  apply(p.hidden.W, t.grad_matrix(staged.hidden.W), opt);
  apply(p.hidden.b, t.grad(staged.hidden.b), opt);
  apply(p.out.W, t.grad_matrix(staged.out.W), opt);
  apply(p.out.b, t.grad(staged.out.b), opt);
}

namespace {
void write_tensor(std::ostream& os, const std::string& name,
                  const Eigen::MatrixXd& m) {
  os << "tensor " << name << " " << m.rows() << " " << m.cols() << "\n";
  os.precision(17);
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) os << (j ? " " : "") << m(i, j);
    os << "\n";
  }
}

Eigen::MatrixXd read_tensor(std::istream& is, const std::string& expect_name) {
  std::string tag, name;
  int rows, cols;
  if (!(is >> tag >> name >> rows >> cols) || tag != "tensor" || name != expect_name)
    throw DataError("checkpoint: malformed tensor header, expected " + expect_name);
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j)
      if (!(is >> m(i, j))) throw DataError("checkpoint: truncated tensor " + name);
  return m;
}
}  // namespace

void save_checkpoint(const ExtractorParams& p, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw DataError("checkpoint: cannot open for writing: " + path);
  os << "dafec-checkpoint v1\n";
  os << "layers " << p.layers.size() << "\n";
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    std::string base = "extractor.l" + std::to_string(i);
    write_tensor(os, base + ".W", p.layers[i].W);
    write_tensor(os, base + ".b", p.layers[i].b);
  }
}

ExtractorParams load_checkpoint(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("checkpoint: cannot open: " + path);
  std::string magic, version;
  is >> magic >> version;
  if (magic != "dafec-checkpoint" || version != "v1")
    throw DataError("checkpoint: unrecognized header in " + path);
  std::string tag;
  std::size_t layers;
  if (!(is >> tag >> layers) || tag != "layers")
    throw DataError("checkpoint: missing layer count in " + path);
  ExtractorParams p;
  for (std::size_t i = 0; i < layers; ++i) {
    std::string base = "extractor.l" + std::to_string(i);
    LayerParams l;
    l.W = read_tensor(is, base + ".W");
    l.b = read_tensor(is, base + ".b");
    p.layers.push_back(std::move(l));
  }
  return p;
}

}  // namespace dafec::models
