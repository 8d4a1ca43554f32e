#include "dafec/ad.hpp"

#include <cmath>
#include <stdexcept>

#include "dafec/errors.hpp"

namespace dafec::ad {

namespace {
constexpr double kProbClamp = 1e-12;
}

int Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

const Tape::Node& Tape::node(Var v) const {
  if (v.id < 0 || v.id >= static_cast<int>(nodes_.size()))
    throw std::invalid_argument("ad: dangling Var handle");
  return nodes_[v.id];
}

void Tape::check_same_dim(Var a, Var b, const char* what) const {
  if (node(a).value.size() != node(b).value.size())
    throw std::invalid_argument(std::string("ad: dimension mismatch in ") + what);
}

Var Tape::leaf(const Eigen::VectorXd& value) {
  Node n;
  n.op = Op::kLeaf;
  n.value = value;
  n.rows = static_cast<int>(value.size());
  n.cols = 1;
  return {push(std::move(n))};
}

Var Tape::leaf(const Eigen::MatrixXd& value) {
  Node n;
  n.op = Op::kLeaf;
  n.value = Eigen::Map<const Eigen::VectorXd>(value.data(), value.size());
  n.rows = static_cast<int>(value.rows());
  n.cols = static_cast<int>(value.cols());
  return {push(std::move(n))};
}

Var Tape::scalar(double value) {
  Eigen::VectorXd v(1);
  v[0] = value;
  return leaf(v);
}

Var Tape::matvec(Var w, Var x) {
  const Node& nw = node(w);
  const Node& nx = node(x);
  if (nw.cols != nx.value.size())
    throw std::invalid_argument("ad: matvec shape mismatch");
  Eigen::Map<const Eigen::MatrixXd> W(nw.value.data(), nw.rows, nw.cols);
  Node n;
  n.op = Op::kMatVec;
  n.value = W * nx.value;
  n.a = w.id;
  n.b = x.id;
  n.rows = nw.rows;
  n.cols = nw.cols;
  return {push(std::move(n))};
}

Var Tape::add(Var a, Var b) {
  check_same_dim(a, b, "add");
  Node n;
  n.op = Op::kAdd;
  n.value = node(a).value + node(b).value;
  n.a = a.id;
  n.b = b.id;
  return {push(std::move(n))};
}

Var Tape::sub(Var a, Var b) {
  check_same_dim(a, b, "sub");
  Node n;
  n.op = Op::kSub;
  n.value = node(a).value - node(b).value;
  n.a = a.id;
  n.b = b.id;
  return {push(std::move(n))};
}

Var Tape::affine(Var a, double alpha, double beta) {
  Node n;
  n.op = Op::kAffine;
  n.value = (alpha * node(a).value).array() + beta;
  n.a = a.id;
  n.c0 = alpha;
  n.c1 = beta;
  return {push(std::move(n))};
}

Var Tape::tanh(Var a) {
  Node n;
  n.op = Op::kTanh;
  n.value = node(a).value.array().tanh();
  n.a = a.id;
  return {push(std::move(n))};
}

Var Tape::sigmoid(Var a) {
  Node n;
  n.op = Op::kSigmoid;
  n.value = (1.0 / (1.0 + (-node(a).value.array()).exp()))
                .cwiseMax(kProbClamp)
                .cwiseMin(1.0 - kProbClamp);
  n.a = a.id;
  return {push(std::move(n))};
}

Var Tape::log(Var a) {
  const Node& na = node(a);
  if ((na.value.array() <= 0.0).any())
    throw std::invalid_argument("ad: log of non-positive value");
  Node n;
  n.op = Op::kLog;
  n.value = na.value.array().log();
  n.a = a.id;
  return {push(std::move(n))};
}

Var Tape::squared_norm(Var a) {
  Node n;
  n.op = Op::kSquaredNorm;
  n.value.resize(1);
  n.value[0] = node(a).value.squaredNorm();
  n.a = a.id;
  return {push(std::move(n))};
}

Var Tape::sum(Var a) {
  Node n;
  n.op = Op::kSum;
  n.value.resize(1);
  n.value[0] = node(a).value.sum();
  n.a = a.id;
  return {push(std::move(n))};
}

Var Tape::concat(const std::vector<Var>& parts) {
  if (parts.empty()) throw std::invalid_argument("ad: concat of nothing");
  Eigen::Index total = 0;
  for (Var p : parts) total += node(p).value.size();
  Node n;
  n.op = Op::kConcat;
  n.value.resize(total);
  Eigen::Index at = 0;
  for (Var p : parts) {
    const auto& v = node(p).value;
    n.value.segment(at, v.size()) = v;
    at += v.size();
    n.parents.push_back(p.id);
  }
  return {push(std::move(n))};
}

Var Tape::logsumexp(Var v) {
  const auto& x = node(v).value;
  double m = x.maxCoeff();
  Node n;
  n.op = Op::kLogSumExp;
  n.value.resize(1);
  n.value[0] = m + std::log((x.array() - m).exp().sum());
  n.a = v.id;
  return {push(std::move(n))};
}

Var Tape::pick(Var v, int index) {
  const auto& x = node(v).value;
  if (index < 0 || index >= x.size())
    throw std::invalid_argument("ad: pick index out of range");
  Node n;
  n.op = Op::kPick;
  n.value.resize(1);
  n.value[0] = x[index];
  n.a = v.id;
  n.index = index;
  return {push(std::move(n))};
}

Var Tape::softmax_entropy(Var v, double tau) {
  if (tau <= 0.0) throw std::invalid_argument("ad: softmax temperature must be > 0");
  const auto& x = node(v).value;
  Eigen::ArrayXd z = x.array() / tau;
  z -= z.maxCoeff();
  Eigen::ArrayXd p = z.exp();
  p /= p.sum();
  double h = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i)
    if (p[i] > 0.0) h -= p[i] * std::log(p[i]);
  Node n;
  n.op = Op::kSoftmaxEntropy;
  n.value.resize(1);
  n.value[0] = h;
  n.a = v.id;
  n.c0 = tau;
  return {push(std::move(n))};
}

Var Tape::mean(const std::vector<Var>& scalars) {
  if (scalars.empty()) throw std::invalid_argument("ad: mean of nothing");
  return scale(sum(concat(scalars)), 1.0 / static_cast<double>(scalars.size()));
}

const Eigen::VectorXd& Tape::value(Var v) const { return node(v).value; }

double Tape::value_scalar(Var v) const {
  const auto& x = node(v).value;
  if (x.size() != 1) throw std::invalid_argument("ad: value_scalar on non-scalar");
  return x[0];
}

const Eigen::VectorXd& Tape::grad(Var v) const {
  const Node& n = node(v);
  if (n.grad.size() != n.value.size())
    throw std::logic_error("ad: grad read before backward");
  return n.grad;
}

Eigen::MatrixXd Tape::grad_matrix(Var v) const {
  const Node& n = node(v);
  const auto& g = grad(v);
  return Eigen::Map<const Eigen::MatrixXd>(g.data(), n.rows, n.cols);
}

void Tape::backward(Var scalar_root) {
  const Node& root = node(scalar_root);
  if (root.value.size() != 1)
    throw std::invalid_argument("ad: backward from non-scalar");
  for (int i = 0; i <= scalar_root.id; ++i)
    nodes_[i].grad = Eigen::VectorXd::Zero(nodes_[i].value.size());
  nodes_[scalar_root.id].grad[0] = 1.0;

  for (int i = scalar_root.id; i >= 0; --i) {
    Node& n = nodes_[i];
    const Eigen::VectorXd& g = n.grad;
    switch (n.op) {
      case Op::kLeaf:
        break;
      case Op::kMatVec: {
        Node& nw = nodes_[n.a];
        Node& nx = nodes_[n.b];
        Eigen::Map<const Eigen::MatrixXd> W(nw.value.data(), n.rows, n.cols);
        nx.grad.noalias() += W.transpose() * g;
        Eigen::Map<Eigen::MatrixXd> gW(nw.grad.data(), n.rows, n.cols);
        gW.noalias() += g * nx.value.transpose();
        break;
      }
      case Op::kAdd:
        nodes_[n.a].grad += g;
        nodes_[n.b].grad += g;
        break;
      case Op::kSub:
        nodes_[n.a].grad += g;
        nodes_[n.b].grad -= g;
        break;
      case Op::kAffine:
        nodes_[n.a].grad += n.c0 * g;
        break;
      case Op::kTanh:
        nodes_[n.a].grad.array() += g.array() * (1.0 - n.value.array().square());
        break;
      case Op::kSigmoid:
        nodes_[n.a].grad.array() += g.array() * n.value.array() * (1.0 - n.value.array());
        break;
      case Op::kLog:
        nodes_[n.a].grad.array() += g.array() / nodes_[n.a].value.array();
        break;
      case Op::kSquaredNorm:
        nodes_[n.a].grad += 2.0 * g[0] * nodes_[n.a].value;
        break;
      case Op::kSum:
        nodes_[n.a].grad.array() += g[0];
        break;
      case Op::kConcat: {
        Eigen::Index at = 0;
        for (int p : n.parents) {
          Node& np = nodes_[p];
          np.grad += g.segment(at, np.value.size());
          at += np.value.size();
        }
        break;
      }
      case Op::kLogSumExp: {
        Node& na = nodes_[n.a];
        na.grad.array() += g[0] * (na.value.array() - n.value[0]).exp();
        break;
      }
      case Op::kPick:
        nodes_[n.a].grad[n.index] += g[0];
        break;
      case Op::kSoftmaxEntropy: {
        // dH/dv_k = -p_k (ln p_k + H) / tau
        Node& na = nodes_[n.a];
        Eigen::ArrayXd z = na.value.array() / n.c0;
        z -= z.maxCoeff();
        Eigen::ArrayXd p = z.exp();
        p /= p.sum();
        double h = n.value[0];
        for (Eigen::Index k = 0; k < p.size(); ++k) {
          if (p[k] > 0.0) na.grad[k] += -g[0] * p[k] * (std::log(p[k]) + h) / n.c0;
        }
        break;
      }
    }
  }
}

}  // namespace dafec::ad
