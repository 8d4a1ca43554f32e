#pragma once

#include <Eigen/Dense>
#include <vector>

namespace dafec::ad {

// Handle into a Tape. Scalars are size-1 values; matrices are stored
// flattened column-major with their shape kept on the node.
struct Var {
  int id = -1;
};

// Reverse-mode tape over dense vector values. One tape records one scalar
// objective; backward() walks the recorded ops once in reverse creation
// order and accumulates gradients into every node.
class Tape {
 public:
  Var leaf(const Eigen::VectorXd& value);
  Var leaf(const Eigen::MatrixXd& value);
  Var scalar(double value);

  // value = reshape(w) * x, where w was created via the matrix leaf.
  Var matvec(Var w, Var x);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  // value = alpha * a + beta (elementwise)
  Var affine(Var a, double alpha, double beta);
  Var scale(Var a, double alpha) { return affine(a, alpha, 0.0); }
  Var neg(Var a) { return affine(a, -1.0, 0.0); }
  Var tanh(Var a);
  // Sigmoid with output clamped to [1e-12, 1 - 1e-12] so downstream logs
  // stay finite.
  Var sigmoid(Var a);
  Var log(Var a);
  Var squared_norm(Var a);  // scalar
  Var sum(Var a);           // scalar
  Var concat(const std::vector<Var>& parts);
  Var logsumexp(Var v);  // scalar, max-shifted
  Var pick(Var v, int index);
  // Shannon entropy of softmax(v / tau); fused for an analytic backward.
  Var softmax_entropy(Var v, double tau);

  Var squared_distance(Var a, Var b) { return squared_norm(sub(a, b)); }
  Var mean(const std::vector<Var>& scalars);

  const Eigen::VectorXd& value(Var v) const;
  double value_scalar(Var v) const;
  void backward(Var scalar_root);
  const Eigen::VectorXd& grad(Var v) const;
  Eigen::MatrixXd grad_matrix(Var v) const;  // for matrix leaves

  int size() const { return static_cast<int>(nodes_.size()); }

 private:
  enum class Op {
    kLeaf,
    kMatVec,
    kAdd,
    kSub,
    kAffine,
    kTanh,
    kSigmoid,
    kLog,
    kSquaredNorm,
    kSum,
    kConcat,
    kLogSumExp,
    kPick,
    kSoftmaxEntropy,
  };

  struct Node {
    Op op = Op::kLeaf;
    Eigen::VectorXd value;
    Eigen::VectorXd grad;
    int a = -1;
    int b = -1;
    std::vector<int> parents;  // kConcat only
    double c0 = 0.0;
    double c1 = 0.0;
    int rows = 0;  // matrix leaves / kMatVec operand shape
    int cols = 0;
    int index = 0;  // kPick
  };

  int push(Node n);
  const Node& node(Var v) const;
  void check_same_dim(Var a, Var b, const char* what) const;

  std::vector<Node> nodes_;
};

}  // namespace dafec::ad
