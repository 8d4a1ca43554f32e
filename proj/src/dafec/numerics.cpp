#include "dafec/numerics.hpp"

#include <cmath>
#include <stdexcept>

#include "dafec/errors.hpp"

namespace dafec::numerics {

double euclidean_sq(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size())
    throw std::invalid_argument("euclidean_sq: dimension mismatch");
  return (a - b).squaredNorm();
}

Eigen::VectorXd softmax(const Eigen::VectorXd& v, double tau) {
  if (tau <= 0.0) throw std::invalid_argument("softmax: tau must be > 0");
  Eigen::ArrayXd z = v.array() / tau;
  z -= z.maxCoeff();
  Eigen::ArrayXd e = z.exp();
  return e / e.sum();
}

double shannon_entropy(const Eigen::VectorXd& p) {
  if ((p.array() < 0.0).any())
    throw std::invalid_argument("shannon_entropy: negative entry");
  if (std::abs(p.sum() - 1.0) > 1e-9)
    throw std::invalid_argument("shannon_entropy: probabilities must sum to 1");
  double h = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i)
    if (p[i] > 0.0) h -= p[i] * std::log(p[i]);
  return h;
}

Eigen::VectorXd finite_diff_grad(
    const std::function<double(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& params, double eps) {
  Eigen::VectorXd g(params.size());
  Eigen::VectorXd p = params;
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    p[i] = params[i] + eps;
    double fp = f(p);
    p[i] = params[i] - eps;
    double fm = f(p);
    p[i] = params[i];
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw NumericError("finite_diff_grad: non-finite objective at probe");
    g[i] = (fp - fm) / (2.0 * eps);
  }
  return g;
}

Eigen::MatrixXd principal_components(const Eigen::MatrixXd& samples, int n,
                                     double tol) {
  if (samples.rows() < 2) throw std::invalid_argument("pca: need >= 2 samples");
  if (n < 1 || n > samples.cols()) throw std::invalid_argument("pca: bad component count");
  Eigen::MatrixXd centered = samples.rowwise() - samples.colwise().mean();
  Eigen::MatrixXd cov =
      centered.transpose() * centered / static_cast<double>(samples.rows() - 1);

  Eigen::MatrixXd comps(n, samples.cols());
  for (int c = 0; c < n; ++c) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(cov.rows());
    v[c % cov.rows()] = 1.0;
    for (int it = 0; it < 10000; ++it) {
      Eigen::VectorXd w = cov * v;
      double norm = w.norm();
      if (norm == 0.0) break;  // zero eigenvalue, any direction works
      w /= norm;
      double delta = (w - v).norm();
      v = w;
      if (delta < tol) break;
    }
    comps.row(c) = v.transpose();
    double lambda = v.dot(cov * v);
    cov -= lambda * v * v.transpose();
  }
  return comps;
}

}  // namespace dafec::numerics
