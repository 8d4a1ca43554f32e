#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

namespace dafec::numerics {

// Sum of squared componentwise differences.
double euclidean_sq(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

// Max-shifted softmax with temperature tau > 0.
Eigen::VectorXd softmax(const Eigen::VectorXd& v, double tau);

// -sum p ln p with 0 ln 0 == 0; natural log. Requires p >= 0, sum(p) = 1
// within 1e-9.
double shannon_entropy(const Eigen::VectorXd& p);

// Central-difference gradient estimate, one probe pair per coordinate.
Eigen::VectorXd finite_diff_grad(
    const std::function<double(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& params, double eps);

// Top-n principal directions of the row-major sample matrix, by power
// iteration with deflation on the covariance. Rows of the result are unit
// component vectors ordered by decreasing eigenvalue.
Eigen::MatrixXd principal_components(const Eigen::MatrixXd& samples, int n,
                                     double tol = 1e-8);

}  // namespace dafec::numerics
