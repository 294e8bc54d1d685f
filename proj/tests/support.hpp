#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <random>
#include <vector>

#include "cpgp/basis.hpp"
#include "cpgp/oracle.hpp"

namespace cpgp::test {

inline std::vector<double> random_values(std::mt19937_64& rng, std::size_t n, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  std::vector<double> v(n);
  for (double& x : v) x = normal(rng);
  return v;
}

inline Eigen::VectorXd random_vector(std::mt19937_64& rng, Eigen::Index n) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = normal(rng);
  return v;
}

/// K + delta^2 I on the first `size` grid points, assembled entrywise.
inline Eigen::MatrixXd dense_k_delta(Eigen::Index size, double theta, double delta,
                                     std::size_t p, std::size_t d) {
  Eigen::MatrixXd k(size, size);
  for (Eigen::Index i = 0; i < size; ++i) {
    for (Eigen::Index j = 0; j < size; ++j) {
      k(i, j) = oracle::grid_kernel(i - j, theta, p, d) + (i == j ? delta * delta : 0.0);
    }
  }
  return k;
}

inline Eigen::MatrixXd dense_design(const RegressionBasis& basis, std::size_t n, double fs) {
  const auto q = static_cast<Eigen::Index>(basis.size());
  Eigen::MatrixXd f(static_cast<Eigen::Index>(n), q);
  for (std::size_t i = 0; i < n; ++i) {
    if (q > 0) f.row(static_cast<Eigen::Index>(i)) =
        basis.evaluate(static_cast<double>(i + 1) / fs).transpose();
  }
  return f;
}

/// Conditional quantities of the trailing block given the leading kp block
/// of the dense covariance: Pi, y_dot and Gamma_dot.
struct DenseConditional {
  Eigen::MatrixXd pi;
  Eigen::VectorXd y_dot;
  Eigen::MatrixXd g_dot;
};

inline DenseConditional dense_conditional(const std::vector<double>& y, double fs, double theta,
                                          double delta, std::size_t p, std::size_t d,
                                          const RegressionBasis& basis) {
  const auto n = static_cast<Eigen::Index>(y.size());
  const auto kp = static_cast<Eigen::Index>((y.size() / p) * p);
  const Eigen::Index m = n - kp;
  const Eigen::MatrixXd k = dense_k_delta(n, theta, delta, p, d);
  const Eigen::MatrixXd f = dense_design(basis, y.size(), fs);
  const Eigen::Map<const Eigen::VectorXd> yv(y.data(), n);

  const Eigen::MatrixXd sigma = k.topLeftCorner(kp, kp);
  const Eigen::MatrixXd xi = k.topRightCorner(kp, m);
  const Eigen::MatrixXd star = k.bottomRightCorner(m, m);
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(sigma);
  const Eigen::MatrixXd si_xi = lu.solve(xi);

  DenseConditional c;
  c.pi = star - xi.transpose() * si_xi;
  c.y_dot = yv.tail(m) - si_xi.transpose() * yv.head(kp);
  c.g_dot = f.bottomRows(m) - si_xi.transpose() * f.topRows(kp);
  return c;
}

}  // namespace cpgp::test
