#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <span>
#include <string>
#include <vector>

#include "cpgp/detail/fft.hpp"
#include "cpgp/error.hpp"

namespace cpgp {

using Eigen::Index;

/// Eigenvalues of the symmetric circulant matrix with the given first row,
/// in Fourier order (eigenvalue j belongs to mode j).
inline Eigen::VectorXd circulant_eigenvalues(const Eigen::VectorXd& first_row) {
  detail::require(first_row.size() >= 1, "circulant row must be non-empty");
  detail::require(first_row.allFinite(), "circulant row must be finite");
  const Index p = first_row.size();
  const auto spectrum = detail::RealFft::instance().forward(
      std::span<const double>(first_row.data(), static_cast<std::size_t>(p)));

  const double scale = std::max(first_row.cwiseAbs().maxCoeff(), 1e-300);
  double worst_imag = 0.0;
  for (const auto& z : spectrum) worst_imag = std::max(worst_imag, std::abs(z.imag()));
  if (worst_imag > 1e-8 * scale) {
    detail::fail(ErrorCode::numerical_symmetry,
                 "circulant row is not symmetric: imaginary spectrum residual " +
                     std::to_string(worst_imag));
  }

  Eigen::VectorXd eig(p);
  for (Index j = 0; j < p; ++j) {
    const Index half = j <= p / 2 ? j : p - j;
    eig[j] = spectrum[static_cast<std::size_t>(half)].real();
  }
  return eig;
}

namespace detail {

// x -> F^{-1} diag(multiplier) F x for a real symmetric spectrum.
inline Eigen::VectorXd apply_spectrum(const Eigen::VectorXd& multiplier,
                                      const Eigen::VectorXd& x) {
  const Index p = multiplier.size();
  require(x.size() == p, "dimension mismatch in circulant product");
  auto& fft = RealFft::instance();
  auto bins = fft.forward(std::span<const double>(x.data(), static_cast<std::size_t>(p)));
  for (std::size_t j = 0; j < bins.size(); ++j) bins[j] *= multiplier[static_cast<Index>(j)];
  const auto out = fft.inverse(bins, static_cast<std::size_t>(p));
  return Eigen::Map<const Eigen::VectorXd>(out.data(), p);
}

inline Eigen::MatrixXd apply_spectrum(const Eigen::VectorXd& multiplier,
                                      const Eigen::MatrixXd& x) {
  Eigen::MatrixXd out(x.rows(), x.cols());
  for (Index c = 0; c < x.cols(); ++c) {
    out.col(c) = apply_spectrum(multiplier, Eigen::VectorXd(x.col(c)));
  }
  return out;
}

}  // namespace detail

/// Symmetric circulant matrix held by its first row and its FFT spectrum.
/// Products and solves cost O(p log p) per column; the matrix and its
/// inverse are never formed.
class SymmetricCirculant {
 public:
  explicit SymmetricCirculant(Eigen::VectorXd first_row)
      : first_row_(std::move(first_row)),
        eigenvalues_(circulant_eigenvalues(first_row_)) {}

  static SymmetricCirculant from_eigenvalues(Eigen::VectorXd eigenvalues) {
    detail::require(eigenvalues.size() >= 1, "spectrum must be non-empty");
    const Index p = eigenvalues.size();
    Eigen::VectorXd delta = Eigen::VectorXd::Zero(p);
    delta[0] = 1.0;
    Eigen::VectorXd row = detail::apply_spectrum(eigenvalues, delta);
    return SymmetricCirculant(std::move(row), std::move(eigenvalues));
  }

  Index size() const noexcept { return first_row_.size(); }
  const Eigen::VectorXd& first_row() const noexcept { return first_row_; }
  const Eigen::VectorXd& eigenvalues() const noexcept { return eigenvalues_; }

  Eigen::VectorXd multiply(const Eigen::VectorXd& x) const {
    return detail::apply_spectrum(eigenvalues_, x);
  }
  Eigen::MatrixXd multiply(const Eigen::MatrixXd& x) const {
    return detail::apply_spectrum(eigenvalues_, x);
  }

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const {
    return detail::apply_spectrum(inverse_spectrum(), rhs);
  }
  Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const {
    return detail::apply_spectrum(inverse_spectrum(), rhs);
  }

  double logdet() const {
    require_positive();
    return eigenvalues_.array().log().sum();
  }

  Eigen::VectorXd inverse_spectrum() const {
    require_positive();
    return eigenvalues_.cwiseInverse();
  }

  Eigen::MatrixXd dense() const {
    const Index p = size();
    Eigen::MatrixXd out(p, p);
    for (Index i = 0; i < p; ++i) {
      for (Index j = 0; j < p; ++j) out(i, j) = first_row_[((j - i) % p + p) % p];
    }
    return out;
  }

 private:
  SymmetricCirculant(Eigen::VectorXd row, Eigen::VectorXd eig)
      : first_row_(std::move(row)), eigenvalues_(std::move(eig)) {}

  void require_positive() const {
    const double lo = eigenvalues_.minCoeff();
    if (!(lo > 0.0)) {
      detail::fail(ErrorCode::singular_matrix,
                   "circulant matrix is singular: min eigenvalue " +
                       std::to_string(lo));
    }
  }

  Eigen::VectorXd first_row_;
  Eigen::VectorXd eigenvalues_;
};

/// Symmetric Toeplitz matrix held by its first column.
class SymmetricToeplitz {
 public:
  explicit SymmetricToeplitz(Eigen::VectorXd first_column)
      : column_(std::move(first_column)) {
    detail::require(column_.allFinite(), "toeplitz column must be finite");
  }

  Index size() const noexcept { return column_.size(); }
  const Eigen::VectorXd& first_column() const noexcept { return column_; }

  Eigen::MatrixXd dense() const {
    const Index m = size();
    Eigen::MatrixXd out(m, m);
    for (Index i = 0; i < m; ++i) {
      for (Index j = 0; j < m; ++j) out(i, j) = column_[std::abs(i - j)];
    }
    return out;
  }

  double pivot_floor() const { return 1e-12 * column_[0]; }

 private:
  Eigen::VectorXd column_;
};

enum class ToeplitzMethod { schur, dense };

namespace detail {

[[noreturn]] inline void toeplitz_not_pd(Index step, double pivot) {
  fail(ErrorCode::not_positive_definite,
       "toeplitz matrix is not positive definite at pivot " +
           std::to_string(step) + " (value " + std::to_string(pivot) + ")");
}

// Schur algorithm on the displacement generator of T. Each step emits one
// column of the Cholesky factor L (T = L L^T) and hands it to `emit`. O(m^2).
template <class Emit>
void schur_columns(const SymmetricToeplitz& t, Emit&& emit) {
  const Index m = t.size();
  if (m == 0) return;
  const Eigen::VectorXd& col = t.first_column();
  const double floor = t.pivot_floor();
  if (!(col[0] > 0.0)) toeplitz_not_pd(0, col[0]);

  Eigen::VectorXd u = col / std::sqrt(col[0]);
  Eigen::VectorXd v = u;
  v[0] = 0.0;

  for (Index j = 0; j < m; ++j) {
    const double pivot = u[j];
    if (!(pivot * pivot >= floor) || !std::isfinite(pivot)) toeplitz_not_pd(j, pivot * pivot);
    emit(j, u);
    if (j + 1 == m) break;
    // Shift u down one slot, then rotate hyperbolically to zero v[j + 1].
    for (Index i = m - 1; i > j; --i) u[i] = u[i - 1];
    u[j] = 0.0;
    const double rho = v[j + 1] / u[j + 1];
    if (!(std::abs(rho) < 1.0)) toeplitz_not_pd(j + 1, 1.0 - rho * rho);
    const double c = std::sqrt((1.0 - rho) * (1.0 + rho));
    for (Index i = j + 1; i < m; ++i) {
      const double ui = u[i];
      const double vi = v[i];
      u[i] = (ui - rho * vi) / c;
      v[i] = (vi - rho * ui) / c;
    }
    v[j + 1] = 0.0;
  }
}

}  // namespace detail

/// Cholesky factor of a symmetric positive definite Toeplitz matrix.
class ToeplitzCholesky {
 public:
  explicit ToeplitzCholesky(const SymmetricToeplitz& t,
                            ToeplitzMethod method = ToeplitzMethod::schur) {
    const Index m = t.size();
    lower_ = Eigen::MatrixXd::Zero(m, m);
    if (method == ToeplitzMethod::schur) {
      detail::schur_columns(t, [&](Index j, const Eigen::VectorXd& u) {
        lower_.col(j).tail(m - j) = u.tail(m - j);
      });
    } else {
      const double floor = m > 0 ? t.pivot_floor() : 0.0;
      Eigen::MatrixXd a = t.dense();
      // Column Cholesky so the pivot floor applies exactly as in the Schur path.
      for (Index j = 0; j < m; ++j) {
        double pivot = a(j, j) - lower_.row(j).head(j).squaredNorm();
        if (!(pivot >= floor) || !std::isfinite(pivot)) detail::toeplitz_not_pd(j, pivot);
        const double ljj = std::sqrt(pivot);
        lower_(j, j) = ljj;
        for (Index i = j + 1; i < m; ++i) {
          lower_(i, j) =
              (a(i, j) - lower_.row(i).head(j).dot(lower_.row(j).head(j))) / ljj;
        }
      }
    }
    logdet_ = 2.0 * lower_.diagonal().array().log().sum();
  }

  const Eigen::MatrixXd& lower() const noexcept { return lower_; }
  double logdet() const noexcept { return logdet_; }
  Index size() const noexcept { return lower_.rows(); }

  template <class Rhs>
  typename Rhs::PlainObject whiten(const Rhs& rhs) const {
    return lower_.template triangularView<Eigen::Lower>().solve(rhs);
  }

  template <class Rhs>
  typename Rhs::PlainObject solve(const Rhs& rhs) const {
    typename Rhs::PlainObject z = lower_.template triangularView<Eigen::Lower>().solve(rhs);
    lower_.transpose().template triangularView<Eigen::Upper>().solveInPlace(z);
    return z;
  }

 private:
  Eigen::MatrixXd lower_;
  double logdet_ = 0.0;
};

struct ToeplitzSolveResult {
  double logdet;
  Eigen::MatrixXd solution;
};

inline ToeplitzSolveResult toeplitz_cholesky_logdet_solve(
    const SymmetricToeplitz& t, const Eigen::MatrixXd& rhs,
    ToeplitzMethod method = ToeplitzMethod::schur) {
  detail::require(rhs.rows() == t.size(), "rhs rows must match toeplitz size");
  ToeplitzCholesky chol(t, method);
  return {chol.logdet(), chol.solve(rhs)};
}

struct ToeplitzWhitening {
  double logdet;
  Eigen::MatrixXd whitened;  ///< L^{-1} rhs
};

/// log|T| and L^{-1} rhs in one Schur sweep without storing L: memory O(m r)
/// for an m x r right-hand side.
inline ToeplitzWhitening toeplitz_whiten(const SymmetricToeplitz& t,
                                         Eigen::MatrixXd rhs) {
  detail::require(rhs.rows() == t.size(), "rhs rows must match toeplitz size");
  const Index m = t.size();
  double logdet = 0.0;
  detail::schur_columns(t, [&](Index j, const Eigen::VectorXd& u) {
    const double ljj = u[j];
    logdet += 2.0 * std::log(ljj);
    rhs.row(j) /= ljj;
    const Index tail = m - j - 1;
    if (tail > 0) rhs.bottomRows(tail).noalias() -= u.tail(tail) * rhs.row(j);
  });
  return {logdet, std::move(rhs)};
}

}  // namespace cpgp
