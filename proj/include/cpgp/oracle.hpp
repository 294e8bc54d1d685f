#pragma once

// Dense O(n^3) periodic GP. Ground truth for the structured code paths; it
// assembles every matrix entrywise and uses only dense factorizations, so it
// shares no arithmetic with structured_linalg or the segment aggregation.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "cpgp/basis.hpp"
#include "cpgp/error.hpp"
#include "cpgp/kernel.hpp"

namespace cpgp::oracle {

using Eigen::Index;

inline constexpr std::size_t default_size_cap = 2048;

inline double grid_kernel(long long lag, double theta, std::size_t p, std::size_t d) {
  const auto pp = static_cast<long long>(p);
  long long phase = (static_cast<long long>(d) * lag) % pp;
  if (phase < 0) phase += pp;
  const double s = std::sin(std::numbers::pi * static_cast<double>(phase) / static_cast<double>(p));
  return std::exp(-(theta * theta) * (s * s));
}

inline double time_kernel(double t, double u, double theta, double period) {
  const double s = std::sin(std::numbers::pi * (t - u) / period);
  return std::exp(-(theta * theta) * (s * s));
}

struct DenseOptions {
  std::size_t size_cap = default_size_cap;
  bool override_cap = false;
};

/// K_delta = K + delta^2 I, regression matrix F and the GLS fit on them.
class DenseModel {
 public:
  DenseModel(std::span<const double> y, double fs, double theta, double delta,
             std::size_t p, std::size_t d, const RegressionBasis& basis,
             DenseOptions options = {})
      : y_(Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Index>(y.size()))),
        fs_(fs), theta_(theta), delta_(delta), p_(p), d_(d), basis_(basis) {
    const auto n = static_cast<Index>(y.size());
    if (!options.override_cap && y.size() > options.size_cap) {
      detail::fail(ErrorCode::oracle_misuse,
                   "dense oracle refuses n=" + std::to_string(y.size()) +
                       " above cap " + std::to_string(options.size_cap));
    }
    detail::require(n >= 1 && fs > 0.0 && theta > 0.0 && delta > 0.0 && p >= 1 && d >= 1,
                    "invalid dense oracle input");

    k_delta_.resize(n, n);
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < n; ++j) {
        k_delta_(i, j) = grid_kernel(i - j, theta, p, d) + (i == j ? delta * delta : 0.0);
      }
    }
    const auto q = static_cast<Index>(basis.size());
    f_.resize(n, q);
    for (Index i = 0; i < n; ++i) {
      for (Index c = 0; c < q; ++c) f_(i, c) = 0.0;
      if (q > 0) f_.row(i) = basis.evaluate(static_cast<double>(i + 1) / fs).transpose();
    }

    llt_.compute(k_delta_);
    if (llt_.info() != Eigen::Success) {
      detail::fail(ErrorCode::not_positive_definite, "dense K_delta is not positive definite");
    }
    const Eigen::MatrixXd ki_f = llt_.solve(f_);
    const Eigen::VectorXd ki_y = llt_.solve(y_);
    ftkf_ = f_.transpose() * ki_f;
    if (q > 0) {
      Eigen::LLT<Eigen::MatrixXd> small(ftkf_);
      if (small.info() != Eigen::Success) {
        detail::fail(ErrorCode::rank_deficient_basis, "F^T K^{-1} F is singular");
      }
      beta_ = small.solve(f_.transpose() * ki_y);
    } else {
      beta_.resize(0);
    }
    resid_ = y_ - f_ * beta_;
    ki_resid_ = llt_.solve(resid_);
    sigma2_ = resid_.dot(ki_resid_) / static_cast<double>(n);

    const Eigen::MatrixXd lower = llt_.matrixL();
    logdet_ = 2.0 * lower.diagonal().array().log().sum();
  }

  const Eigen::MatrixXd& k_delta() const noexcept { return k_delta_; }
  const Eigen::MatrixXd& design() const noexcept { return f_; }
  const Eigen::VectorXd& beta_hat() const noexcept { return beta_; }
  double sigma2_hat() const noexcept { return sigma2_; }
  double logdet() const noexcept { return logdet_; }
  Index size() const noexcept { return y_.size(); }

  double loglik() const {
    if (!(sigma2_ > 0.0)) return -std::numeric_limits<double>::infinity();
    const auto n = static_cast<double>(y_.size());
    constexpr double log_two_pi = 1.8378770664093454835606594728112;
    return -0.5 * (n * std::log(sigma2_) + logdet_ + n + n * log_two_pi);
  }

  Eigen::VectorXd solve(const Eigen::VectorXd& v) const { return llt_.solve(v); }

  /// BLUP at time t and the variance of a new observation y(t), including
  /// the nugget and the uncertainty of beta-hat.
  std::pair<double, double> blup(double t) const {
    const Index n = y_.size();
    const double period = static_cast<double>(p_) / (static_cast<double>(d_) * fs_);
    Eigen::VectorXd r(n);
    for (Index i = 0; i < n; ++i) {
      r[i] = time_kernel(t, static_cast<double>(i + 1) / fs_, theta_, period);
    }
    const Eigen::VectorXd f = basis_.evaluate(t);
    const Eigen::VectorXd ki_r = llt_.solve(r);
    double y_hat = r.dot(ki_resid_);
    double var = 1.0 + delta_ * delta_ - r.dot(ki_r);
    if (f.size() > 0) {
      y_hat += f.dot(beta_);
      const Eigen::VectorXd omega = f - f_.transpose() * ki_r;
      var += omega.dot(ftkf_.llt().solve(omega));
    }
    return {y_hat, sigma2_ * var};
  }

 private:
  Eigen::VectorXd y_;
  double fs_;
  double theta_;
  double delta_;
  std::size_t p_;
  std::size_t d_;
  RegressionBasis basis_;
  Eigen::MatrixXd k_delta_;
  Eigen::MatrixXd f_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::MatrixXd ftkf_;
  Eigen::VectorXd beta_;
  Eigen::VectorXd resid_;
  Eigen::VectorXd ki_resid_;
  double sigma2_ = 0.0;
  double logdet_ = 0.0;
};

struct DenseLoglik {
  double loglik;
  Eigen::VectorXd beta_hat;
  double sigma2_hat;
};

inline DenseLoglik dense_loglik(std::span<const double> y, double fs, double theta,
                                double delta, std::size_t p, std::size_t d,
                                const RegressionBasis& basis, DenseOptions options = {}) {
  const DenseModel model(y, fs, theta, delta, p, d, basis, options);
  return {model.loglik(), model.beta_hat(), model.sigma2_hat()};
}

inline DenseLoglik dense_loglik(const Signal& signal, double theta, double delta,
                                std::size_t p, std::size_t d,
                                const RegressionBasis& basis, DenseOptions options = {}) {
  return dense_loglik(std::span<const double>(signal.values()), signal.fs(), theta,
                      delta, p, d, basis, options);
}

inline std::pair<double, double> dense_blup(double t, const DenseModel& model) {
  return model.blup(t);
}

struct DecompositionReport {
  bool passed = true;
  double max_abs_error = 0.0;
  long long bad_row = -1;
  long long bad_col = -1;
  std::string message;
};

/// Checks that the structured blocks reproduce the dense grid correlation
/// matrix entry for entry, that R is symmetric circulant and R_star Toeplitz.
inline DecompositionReport dense_decomposition_check(const PeriodSpec& spec,
                                                     const Hyperparams& hyper,
                                                     const KernelBlocks& blocks,
                                                     double tol = 1e-14) {
  DecompositionReport report;
  const auto n = static_cast<long long>(spec.n());
  const auto p = static_cast<long long>(spec.p());
  const auto k = static_cast<long long>(spec.segments());
  const auto m = static_cast<long long>(spec.remainder());
  const long long kp = k * p;

  auto note = [&](long long i, long long j, double err, const char* what) {
    report.max_abs_error = std::max(report.max_abs_error, err);
    if (err > tol && report.passed) {
      report.passed = false;
      report.bad_row = i;
      report.bad_col = j;
      report.message = std::string(what) + " mismatch at (" + std::to_string(i) + ", " +
                       std::to_string(j) + ")";
    }
  };

  if (blocks.circ_row.size() != p || blocks.star_row.size() != m ||
      blocks.bullet_cols.rows() != p || blocks.bullet_cols.cols() != m) {
    report.passed = false;
    report.message = "block dimensions do not match the period spec";
    return report;
  }

  const auto r_entry = [&](long long a, long long b) {
    return blocks.circ_row[static_cast<Index>(((b - a) % p + p) % p)];
  };

  for (long long i = 0; i < n; ++i) {
    for (long long j = 0; j < n; ++j) {
      const double truth = grid_kernel(i - j, hyper.theta, spec.p(), spec.d());
      double structured;
      const char* what;
      if (i < kp && j < kp) {
        structured = r_entry(i % p, j % p);
        what = "R";
      } else if (i < kp) {
        structured = blocks.bullet_cols(static_cast<Index>(i % p), static_cast<Index>(j - kp));
        what = "R_bullet";
      } else if (j < kp) {
        structured = blocks.bullet_cols(static_cast<Index>(j % p), static_cast<Index>(i - kp));
        what = "R_bullet^T";
      } else {
        structured = blocks.star_row[static_cast<Index>(std::abs(i - j))];
        what = "R_star";
      }
      note(i, j, std::abs(structured - truth), what);
    }
  }

  for (long long j = 0; j < p; ++j) {
    note(0, j, std::abs(blocks.circ_row[static_cast<Index>(j)] -
                        blocks.circ_row[static_cast<Index>((p - j) % p)]),
         "circulant symmetry");
  }
  // R_star must be the leading principal block of R, hence Toeplitz.
  for (long long i = 0; i < m; ++i) {
    for (long long j = 0; j < m; ++j) {
      note(i, j, std::abs(blocks.star_row[static_cast<Index>(std::abs(i - j))] - r_entry(i, j)),
           "R_star toeplitz");
    }
  }
  if (report.passed) report.message = "ok";
  return report;
}

}  // namespace cpgp::oracle
