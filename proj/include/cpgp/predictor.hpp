#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cpgp/basis.hpp"
#include "cpgp/error.hpp"
#include "cpgp/kernel.hpp"
#include "cpgp/likelihood.hpp"
#include "cpgp/structured_linalg.hpp"

namespace cpgp {

struct CrossCorrelations {
  Eigen::VectorXd gamma_bar;   ///< p, correlation with the first segment
  Eigen::VectorXd gamma_star;  ///< m, correlation with the remainder
  Eigen::VectorXd gamma_dot;   ///< m, gamma_star conditioned on the segments
};

struct Prediction {
  double y_hat;
  double variance;
};

/// Everything the BLUP needs, factorized once. Immutable after build().
class PredictorState {
 public:
  static PredictorState build(const Signal& signal, double theta, double delta,
                              std::size_t p, std::size_t d,
                              const RegressionBasis& basis) {
    PredictorState s;
    // sigma2_hat may be zero for degenerate data; predictions then carry
    // zero variance.
    s.eval_ = profile_loglik(signal, theta, delta, p, d, basis);
    s.basis_ = basis;
    s.fs_ = signal.fs();
    s.theta_ = theta;
    s.delta_ = delta;
    s.p_ = p;
    s.d_ = d;
    s.period_ = static_cast<double>(p) / (static_cast<double>(d) * signal.fs());

    const PeriodSpec spec(p, d, signal.fs(), signal.size());
    const Hyperparams hyper{theta, delta};
    const SegmentedData seg = segment(signal, spec, basis);
    s.k_ = seg.k;
    s.m_ = seg.m;
    s.eta_ = seg.eta;
    const auto q = static_cast<Index>(basis.size());
    const Eigen::VectorXd& beta = s.eval_.beta_hat;
    const auto m = static_cast<Index>(seg.m);

    KernelBlocks blocks;
    blocks.circ_row.resize(static_cast<Index>(p));
    for (std::size_t j = 0; j < p; ++j) {
      blocks.circ_row[static_cast<Index>(j)] =
          periodic_correlation(static_cast<long long>(j), theta, p, d);
    }
    if (seg.k == 0) blocks.star_row = blocks.circ_row.head(m);

    s.system_ = Eigen::MatrixXd::Zero(q, q);
    if (seg.k >= 1) {
      const Eigen::VectorXd mu = circulant_eigenvalues(blocks.circ_row);
      s.rdelta_.emplace(make_rdelta(mu, seg.k, delta));
      const Eigen::VectorXd& lambda = s.rdelta_->eigenvalues();
      s.shrink_ = (1.0 - lambda.array().inverse()).matrix();
      s.cond_ = mu.cwiseQuotient(lambda);
      s.basis_mean_ = seg.basis_mean;
      Eigen::VectorXd resid_mean = seg.segment_mean;
      if (q > 0) resid_mean -= seg.basis_mean * beta;
      s.w_segments_ = s.rdelta_->solve(resid_mean);
      s.system_ = sufficient_stats(seg, hyper, *s.rdelta_).s_gg;
    }

    if (seg.m >= 1) {
      const RemainderTerms rem =
          remainder_terms(seg, blocks, hyper, s.rdelta_ ? &*s.rdelta_ : nullptr);
      s.pi_chol_.emplace(rem.pi());
      s.g_dot_ = rem.g_dot;
      Eigen::VectorXd resid_dot = rem.y_dot;
      if (q > 0) resid_dot -= rem.g_dot * beta;
      s.w_remainder_ = s.pi_chol_->solve(resid_dot);
      s.pi_inv_g_dot_ = s.pi_chol_->solve(rem.g_dot);
      if (q > 0) s.system_ += rem.g_dot.transpose() * s.pi_inv_g_dot_;
      if (seg.k >= 1) {
        // (k/delta^2) R_delta^{-1} R_bullet w2, so that the remainder term of
        // the BLUP costs O(p) per query point.
        Eigen::VectorXd padded = Eigen::VectorXd::Zero(static_cast<Index>(p));
        padded.head(m) = s.w_remainder_;
        s.u_remainder_ = detail::apply_spectrum(s.shrink_, padded);
      }
    }
    if (q > 0) {
      s.system_llt_.compute(s.system_);
      if (s.system_llt_.info() != Eigen::Success) {
        detail::fail(ErrorCode::rank_deficient_basis, "predictor regression system is singular");
      }
    }
    return s;
  }

  const LikelihoodEval& eval() const noexcept { return eval_; }
  const Eigen::VectorXd& beta_hat() const noexcept { return eval_.beta_hat; }
  double sigma2_hat() const noexcept { return eval_.sigma2_hat; }
  double period() const noexcept { return period_; }
  double fs() const noexcept { return fs_; }
  std::size_t segments() const noexcept { return k_; }
  std::size_t remainder() const noexcept { return m_; }
  int eta() const noexcept { return eta_; }
  const RegressionBasis& basis() const noexcept { return basis_; }

  /// Training time of the zero-based sample index i.
  double time(std::size_t i) const noexcept {
    return static_cast<double>(i + 1) / fs_;
  }

  CrossCorrelations cross_correlations(double t) const {
    detail::require(std::isfinite(t), "prediction time must be finite");
    CrossCorrelations cc;
    const auto p = static_cast<Index>(p_);
    const auto m = static_cast<Index>(m_);
    if (k_ >= 1) {
      cc.gamma_bar.resize(p);
      for (Index i = 0; i < p; ++i) {
        cc.gamma_bar[i] = periodic_correlation_time(t - time(static_cast<std::size_t>(i)), theta_, period_);
      }
    }
    cc.gamma_star.resize(m);
    for (Index j = 0; j < m; ++j) {
      cc.gamma_star[j] = periodic_correlation_time(
          t - time(k_ * p_ + static_cast<std::size_t>(j)), theta_, period_);
    }
    cc.gamma_dot = cc.gamma_star;
    if (k_ >= 1 && m > 0) {
      cc.gamma_dot -= detail::apply_spectrum(shrink_, cc.gamma_bar).head(m);
    }
    return cc;
  }

  Prediction predict(double t) const {
    const CrossCorrelations cc = cross_correlations(t);
    const Eigen::VectorXd f = basis_.evaluate(t);
    const double kd2 = static_cast<double>(k_) / (delta_ * delta_);
    const auto q = f.size();

    double y_hat = q > 0 ? f.dot(eval_.beta_hat) : 0.0;
    double prior = 1.0 + delta_ * delta_;
    Eigen::VectorXd omega = f;

    if (k_ >= 1) {
      y_hat += kd2 * cc.gamma_bar.dot(w_segments_);
      const Eigen::VectorXd g = rdelta_->solve(cc.gamma_bar);
      prior -= kd2 * cc.gamma_bar.dot(g);
      if (q > 0) omega -= kd2 * basis_mean_.transpose() * g;
    }
    if (m_ >= 1) {
      y_hat += cc.gamma_star.dot(w_remainder_);
      if (k_ >= 1) y_hat -= cc.gamma_bar.dot(u_remainder_);
      const Eigen::VectorXd pi_inv_gdot = pi_chol_->solve(cc.gamma_dot);
      prior -= cc.gamma_dot.dot(pi_inv_gdot);
      if (q > 0) omega -= g_dot_.transpose() * pi_inv_gdot;
    }
    if (q > 0) prior += omega.dot(system_llt_.solve(omega));

    double variance = eval_.sigma2_hat * prior;
    if (variance < 0.0) {
      if (variance >= -1e-10 * eval_.sigma2_hat) {
        variance = 0.0;
      } else {
        detail::fail(ErrorCode::numerical_failure,
                     "negative prediction variance " + std::to_string(variance));
      }
    }
    return {y_hat, variance};
  }

 private:
  PredictorState() = default;

  LikelihoodEval eval_;
  RegressionBasis basis_;
  double fs_ = 1.0;
  double theta_ = 1.0;
  double delta_ = 1.0;
  std::size_t p_ = 1;
  std::size_t d_ = 1;
  double period_ = 1.0;
  std::size_t k_ = 0;
  std::size_t m_ = 0;
  int eta_ = 0;

  std::optional<SymmetricCirculant> rdelta_;
  Eigen::VectorXd shrink_;
  Eigen::VectorXd cond_;
  Eigen::MatrixXd basis_mean_;
  Eigen::VectorXd w_segments_;
  Eigen::VectorXd u_remainder_;

  std::optional<ToeplitzCholesky> pi_chol_;
  Eigen::MatrixXd g_dot_;
  Eigen::VectorXd w_remainder_;
  Eigen::MatrixXd pi_inv_g_dot_;

  Eigen::MatrixXd system_;
  Eigen::LLT<Eigen::MatrixXd> system_llt_;
};

inline Prediction predict(double t, const PredictorState& state) {
  return state.predict(t);
}

/// Batch prediction over a time grid sharing the state's factorizations.
inline std::vector<Prediction> denoise(const PredictorState& state,
                                       std::span<const double> grid) {
  std::vector<Prediction> out;
  out.reserve(grid.size());
  for (double t : grid) out.push_back(state.predict(t));
  return out;
}

/// The training grid t_i = i / fs, i = 1..n.
inline std::vector<double> training_grid(const Signal& signal) {
  std::vector<double> grid(signal.size());
  for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = signal.time(i);
  return grid;
}

}  // namespace cpgp
