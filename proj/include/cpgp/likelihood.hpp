#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "cpgp/basis.hpp"
#include "cpgp/detail/summation.hpp"
#include "cpgp/error.hpp"
#include "cpgp/kernel.hpp"
#include "cpgp/structured_linalg.hpp"

namespace cpgp {

/// Aggregates of one segmentation of the signal into k segments of length p
/// and an m-sample remainder. Raw segments are never stored.
struct SegmentedData {
  std::size_t n = 0;
  std::size_t p = 0;
  std::size_t k = 0;
  std::size_t m = 0;
  int eta = 0;

  Eigen::VectorXd segment_mean;  ///< p, average of the k segments
  Eigen::VectorXd remainder;     ///< m, trailing samples
  double sum_yy = 0.0;           ///< Y^T Y over the kp segmented samples
  double scatter_yy = 0.0;       ///< Y^T Y - k ybar^T ybar

  Eigen::MatrixXd basis_mean;       ///< p x q, Gamma-bar
  Eigen::MatrixXd basis_remainder;  ///< m x q, Gamma-star
  Eigen::MatrixXd sum_gg;           ///< q x q, Gamma^T Gamma
  Eigen::VectorXd sum_gy;           ///< q, Gamma^T Y
  Eigen::MatrixXd scatter_gg;       ///< Gamma^T Gamma - k Gamma-bar^T Gamma-bar
  Eigen::VectorXd scatter_gy;       ///< Gamma^T Y - k Gamma-bar^T ybar
};

struct SufficientStats {
  Eigen::MatrixXd s_gg;
  Eigen::VectorXd s_gy;
  double s_yy = 0.0;
};

/// Conditional quantities of the remainder given the segments.
struct RemainderTerms {
  Eigen::VectorXd y_dot;          ///< m
  Eigen::MatrixXd g_dot;          ///< m x q
  Eigen::VectorXd pi_first_col;   ///< m, first column of Pi
  double pi_logdet = 0.0;
  Eigen::VectorXd y_dot_white;    ///< L^{-1} y_dot with Pi = L L^T
  Eigen::MatrixXd g_dot_white;    ///< L^{-1} g_dot

  SymmetricToeplitz pi() const { return SymmetricToeplitz(pi_first_col); }
};

struct LikelihoodEval {
  double loglik = 0.0;
  double l1 = 0.0;
  double l2 = 0.0;
  Eigen::VectorXd beta_hat;
  double sigma2_hat = 0.0;
  double logdet_rdelta = 0.0;
  double logdet_pi = 0.0;
  std::size_t n = 0;
  std::size_t p = 0;
  std::size_t d = 0;
  std::size_t k = 0;
  std::size_t m = 0;
  int eta = 0;
  double theta = 0.0;
  double delta = 0.0;
};

struct BetaSigma {
  Eigen::VectorXd beta_hat;
  double sigma2_hat;
};

inline SegmentedData segment(const Signal& signal, const PeriodSpec& spec,
                             const RegressionBasis& basis) {
  const std::size_t n = signal.size();
  detail::require(spec.n() == n, "period spec length does not match signal");
  const std::size_t p = spec.p();
  const std::size_t k = spec.segments();
  const std::size_t m = spec.remainder();
  const auto q = static_cast<Index>(basis.size());
  const auto& y = signal.values();

  SegmentedData seg;
  seg.n = n;
  seg.p = p;
  seg.k = k;
  seg.m = m;
  seg.eta = spec.eta();

  seg.remainder.resize(static_cast<Index>(m));
  seg.basis_remainder.resize(static_cast<Index>(m), q);
  for (std::size_t j = 0; j < m; ++j) {
    const std::size_t i = k * p + j;
    seg.remainder[static_cast<Index>(j)] = y[i];
    for (Index c = 0; c < q; ++c) seg.basis_remainder(static_cast<Index>(j), c) = 0.0;
    if (q > 0) {
      Eigen::VectorXd f = basis.evaluate(signal.time(i));
      seg.basis_remainder.row(static_cast<Index>(j)) = f.transpose();
    }
  }

  seg.sum_gg = Eigen::MatrixXd::Zero(q, q);
  seg.sum_gy = Eigen::VectorXd::Zero(q);
  seg.scatter_gg = Eigen::MatrixXd::Zero(q, q);
  seg.scatter_gy = Eigen::VectorXd::Zero(q);
  if (k == 0) {
    seg.segment_mean.resize(0);
    seg.basis_mean.resize(0, q);
    return seg;
  }

  const auto kd = static_cast<double>(k);
  const auto pi = static_cast<Index>(p);

  // One pass over the samples, shifted by the first segment so that the
  // scatter Q_j - D_j^2 / k does not cancel catastrophically. Per-position
  // accumulators keep the inner loop free of a serial dependency.
  const double* first = y.data();
  std::vector<double> dsum(p, 0.0);
  std::vector<double> dsq(p, 0.0);
  for (std::size_t r = 1; r < k; ++r) {
    const double* seg_r = y.data() + r * p;
    double* ds = dsum.data();
    double* dq = dsq.data();
    for (std::size_t j = 0; j < p; ++j) {
      const double e = seg_r[j] - first[j];
      ds[j] += e;
      dq[j] += e * e;
    }
  }
  seg.segment_mean.resize(pi);
  detail::CompensatedSum yy;
  detail::CompensatedSum scatter;
  for (std::size_t j = 0; j < p; ++j) {
    const double mean_shift = dsum[j] / kd;
    seg.segment_mean[static_cast<Index>(j)] = first[j] + mean_shift;
    scatter.add(std::max(0.0, dsq[j] - dsum[j] * mean_shift));
    yy.add(kd * first[j] * first[j] + 2.0 * first[j] * dsum[j] + dsq[j]);
  }
  seg.sum_yy = yy.value();
  seg.scatter_yy = scatter.value();

  seg.basis_mean = Eigen::MatrixXd::Zero(pi, q);
  if (q == 0) return seg;

  if (basis.segment_invariant()) {
    for (std::size_t j = 0; j < p; ++j) {
      seg.basis_mean.row(static_cast<Index>(j)) =
          basis.evaluate(signal.time(j)).transpose();
    }
    seg.sum_gg = kd * seg.basis_mean.transpose() * seg.basis_mean;
    seg.sum_gy = kd * seg.basis_mean.transpose() * seg.segment_mean;
    return seg;
  }

  Eigen::VectorXd f(q);
  for (std::size_t r = 0; r < k; ++r) {
    for (std::size_t j = 0; j < p; ++j) {
      const std::size_t i = r * p + j;
      basis.evaluate_into(signal.time(i), f.data());
      seg.basis_mean.row(static_cast<Index>(j)) += f.transpose();
      seg.sum_gg.noalias() += f * f.transpose();
      seg.sum_gy.noalias() += f * y[i];
    }
  }
  seg.basis_mean /= kd;
  for (std::size_t r = 0; r < k; ++r) {
    for (std::size_t j = 0; j < p; ++j) {
      const std::size_t i = r * p + j;
      basis.evaluate_into(signal.time(i), f.data());
      const Eigen::VectorXd fd = f - seg.basis_mean.row(static_cast<Index>(j)).transpose();
      seg.scatter_gg.noalias() += fd * fd.transpose();
      seg.scatter_gy.noalias() +=
          fd * (y[i] - seg.segment_mean[static_cast<Index>(j)]);
    }
  }
  return seg;
}

/// R_delta = I_p + (k / delta^2) R from the spectrum of R. Eigenvalues within
/// 1e-8 below one are roundoff and clamped to one; anything lower means R
/// was not positive semidefinite.
inline SymmetricCirculant make_rdelta(const Eigen::VectorXd& r_eigenvalues,
                                      std::size_t k, double delta) {
  const double scale = static_cast<double>(k) / (delta * delta);
  Eigen::VectorXd lambda = (1.0 + scale * r_eigenvalues.array()).matrix();
  for (Index j = 0; j < lambda.size(); ++j) {
    if (lambda[j] < 1.0) {
      if (lambda[j] >= 1.0 - 1e-8) {
        lambda[j] = 1.0;
      } else {
        detail::fail(ErrorCode::singular_matrix,
                     "R_delta eigenvalue " + std::to_string(lambda[j]) +
                         " below 1: correlation row is not PSD");
      }
    }
  }
  return SymmetricCirculant::from_eigenvalues(std::move(lambda));
}

inline SufficientStats sufficient_stats(const SegmentedData& seg,
                                        const Hyperparams& hyper,
                                        const SymmetricCirculant& rdelta) {
  detail::require(seg.k >= 1, "sufficient statistics need at least one segment");
  hyper.validate();
  const double kd = static_cast<double>(seg.k);
  const double d2 = hyper.delta * hyper.delta;

  const Eigen::VectorXd a = rdelta.solve(seg.segment_mean);
  SufficientStats s;
  s.s_yy = (seg.scatter_yy + kd * seg.segment_mean.dot(a)) / d2;
  const Index q = seg.basis_mean.cols();
  if (q == 0) {
    s.s_gg.resize(0, 0);
    s.s_gy.resize(0);
    return s;
  }
  const Eigen::MatrixXd a_g = rdelta.solve(seg.basis_mean);
  s.s_gy = (seg.scatter_gy + kd * seg.basis_mean.transpose() * a) / d2;
  s.s_gg = (seg.scatter_gg + kd * seg.basis_mean.transpose() * a_g) / d2;
  s.s_gg = 0.5 * (s.s_gg + s.s_gg.transpose()).eval();
  return s;
}

/// y-dot, Gamma-dot and the Toeplitz matrix Pi for the remainder block.
/// Only blocks.circ_row (k >= 1) or blocks.star_row (k == 0) are read.
/// With mu the spectrum of R and lambda that of R_delta,
///   R_star - (k/delta^2) R_bullet^T R_delta^{-1} R_bullet
/// is the leading m x m block of the circulant with spectrum mu / lambda,
/// which keeps Pi = delta^2 I + (that block) positive definite.
inline RemainderTerms remainder_terms(const SegmentedData& seg,
                                      const KernelBlocks& blocks,
                                      const Hyperparams& hyper,
                                      const SymmetricCirculant* rdelta) {
  detail::require(seg.m >= 1, "remainder terms need a non-empty remainder");
  hyper.validate();
  const auto m = static_cast<Index>(seg.m);
  const double d2 = hyper.delta * hyper.delta;

  RemainderTerms rem;
  if (seg.k == 0) {
    rem.y_dot = seg.remainder;
    rem.g_dot = seg.basis_remainder;
    rem.pi_first_col = blocks.star_row.head(m);
  } else {
    detail::require(rdelta != nullptr, "R_delta required when k >= 1");
    const Eigen::VectorXd mu = circulant_eigenvalues(blocks.circ_row);
    const Eigen::VectorXd& lambda = rdelta->eigenvalues();
    // (k/delta^2) mu / lambda == 1 - 1/lambda
    const Eigen::VectorXd shrink = (1.0 - lambda.array().inverse()).matrix();
    const Eigen::VectorXd cond = mu.cwiseQuotient(lambda);

    rem.y_dot = seg.remainder - detail::apply_spectrum(shrink, seg.segment_mean).head(m);
    const Index q = seg.basis_mean.cols();
    rem.g_dot.resize(m, q);
    for (Index c = 0; c < q; ++c) {
      rem.g_dot.col(c) =
          seg.basis_remainder.col(c) -
          detail::apply_spectrum(shrink, Eigen::VectorXd(seg.basis_mean.col(c))).head(m);
    }
    Eigen::VectorXd e0 = Eigen::VectorXd::Zero(blocks.circ_row.size());
    e0[0] = 1.0;
    rem.pi_first_col = detail::apply_spectrum(cond, e0).head(m);
  }
  rem.pi_first_col[0] += d2;

  const Index q = rem.g_dot.cols();
  Eigen::MatrixXd rhs(m, 1 + q);
  rhs.col(0) = rem.y_dot;
  rhs.rightCols(q) = rem.g_dot;
  ToeplitzWhitening white;
  try {
    white = toeplitz_whiten(SymmetricToeplitz(rem.pi_first_col), std::move(rhs));
  } catch (const Error& e) {
    detail::fail(e.code(), std::string(e.what()) + " [theta=" +
                               std::to_string(hyper.theta) + ", delta=" +
                               std::to_string(hyper.delta) + ", p=" +
                               std::to_string(seg.p) + "]");
  }
  rem.pi_logdet = white.logdet;
  rem.y_dot_white = white.whitened.col(0);
  rem.g_dot_white = white.whitened.rightCols(q);
  return rem;
}

/// Sigma^{-1} v for the kp x kp segment covariance (unit variance) via
///   Sigma^{-1} = (k I - V (I - R_delta^{-1}) V^T) / (delta^2 k),  V = [I_p ... I_p]^T.
/// v is the stacked segments (length kp).
inline Eigen::VectorXd segment_precision_apply(const SymmetricCirculant& rdelta,
                                               std::size_t k, double delta,
                                               const Eigen::VectorXd& v) {
  const Index p = rdelta.size();
  detail::require(v.size() == p * static_cast<Index>(k), "vector length must be k * p");
  Eigen::VectorXd folded = Eigen::VectorXd::Zero(p);
  for (Index r = 0; r < static_cast<Index>(k); ++r) folded += v.segment(r * p, p);
  const Eigen::VectorXd correction = folded - rdelta.solve(folded);
  const double kd = static_cast<double>(k);
  Eigen::VectorXd out(v.size());
  for (Index r = 0; r < static_cast<Index>(k); ++r) {
    out.segment(r * p, p) = (kd * v.segment(r * p, p) - correction) / (delta * delta * kd);
  }
  return out;
}

namespace detail {

inline Eigen::VectorXd solve_spd_system(const Eigen::MatrixXd& a,
                                        const Eigen::VectorXd& b) {
  if (a.rows() == 0) return Eigen::VectorXd(0);
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() != Eigen::Success || !(llt.rcond() > 1e-14)) {
    fail(ErrorCode::rank_deficient_basis,
         "regression system is singular; basis is rank deficient");
  }
  return llt.solve(b);
}

}  // namespace detail

/// Closed-form GLS estimates. sigma2 is computed from the algebraic form
/// (S_YY + eta y.^T Pi^{-1} y.) - beta^T (S_GY + eta G.^T Pi^{-1} y.).
inline BetaSigma estimate_beta_sigma(const SufficientStats& stats,
                                     const RemainderTerms* rem, std::size_t n) {
  Eigen::MatrixXd system = stats.s_gg;
  Eigen::VectorXd rhs = stats.s_gy;
  double total = stats.s_yy;
  if (rem != nullptr) {
    system += rem->g_dot_white.transpose() * rem->g_dot_white;
    rhs += rem->g_dot_white.transpose() * rem->y_dot_white;
    total += rem->y_dot_white.squaredNorm();
  }
  BetaSigma out;
  out.beta_hat = detail::solve_spd_system(system, rhs);
  out.sigma2_hat = std::max(0.0, (total - out.beta_hat.dot(rhs)) / static_cast<double>(n));
  return out;
}

namespace detail {

inline constexpr double log_two_pi = 1.8378770664093454835606594728112;

// Quadratic form of the segment residual (Upsilon - Gamma beta)^T Sigma^{-1} (.)
// evaluated from the residual itself rather than by expanding the statistics.
inline double segment_quadratic(const SegmentedData& seg,
                                const SymmetricCirculant& rdelta,
                                const Eigen::VectorXd& beta, double delta) {
  const double kd = static_cast<double>(seg.k);
  double scatter = seg.scatter_yy;
  Eigen::VectorXd resid_mean = seg.segment_mean;
  if (beta.size() > 0) {
    scatter += -2.0 * beta.dot(seg.scatter_gy) + beta.dot(seg.scatter_gg * beta);
    resid_mean -= seg.basis_mean * beta;
  }
  const Eigen::VectorXd w = rdelta.solve(resid_mean);
  return (std::max(scatter, 0.0) + kd * resid_mean.dot(w)) / (delta * delta);
}

// Degenerate fits (sigma2 vanishing relative to the data's own quadratic
// form) are reported as sigma2 = 0 and loglik = -inf.
inline bool degenerate(double quad, double total) {
  return !(quad > 1e-20 * total) || !(quad > 0.0);
}

inline void check_finite(double v, double theta, double delta, std::size_t p) {
  if (std::isnan(v) || v == std::numeric_limits<double>::infinity()) {
    fail(ErrorCode::numerical_failure,
         "non-finite log-likelihood [theta=" + std::to_string(theta) +
             ", delta=" + std::to_string(delta) + ", p=" + std::to_string(p) + "]");
  }
}

inline void validate_eval_inputs(double theta, double delta, std::size_t p,
                                 std::size_t d) {
  Hyperparams{theta, delta}.validate();
  require(p >= 1, "segment length p must be >= 1");
  require(d >= 1, "decimation d must be >= 1");
}

}  // namespace detail

/// Exact profile log-likelihood
///   -(1/2)[n log s2 + 2kp log delta + log|R_delta| + eta log|Pi| + n + n log 2pi]
/// with the full Gaussian constant included. Cost: one O(n) aggregation,
/// O(p log p) circulant work and O(m^2) Toeplitz work.
inline LikelihoodEval profile_loglik(const Signal& signal, double theta,
                                     double delta, std::size_t p, std::size_t d,
                                     const RegressionBasis& basis) {
  detail::validate_eval_inputs(theta, delta, p, d);
  const Hyperparams hyper{theta, delta};
  const PeriodSpec spec(p, d, signal.fs(), signal.size());
  const SegmentedData seg = segment(signal, spec, basis);
  const std::size_t n = seg.n;
  const std::size_t k = seg.k;
  const std::size_t kp = k * p;
  const std::size_t m = seg.m;

  LikelihoodEval ev;
  ev.n = n;
  ev.p = p;
  ev.d = d;
  ev.k = k;
  ev.m = m;
  ev.eta = seg.eta;
  ev.theta = theta;
  ev.delta = delta;

  KernelBlocks blocks;
  blocks.circ_row.resize(static_cast<Index>(p));
  for (std::size_t j = 0; j < p; ++j) {
    blocks.circ_row[static_cast<Index>(j)] =
        periodic_correlation(static_cast<long long>(j), theta, p, d);
  }
  if (k == 0) blocks.star_row = blocks.circ_row.head(static_cast<Index>(m));

  std::optional<SymmetricCirculant> rdelta;
  SufficientStats stats;
  const auto q = static_cast<Index>(basis.size());
  stats.s_gg = Eigen::MatrixXd::Zero(q, q);
  stats.s_gy = Eigen::VectorXd::Zero(q);
  if (k >= 1) {
    rdelta.emplace(make_rdelta(circulant_eigenvalues(blocks.circ_row), k, delta));
    stats = sufficient_stats(seg, hyper, *rdelta);
    ev.logdet_rdelta = rdelta->logdet();
  }

  std::optional<RemainderTerms> rem;
  if (m >= 1) {
    rem.emplace(remainder_terms(seg, blocks, hyper, rdelta ? &*rdelta : nullptr));
    ev.logdet_pi = rem->pi_logdet;
  }

  const BetaSigma est = estimate_beta_sigma(stats, rem ? &*rem : nullptr, n);
  ev.beta_hat = est.beta_hat;

  const double quad1 = k >= 1 ? detail::segment_quadratic(seg, *rdelta, est.beta_hat, delta) : 0.0;
  double quad2 = 0.0;
  double total = stats.s_yy;
  if (rem) {
    Eigen::VectorXd r = rem->y_dot_white;
    if (q > 0) r -= rem->g_dot_white * est.beta_hat;
    quad2 = r.squaredNorm();
    total += rem->y_dot_white.squaredNorm();
  }
  const double quad = quad1 + quad2;
  const double ninf = -std::numeric_limits<double>::infinity();
  if (detail::degenerate(quad, total)) {
    ev.sigma2_hat = 0.0;
    ev.l1 = k >= 1 ? ninf : 0.0;
    ev.l2 = m >= 1 ? ninf : 0.0;
    ev.loglik = ninf;
    return ev;
  }

  const double s2 = quad / static_cast<double>(n);
  ev.sigma2_hat = s2;
  const double log_s2 = std::log(s2);
  const double log_delta = std::log(delta);
  if (k >= 1) {
    const auto kpd = static_cast<double>(kp);
    ev.l1 = -0.5 * (kpd * log_s2 + 2.0 * kpd * log_delta + ev.logdet_rdelta +
                    quad1 / s2 + kpd * detail::log_two_pi);
  }
  if (m >= 1) {
    const auto md = static_cast<double>(m);
    ev.l2 = -0.5 * (md * log_s2 + ev.logdet_pi + quad2 / s2 + md * detail::log_two_pi);
  }
  ev.loglik = ev.l1 + static_cast<double>(ev.eta) * ev.l2;
  detail::check_finite(ev.loglik, theta, delta, p);
  return ev;
}

/// Approximate variant keeping only the normalized segment likelihood:
///   -(1/(2kp)) [kp log s2 + 2kp log delta + log|R_delta| + kp + kp log 2pi]
/// with s2 = (S_YY - beta^T S_GG beta) / n (divided by n, not kp).
/// The l1 field holds the segment log-likelihood profiled with the kp
/// divisor, i.e. the exact joint log-likelihood of the kp segmented samples.
inline LikelihoodEval acpgp_loglik(const Signal& signal, double theta,
                                   double delta, std::size_t p, std::size_t d,
                                   const RegressionBasis& basis) {
  detail::validate_eval_inputs(theta, delta, p, d);
  const Hyperparams hyper{theta, delta};
  const PeriodSpec spec(p, d, signal.fs(), signal.size());
  detail::require(spec.segments() >= 1, "ACPGP needs p <= n (at least one segment)");
  const SegmentedData seg = segment(signal, spec, basis);
  const std::size_t kp = seg.k * p;

  LikelihoodEval ev;
  ev.n = seg.n;
  ev.p = p;
  ev.d = d;
  ev.k = seg.k;
  ev.m = seg.m;
  ev.eta = seg.eta;
  ev.theta = theta;
  ev.delta = delta;

  Eigen::VectorXd row(static_cast<Index>(p));
  for (std::size_t j = 0; j < p; ++j) {
    row[static_cast<Index>(j)] = periodic_correlation(static_cast<long long>(j), theta, p, d);
  }
  const SymmetricCirculant rdelta = make_rdelta(circulant_eigenvalues(row), seg.k, delta);
  const SufficientStats stats = sufficient_stats(seg, hyper, rdelta);
  ev.logdet_rdelta = rdelta.logdet();
  ev.beta_hat = detail::solve_spd_system(stats.s_gg, stats.s_gy);

  const double quad = detail::segment_quadratic(seg, rdelta, ev.beta_hat, delta);
  const double ninf = -std::numeric_limits<double>::infinity();
  if (detail::degenerate(quad, stats.s_yy)) {
    ev.sigma2_hat = 0.0;
    ev.l1 = ninf;
    ev.loglik = ninf;
    return ev;
  }
  const auto kpd = static_cast<double>(kp);
  ev.sigma2_hat = quad / static_cast<double>(seg.n);
  const double log_delta = std::log(delta);
  ev.loglik = -(kpd * std::log(ev.sigma2_hat) + 2.0 * kpd * log_delta +
                ev.logdet_rdelta + kpd + kpd * detail::log_two_pi) /
              (2.0 * kpd);
  ev.l1 = -0.5 * (kpd * std::log(quad / kpd) + 2.0 * kpd * log_delta +
                  ev.logdet_rdelta + kpd + kpd * detail::log_two_pi);
  ev.l2 = 0.0;
  detail::check_finite(ev.loglik, theta, delta, p);
  return ev;
}

}  // namespace cpgp
