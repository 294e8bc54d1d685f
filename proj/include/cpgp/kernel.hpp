#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <numbers>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "cpgp/error.hpp"

namespace cpgp {

/// Observations on the regular grid t_i = i / fs, i = 1..n. Timestamps are
/// implicit; only integer lags ever reach the grid kernel.
class Signal {
 public:
  Signal(std::vector<double> values, double fs)
      : values_(std::move(values)), fs_(fs) {
    detail::require(values_.size() >= 2, "signal needs at least 2 samples");
    detail::require(std::isfinite(fs_) && fs_ > 0.0,
                    "sampling frequency must be positive and finite");
    for (std::size_t i = 0; i < values_.size(); ++i) {
      if (!std::isfinite(values_[i])) {
        detail::fail(ErrorCode::invalid_argument,
                     "non-finite sample at index " + std::to_string(i));
      }
    }
  }

  const std::vector<double>& values() const noexcept { return values_; }
  double fs() const noexcept { return fs_; }
  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const noexcept { return values_[i]; }

  /// Time of the zero-based sample index i, i.e. t_{i+1}.
  double time(std::size_t i) const noexcept {
    return static_cast<double>(i + 1) / fs_;
  }

 private:
  std::vector<double> values_;
  double fs_;
};

/// Segment length p and decimation d for a signal of length n. The period
/// is T = p / (d fs); p and d need not be coprime.
class PeriodSpec {
 public:
  PeriodSpec(std::size_t p, std::size_t d, double fs, std::size_t n)
      : p_(p), d_(d), fs_(fs), n_(n) {
    detail::require(p_ >= 1, "segment length p must be >= 1");
    detail::require(d_ >= 1, "decimation d must be >= 1");
    detail::require(std::isfinite(fs_) && fs_ > 0.0,
                    "sampling frequency must be positive and finite");
    k_ = n_ / p_;
    m_ = n_ - k_ * p_;
  }

  std::size_t p() const noexcept { return p_; }
  std::size_t d() const noexcept { return d_; }
  double fs() const noexcept { return fs_; }
  std::size_t n() const noexcept { return n_; }
  std::size_t segments() const noexcept { return k_; }
  std::size_t remainder() const noexcept { return m_; }
  bool has_remainder() const noexcept { return m_ != 0; }
  int eta() const noexcept { return m_ == 0 ? 0 : 1; }

  double period() const noexcept {
    return static_cast<double>(p_) / (static_cast<double>(d_) * fs_);
  }

  /// (p, d) reduced to lowest terms, used when reporting the period.
  std::pair<std::size_t, std::size_t> reduced() const noexcept {
    const std::size_t g = std::gcd(p_, d_);
    return {p_ / g, d_ / g};
  }

 private:
  std::size_t p_;
  std::size_t d_;
  double fs_;
  std::size_t n_;
  std::size_t k_ = 0;
  std::size_t m_ = 0;
};

struct Hyperparams {
  double theta;  ///< roughness
  double delta;  ///< noise-to-signal standard deviation ratio

  void validate() const {
    detail::require(std::isfinite(theta) && theta > 0.0,
                    "theta must be positive and finite");
    detail::require(std::isfinite(delta) && delta > 0.0,
                    "delta must be positive and finite");
  }
};

/// Grid correlation exp(-theta^2 sin^2(pi d lag / p)). The phase d*lag is
/// reduced mod p in integer arithmetic, so the result is exactly periodic.
inline double periodic_correlation(long long lag, double theta, std::size_t p,
                                   std::size_t d) {
  detail::require(std::isfinite(theta), "theta must be finite");
  detail::require(p >= 1 && d >= 1, "p and d must be >= 1");
  const auto pp = static_cast<long long>(p);
  const long long phase =
      ((static_cast<long long>(d) % pp) * (lag % pp) % pp + pp) % pp;
  const double s = std::sin(std::numbers::pi * static_cast<double>(phase) /
                            static_cast<double>(p));
  return std::exp(-theta * theta * s * s);
}

/// Continuous-time form exp(-theta^2 sin^2(pi dt / period)) used off-grid.
inline double periodic_correlation_time(double dt, double theta,
                                        double period) {
  const double s = std::sin(std::numbers::pi * dt / period);
  return std::exp(-theta * theta * s * s);
}

/// Structured pieces of the grid correlation matrix: the circulant
/// within-segment block R (first row), the segment/remainder cross block
/// R_bullet (p x m) and the remainder Toeplitz block R_star (first row).
struct KernelBlocks {
  Eigen::VectorXd circ_row;
  Eigen::MatrixXd bullet_cols;
  Eigen::VectorXd star_row;
};

inline KernelBlocks build_kernel_blocks(const PeriodSpec& spec,
                                        const Hyperparams& hyper) {
  hyper.validate();
  const std::size_t p = spec.p();
  const std::size_t m = spec.remainder();

  KernelBlocks blocks;
  blocks.circ_row.resize(static_cast<Eigen::Index>(p));
  for (std::size_t j = 0; j < p; ++j) {
    blocks.circ_row[static_cast<Eigen::Index>(j)] = periodic_correlation(
        static_cast<long long>(j), hyper.theta, p, spec.d());
  }

  const auto row_at = [&](long long lag) {
    const auto pp = static_cast<long long>(p);
    return blocks.circ_row[static_cast<Eigen::Index>(((lag % pp) + pp) % pp)];
  };

  blocks.bullet_cols.resize(static_cast<Eigen::Index>(p),
                            static_cast<Eigen::Index>(m));
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t i = 0; i < p; ++i) {
      blocks.bullet_cols(static_cast<Eigen::Index>(i),
                         static_cast<Eigen::Index>(j)) =
          row_at(static_cast<long long>(i) - static_cast<long long>(j));
    }
  }

  blocks.star_row.resize(static_cast<Eigen::Index>(m));
  for (std::size_t j = 0; j < m; ++j) {
    blocks.star_row[static_cast<Eigen::Index>(j)] =
        row_at(static_cast<long long>(j));
  }
  return blocks;
}

}  // namespace cpgp
