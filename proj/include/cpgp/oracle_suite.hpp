#pragma once

// Randomized equivalence suites: structured code paths against the dense
// oracle. Shared by the oracle-check command and the acceptance tests.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "cpgp/basis.hpp"
#include "cpgp/kernel.hpp"
#include "cpgp/likelihood.hpp"
#include "cpgp/oracle.hpp"
#include "cpgp/predictor.hpp"
#include "cpgp/structured_linalg.hpp"

namespace cpgp::oracle {

struct Instance {
  std::vector<double> y;
  double fs = 1.0;
  double theta = 1.0;
  double delta = 1.0;
  std::size_t p = 1;
  std::size_t d = 1;
  RegressionBasis basis = RegressionBasis::constant();

  Signal signal() const { return Signal(y, fs); }
};

struct InstanceRanges {
  std::size_t n_min = 2;
  std::size_t n_max = 64;
  std::size_t p_max = 16;
  std::size_t d_max = 3;
  double theta_lo = 1.0;
  double theta_hi = 30.0;
  double delta_lo = 0.1;
  double delta_hi = 10.0;
};

/// y = random periodic pattern + white noise + mild offset, with a basis
/// drawn from {constant, zero mean, linear}.
inline Instance random_instance(std::mt19937_64& rng, const InstanceRanges& r = {}) {
  std::uniform_int_distribution<std::size_t> n_dist(r.n_min, r.n_max);
  std::uniform_int_distribution<std::size_t> p_dist(1, r.p_max);
  std::uniform_int_distribution<std::size_t> d_dist(1, r.d_max);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  Instance inst;
  switch (std::uniform_int_distribution<int>(0, 2)(rng)) {
    case 0: inst.basis = RegressionBasis::constant(); break;
    case 1: inst.basis = RegressionBasis::zero_mean(); break;
    default: inst.basis = RegressionBasis::linear(); break;
  }
  // At least two residual degrees of freedom, otherwise sigma2_hat is 0.
  const std::size_t n = std::max(n_dist(rng), inst.basis.size() + 2);
  inst.p = p_dist(rng);
  inst.d = d_dist(rng);
  inst.theta = r.theta_lo + (r.theta_hi - r.theta_lo) * unit(rng);
  inst.delta = r.delta_lo * std::pow(r.delta_hi / r.delta_lo, unit(rng));
  inst.fs = std::pow(10.0, unit(rng) - 0.5);
  const double offset = 2.0 * normal(rng);
  std::vector<double> pattern(inst.p);
  for (double& v : pattern) v = normal(rng);
  inst.y.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    inst.y[i] = offset + pattern[(inst.d * i) % inst.p] + 0.5 * normal(rng);
  }
  return inst;
}

struct SuiteReport {
  std::string name;
  std::size_t instances = 0;
  std::size_t failures = 0;
  double max_error = 0.0;  ///< worst error normalized by its tolerance scale
  long long worst_instance = -1;
  std::string first_failure;

  bool passed() const { return failures == 0 && instances > 0; }

  void record(std::size_t index, double err, double tol, const std::string& what) {
    if (!(err <= max_error)) {
      max_error = err;
      worst_instance = static_cast<long long>(index);
    }
    if (!(err <= tol)) {
      if (failures == 0) {
        first_failure = what + " at instance " + std::to_string(index) + ": " +
                        std::to_string(err);
      }
      ++failures;
    }
  }
};

struct SuiteOptions {
  std::size_t likelihood_instances = 200;
  std::size_t blup_instances = 100;
  std::size_t queries_per_instance = 5;
  std::size_t decomposition_instances = 50;
  unsigned long long seed = 0;
  /// Negative control: the dense side uses a slightly wrong kernel and the
  /// structured blocks get one corrupted entry. Every suite should fail.
  bool corrupt = false;
};

namespace detail {

inline double corrupt_theta(double theta, bool corrupt) {
  return corrupt ? theta * 1.01 : theta;
}

}  // namespace detail

/// |l_fast - l_dense| <= 1e-8 max(1, |l_dense|).
inline SuiteReport likelihood_suite(const SuiteOptions& opt) {
  SuiteReport rep;
  rep.name = "likelihood";
  std::mt19937_64 rng(opt.seed);
  for (std::size_t i = 0; i < opt.likelihood_instances; ++i) {
    const Instance inst = random_instance(rng);
    const Signal s = inst.signal();
    const double fast = profile_loglik(s, inst.theta, inst.delta, inst.p, inst.d, inst.basis).loglik;
    const double dense = dense_loglik(s, detail::corrupt_theta(inst.theta, opt.corrupt),
                                      inst.delta, inst.p, inst.d, inst.basis)
                             .loglik;
    ++rep.instances;
    rep.record(i, std::abs(fast - dense) / std::max(1.0, std::abs(dense)), 1e-8, "loglik");
  }
  return rep;
}

/// Segment precision Sigma^{-1} v against a dense solve (1e-9 relative) and
/// 2kp log delta + log|R_delta| against the dense log|Sigma| (1e-9 per sample).
inline SuiteReport woodbury_suite(const SuiteOptions& opt) {
  SuiteReport rep;
  rep.name = "woodbury";
  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < opt.likelihood_instances; ++i) {
    const Instance inst = random_instance(rng);
    const std::size_t n = inst.y.size();
    const std::size_t k = n / inst.p;
    if (k == 0) continue;
    const auto kp = static_cast<Index>(k * inst.p);

    const double theta_dense = detail::corrupt_theta(inst.theta, opt.corrupt);
    Eigen::MatrixXd sigma(kp, kp);
    for (Index a = 0; a < kp; ++a) {
      for (Index b = 0; b < kp; ++b) {
        sigma(a, b) = grid_kernel(a - b, theta_dense, inst.p, inst.d) +
                      (a == b ? inst.delta * inst.delta : 0.0);
      }
    }
    const Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    const Eigen::MatrixXd lower = llt.matrixL();
    const double logdet_dense = 2.0 * lower.diagonal().array().log().sum();

    Eigen::VectorXd row(static_cast<Index>(inst.p));
    for (std::size_t j = 0; j < inst.p; ++j) {
      row[static_cast<Index>(j)] =
          periodic_correlation(static_cast<long long>(j), inst.theta, inst.p, inst.d);
    }
    const SymmetricCirculant rdelta = make_rdelta(circulant_eigenvalues(row), k, inst.delta);

    Eigen::VectorXd v(kp);
    for (Index a = 0; a < kp; ++a) v[a] = normal(rng);
    const Eigen::VectorXd fast = segment_precision_apply(rdelta, k, inst.delta, v);
    const Eigen::VectorXd dense = llt.solve(v);
    const double logdet_fast = 2.0 * static_cast<double>(kp) * std::log(inst.delta) + rdelta.logdet();

    ++rep.instances;
    rep.record(i, (fast - dense).norm() / dense.norm(), 1e-9, "Sigma^{-1} v");
    rep.record(i, std::abs(logdet_fast - logdet_dense) / static_cast<double>(kp), 1e-9,
               "log|Sigma|");
  }
  return rep;
}

/// Fast BLUP against the dense BLUP at on- and off-grid query points:
/// mean to 1e-8 (1 + |y|), variance to 1e-7 relative.
inline SuiteReport blup_suite(const SuiteOptions& opt) {
  SuiteReport rep;
  rep.name = "blup";
  std::mt19937_64 rng(opt.seed + 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t i = 0; i < opt.blup_instances; ++i) {
    const Instance inst = random_instance(rng);
    const Signal s = inst.signal();
    const std::size_t n = inst.y.size();
    const PredictorState state =
        PredictorState::build(s, inst.theta, inst.delta, inst.p, inst.d, inst.basis);
    const DenseModel model(inst.y, inst.fs, detail::corrupt_theta(inst.theta, opt.corrupt),
                           inst.delta, inst.p, inst.d, inst.basis);
    ++rep.instances;
    for (std::size_t qi = 0; qi < opt.queries_per_instance; ++qi) {
      double t;
      if (qi % 2 == 0) {
        const auto idx = std::min<std::size_t>(n - 1, static_cast<std::size_t>(unit(rng) * n));
        t = static_cast<double>(idx + 1) / inst.fs;
      } else {
        t = (unit(rng) * (static_cast<double>(n) + 2.0 * static_cast<double>(inst.p))) / inst.fs;
      }
      const Prediction fast = state.predict(t);
      const auto [y_dense, var_dense] = model.blup(t);
      rep.record(i, std::abs(fast.y_hat - y_dense) / (1.0 + std::abs(y_dense)), 1e-8, "y_hat");
      rep.record(i, std::abs(fast.variance - var_dense) / std::abs(var_dense), 1e-7, "variance");
    }
  }
  return rep;
}

inline SuiteReport decomposition_suite(const SuiteOptions& opt) {
  SuiteReport rep;
  rep.name = "decomposition";
  std::mt19937_64 rng(opt.seed + 2);
  for (std::size_t i = 0; i < opt.decomposition_instances; ++i) {
    const Instance inst = random_instance(rng);
    const PeriodSpec spec(inst.p, inst.d, inst.fs, inst.y.size());
    const Hyperparams hyper{inst.theta, inst.delta};
    KernelBlocks blocks = build_kernel_blocks(spec, hyper);
    if (opt.corrupt) blocks.circ_row[0] += 1e-6;
    const DecompositionReport r = dense_decomposition_check(spec, hyper, blocks);
    ++rep.instances;
    rep.record(i, r.max_abs_error, 1e-14, "block layout (" + r.message + ")");
  }
  return rep;
}

inline std::vector<SuiteReport> run_all_suites(const SuiteOptions& opt) {
  return {likelihood_suite(opt), woodbury_suite(opt), blup_suite(opt), decomposition_suite(opt)};
}

}  // namespace cpgp::oracle
