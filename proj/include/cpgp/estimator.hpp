#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "cpgp/basis.hpp"
#include "cpgp/error.hpp"
#include "cpgp/kernel.hpp"
#include "cpgp/likelihood.hpp"

namespace cpgp {

enum class Variant { cpgp, acpgp };

inline std::string_view to_string(Variant v) {
  return v == Variant::cpgp ? "cpgp" : "acpgp";
}

struct Range {
  double lo;
  double hi;

  double mid() const { return std::sqrt(lo * hi); }
  double width() const { return hi - lo; }
  double clamp(double x) const { return std::clamp(x, lo, hi); }
};

struct PatternSearchOptions {
  double step_fraction = 0.25;
  double contraction = 0.5;
  double tol = 1e-3;
  int max_iters = 200;
};

struct SearchConfig {
  std::size_t p_max = 500;
  std::size_t d = 1;
  std::size_t d_star = 1;
  Range theta_range{1.0, 30.0};
  Range delta_range{2.0, 20.0};
  PatternSearchOptions search;
  unsigned workers = 1;
  unsigned long long rng_seed = 0;

  /// Coarse grid used while tuning (theta, delta): {1..d* p_max}.
  std::size_t tuning_scan_size() const { return d_star * p_max; }
  /// Fine grid of the final period scan: {1..d p_max}.
  std::size_t final_scan_size() const { return d * p_max; }

  void validate() const {
    auto bad = [](const std::string& what) { detail::fail(ErrorCode::config_error, what); };
    if (p_max < 1) bad("p_max must be >= 1");
    if (d < 1) bad("d must be >= 1");
    if (d_star < 1 || d_star > d) bad("d_star must satisfy 1 <= d_star <= d");
    for (const auto& [name, r] : {std::pair{"theta", theta_range}, std::pair{"delta", delta_range}}) {
      if (!(r.lo > 0.0) || !(r.hi >= r.lo) || !std::isfinite(r.hi)) {
        bad(std::string(name) + " range must satisfy 0 < lo <= hi");
      }
    }
    if (!(search.step_fraction > 0.0) || !(search.contraction > 0.0 && search.contraction < 1.0) ||
        !(search.tol > 0.0) || search.max_iters < 1) {
      bad("invalid pattern-search controls");
    }
    if (workers < 1) bad("workers must be >= 1");
  }
};

/// One likelihood evaluation of the chosen variant; numerical failures at a
/// single (theta, delta, p) are reported as -inf instead of propagating.
inline double evaluate_or_worst(Variant variant, const Signal& signal, double theta,
                                double delta, std::size_t p, std::size_t d,
                                const RegressionBasis& basis) {
  if (variant == Variant::acpgp && p > signal.size()) {
    return -std::numeric_limits<double>::infinity();
  }
  try {
    const LikelihoodEval ev = variant == Variant::cpgp
                                  ? profile_loglik(signal, theta, delta, p, d, basis)
                                  : acpgp_loglik(signal, theta, delta, p, d, basis);
    return ev.loglik;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::invalid_argument) throw;
    return -std::numeric_limits<double>::infinity();
  }
}

/// Log-likelihood for every p in {1..p_count}; entry p-1 belongs to p.
/// Work is dealt round-robin to `workers` threads; each result lands in its
/// own slot, so the output does not depend on scheduling.
inline std::vector<double> scan_periods(const Signal& signal, double theta, double delta,
                                        std::size_t d, std::size_t p_count,
                                        const RegressionBasis& basis,
                                        Variant variant = Variant::cpgp,
                                        unsigned workers = 1) {
  std::vector<double> values(p_count, -std::numeric_limits<double>::infinity());
  const unsigned w = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(p_count, 1))));
  auto run = [&](unsigned offset) {
    for (std::size_t idx = offset; idx < p_count; idx += w) {
      values[idx] = evaluate_or_worst(variant, signal, theta, delta, idx + 1, d, basis);
    }
  };
  if (w == 1) {
    run(0);
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(w);
    for (unsigned t = 0; t < w; ++t) pool.emplace_back(run, t);
  }
  return values;
}

struct ScanBest {
  std::size_t p = 0;  ///< 0 when every candidate failed
  double loglik = -std::numeric_limits<double>::infinity();
};

/// Argmax over a scan, ties resolved toward the smallest p.
inline ScanBest argmax_period(const std::vector<double>& values) {
  ScanBest best;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] > best.loglik) {
      best.loglik = values[i];
      best.p = i + 1;
    }
  }
  return best;
}

inline ScanBest scan_objective(const Signal& signal, double theta, double delta,
                               std::size_t d_star, std::size_t p_max,
                               const RegressionBasis& basis, Variant variant = Variant::cpgp,
                               unsigned workers = 1) {
  return argmax_period(
      scan_periods(signal, theta, delta, d_star, d_star * p_max, basis, variant, workers));
}

struct HyperTraceEntry {
  double theta;
  double delta;
  double objective;
  std::size_t best_p;
  bool improved;  ///< new running best at the time of evaluation
};

struct PatternSearchResult {
  std::vector<double> x;
  double value = -std::numeric_limits<double>::infinity();
  int iterations = 0;
  std::size_t evaluations = 0;
};

/// Hooke-Jeeves pattern search maximizing `objective` on a box. Every
/// evaluated point is clamped into [lo, hi]; repeated points are served
/// from a cache. Returns the best point visited.
inline PatternSearchResult pattern_search(
    const std::function<double(const std::vector<double>&)>& objective,
    std::vector<double> start, const std::vector<Range>& box,
    const PatternSearchOptions& options) {
  const std::size_t dim = box.size();
  detail::require(start.size() == dim, "start point dimension mismatch");
  std::map<std::vector<double>, double> cache;
  PatternSearchResult result;

  auto clamp = [&](std::vector<double> x) {
    for (std::size_t i = 0; i < dim; ++i) x[i] = box[i].clamp(x[i]);
    return x;
  };
  auto eval = [&](const std::vector<double>& x) {
    auto it = cache.find(x);
    if (it != cache.end()) return it->second;
    const double v = objective(x);
    ++result.evaluations;
    cache.emplace(x, v);
    return v;
  };

  std::vector<double> step(dim);
  for (std::size_t i = 0; i < dim; ++i) step[i] = options.step_fraction * box[i].width();

  auto explore = [&](std::vector<double> x, double fx) {
    for (std::size_t i = 0; i < dim; ++i) {
      if (step[i] <= 0.0) continue;
      for (double sign : {1.0, -1.0}) {
        std::vector<double> trial = x;
        trial[i] += sign * step[i];
        trial = clamp(std::move(trial));
        if (trial[i] == x[i]) continue;
        const double ft = eval(trial);
        if (ft > fx) {
          x = std::move(trial);
          fx = ft;
          break;
        }
      }
    }
    return std::pair{x, fx};
  };

  auto converged = [&] {
    for (std::size_t i = 0; i < dim; ++i) {
      if (step[i] >= options.tol * box[i].width() && step[i] > 0.0) return false;
    }
    return true;
  };

  std::vector<double> base = clamp(std::move(start));
  double f_base = eval(base);
  int iter = 0;
  while (iter < options.max_iters && !converged()) {
    ++iter;
    auto [x1, f1] = explore(base, f_base);
    if (f1 > f_base) {
      while (true) {
        std::vector<double> pattern(dim);
        for (std::size_t i = 0; i < dim; ++i) pattern[i] = 2.0 * x1[i] - base[i];
        pattern = clamp(std::move(pattern));
        base = x1;
        f_base = f1;
        if (iter >= options.max_iters) break;
        const double f_pattern = eval(pattern);
        auto [x2, f2] = explore(pattern, f_pattern);
        if (f2 > f_base) {
          x1 = std::move(x2);
          f1 = f2;
          ++iter;
        } else {
          break;
        }
      }
    } else {
      for (double& s : step) s *= options.contraction;
    }
  }
  result.x = base;
  result.value = f_base;
  result.iterations = iter;
  return result;
}

struct GridStart {
  double theta;
  double delta;
  double objective;
};

/// Best of the 3 x 3 grid {lo, geometric mid, hi}^2 of (theta, delta) under
/// an arbitrary objective. Ties keep the first candidate in theta-major order.
inline GridStart best_grid_point(const std::function<double(double, double)>& objective,
                                 const Range& theta_range, const Range& delta_range) {
  GridStart best{theta_range.lo, delta_range.lo, -std::numeric_limits<double>::infinity()};
  bool found = false;
  for (double theta : {theta_range.lo, theta_range.mid(), theta_range.hi}) {
    for (double delta : {delta_range.lo, delta_range.mid(), delta_range.hi}) {
      const double v = objective(theta, delta);
      if (v > best.objective) {
        best = {theta, delta, v};
        found = true;
      }
    }
  }
  if (!found) {
    detail::fail(ErrorCode::initialization_failure,
                 "every initial grid candidate failed to evaluate");
  }
  return best;
}

inline GridStart init_grid(const Signal& signal, const SearchConfig& config,
                           const RegressionBasis& basis, Variant variant = Variant::cpgp,
                           std::vector<HyperTraceEntry>* trace = nullptr) {
  config.validate();
  double running = -std::numeric_limits<double>::infinity();
  return best_grid_point(
      [&](double theta, double delta) {
        const ScanBest s = scan_objective(signal, theta, delta, config.d_star, config.p_max,
                                          basis, variant, config.workers);
        const bool improved = s.loglik > running;
        if (improved) running = s.loglik;
        if (trace) trace->push_back({theta, delta, s.loglik, s.p, improved});
        return s.loglik;
      },
      config.theta_range, config.delta_range);
}

struct HyperFit {
  double theta;
  double delta;
  double objective;
  std::vector<HyperTraceEntry> trace;
};

inline HyperFit optimize_hyperparams(const Signal& signal, const SearchConfig& config,
                                     const RegressionBasis& basis,
                                     Variant variant = Variant::cpgp) {
  HyperFit fit;
  const GridStart start = init_grid(signal, config, basis, variant, &fit.trace);
  double running_best = start.objective;

  auto objective = [&](const std::vector<double>& x) {
    const ScanBest s = scan_objective(signal, x[0], x[1], config.d_star, config.p_max, basis,
                                      variant, config.workers);
    const bool improved = s.loglik > running_best;
    if (improved) running_best = s.loglik;
    fit.trace.push_back({x[0], x[1], s.loglik, s.p, improved});
    return s.loglik;
  };

  const PatternSearchResult res = pattern_search(
      objective, {start.theta, start.delta}, {config.theta_range, config.delta_range},
      config.search);
  fit.theta = res.x[0];
  fit.delta = res.x[1];
  fit.objective = res.value;
  return fit;
}

struct FitResult {
  Variant variant = Variant::cpgp;
  double theta_hat = 0.0;
  double delta_hat = 0.0;
  std::size_t p_hat = 0;
  std::size_t d = 1;
  std::size_t p_reduced = 0;  ///< p_hat / gcd(p_hat, d)
  std::size_t d_reduced = 1;  ///< d / gcd(p_hat, d)
  double fs = 1.0;
  double period_hat = 0.0;    ///< p_hat / (d fs)
  Eigen::VectorXd beta_hat;
  double sigma2_hat = 0.0;
  double loglik = -std::numeric_limits<double>::infinity();
  std::vector<std::pair<std::size_t, double>> scan_trace;
  std::vector<HyperTraceEntry> hyper_trace;
};

/// Tune (theta, delta) on the coarse grid {1..d* p_max}, then scan the fine
/// grid {1..d p_max} at the tuned values and report the best period.
inline FitResult fit(const Signal& signal, const SearchConfig& config,
                     const RegressionBasis& basis, Variant variant = Variant::cpgp) {
  config.validate();
  HyperFit hyper = optimize_hyperparams(signal, config, basis, variant);

  FitResult out;
  out.variant = variant;
  out.theta_hat = hyper.theta;
  out.delta_hat = hyper.delta;
  out.d = config.d;
  out.fs = signal.fs();
  out.hyper_trace = std::move(hyper.trace);

  const std::vector<double> values = scan_periods(signal, hyper.theta, hyper.delta, config.d,
                                                  config.final_scan_size(), basis, variant,
                                                  config.workers);
  out.scan_trace.reserve(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out.scan_trace.emplace_back(i + 1, values[i]);

  const ScanBest best = argmax_period(values);
  if (best.p == 0) detail::fail(ErrorCode::fit_failure, "no period candidate could be evaluated");

  out.p_hat = best.p;
  out.loglik = best.loglik;
  const PeriodSpec spec(best.p, config.d, signal.fs(), signal.size());
  const auto [pr, dr] = spec.reduced();
  out.p_reduced = pr;
  out.d_reduced = dr;
  out.period_hat = spec.period();

  const LikelihoodEval ev =
      variant == Variant::cpgp
          ? profile_loglik(signal, hyper.theta, hyper.delta, best.p, config.d, basis)
          : acpgp_loglik(signal, hyper.theta, hyper.delta, best.p, config.d, basis);
  out.beta_hat = ev.beta_hat;
  out.sigma2_hat = ev.sigma2_hat;
  return out;
}

}  // namespace cpgp
