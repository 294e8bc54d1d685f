#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cpgp/detail/summation.hpp"
#include "cpgp/error.hpp"
#include "cpgp/kernel.hpp"

namespace cpgp {

/// Periodic damped transients: one Gaussian-windowed sinusoid per period.
struct SyntheticSpec {
  double zeta = 0.01;      ///< damping ratio
  double omega = 0.055;    ///< natural frequency (Hz)
  double period = 200.0;   ///< T0 (s)
  double length = 4000.0;  ///< record length l (s)
  double fs = 1.0;         ///< sampling frequency (Hz)

  void validate() const {
    detail::require(zeta > 0.0 && zeta < 1.0, "damping ratio must lie in (0, 1)");
    detail::require(omega > 0.0 && std::isfinite(omega), "natural frequency must be positive");
    detail::require(period > 0.0 && std::isfinite(period), "period must be positive");
    detail::require(length > 0.0 && std::isfinite(length), "record length must be positive");
    detail::require(fs > 0.0 && std::isfinite(fs), "sampling frequency must be positive");
  }

  /// Number of samples t_i = i / fs with t_i <= length.
  std::size_t samples() const {
    return static_cast<std::size_t>(std::floor(length * fs + 1e-9));
  }
};

struct NoiseSpec {
  double snr_db = std::numeric_limits<double>::infinity();  ///< +inf: no noise
  unsigned long long seed = 0;
};

/// x(t) = sum_{j=0}^{floor(l/T0)} exp(-zeta 2 pi omega (t - j T0)^2 / sqrt(1 - zeta^2))
///                               * sin(2 pi omega (t - j T0))
/// Terms whose envelope is below 1e-300 are skipped.
inline double transient_value(const SyntheticSpec& spec, double t) {
  const double rate =
      spec.zeta * 2.0 * std::numbers::pi * spec.omega / std::sqrt(1.0 - spec.zeta * spec.zeta);
  constexpr double min_log_envelope = -690.7755278982137;  // log(1e-300)
  const auto terms = static_cast<long long>(std::floor(spec.length / spec.period));
  double x = 0.0;
  for (long long j = 0; j <= terms; ++j) {
    const double dt = t - static_cast<double>(j) * spec.period;
    const double exponent = -rate * dt * dt;
    if (exponent < min_log_envelope) continue;
    x += std::exp(exponent) * std::sin(2.0 * std::numbers::pi * spec.omega * dt);
  }
  return x;
}

inline Signal synthesize(const SyntheticSpec& spec) {
  spec.validate();
  const std::size_t n = spec.samples();
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = transient_value(spec, static_cast<double>(i + 1) / spec.fs);
  }
  return Signal(std::move(x), spec.fs);
}

inline double mean_square(const std::vector<double>& x) {
  detail::CompensatedSum s;
  for (double v : x) s.add(v * v);
  return s.value() / static_cast<double>(x.size());
}

/// Empirical SNR in dB of a clean signal against a noise sequence.
inline double measured_snr_db(const std::vector<double>& clean,
                              const std::vector<double>& noise) {
  return 10.0 * std::log10(mean_square(clean) / mean_square(noise));
}

/// x + e with e i.i.d. N(0, P_x 10^(-snr/10)), P_x the mean-square power of x.
inline Signal add_noise(const Signal& x, const NoiseSpec& noise) {
  const double power = mean_square(x.values());
  detail::require(power > 0.0, "cannot set an SNR on a zero-power signal");
  if (noise.snr_db == std::numeric_limits<double>::infinity()) return x;
  detail::require(std::isfinite(noise.snr_db), "snr must be finite or +inf");
  const double sd = std::sqrt(power * std::pow(10.0, -noise.snr_db / 10.0));
  std::mt19937_64 rng(noise.seed);
  std::normal_distribution<double> normal(0.0, sd);
  std::vector<double> y = x.values();
  for (double& v : y) v += normal(rng);
  return Signal(std::move(y), x.fs());
}

/// One value per line, optional header line "value". The sampling frequency
/// travels out of band.
inline std::vector<double> read_values_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) detail::fail(ErrorCode::io_error, "cannot open " + path);
  std::vector<double> values;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t");
    const std::string field = line.substr(first, last - first + 1);
    if (row == 1 && field == "value") continue;
    double v = 0.0;
    const char* begin = field.data();
    const char* end = field.data() + field.size();
    const auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc() || ptr != end || !std::isfinite(v)) {
      detail::fail(ErrorCode::io_error,
                   path + ": cannot parse row " + std::to_string(row) + ": '" + field + "'");
    }
    values.push_back(v);
  }
  if (values.empty()) detail::fail(ErrorCode::io_error, path + ": no values");
  return values;
}

inline Signal read_signal_csv(const std::string& path, double fs) {
  return Signal(read_values_csv(path), fs);
}

inline void write_signal_csv(const std::string& path, const Signal& signal) {
  std::ofstream out(path);
  if (!out) detail::fail(ErrorCode::io_error, "cannot write " + path);
  out << "value\n";
  char buf[64];
  for (double v : signal.values()) {
    const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
    out.write(buf, res.ptr - buf);
    out.put('\n');
  }
  if (!out) detail::fail(ErrorCode::io_error, "failed writing " + path);
}

}  // namespace cpgp
