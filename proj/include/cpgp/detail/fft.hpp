#pragma once

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <map>
#include <mutex>
#include <span>
#include <vector>

namespace cpgp::detail {

// Real-to-complex / complex-to-real transforms of arbitrary length backed by
// FFTW. Plans are created once per length under a lock; execution goes
// through the new-array interface, which FFTW documents as thread safe.
class RealFft {
 public:
  static RealFft& instance() {
    static RealFft fft;
    return fft;
  }

  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  // Unnormalized forward transform, n/2 + 1 output bins.
  std::vector<std::complex<double>> forward(std::span<const double> x) {
    const std::size_t n = x.size();
    std::vector<double> in(x.begin(), x.end());
    std::vector<std::complex<double>> out(n / 2 + 1);
    fftw_execute_dft_r2c(plans(n).r2c, in.data(),
                         reinterpret_cast<fftw_complex*>(out.data()));
    return out;
  }

  // Inverse transform normalized by 1/n, so inverse(forward(x)) == x.
  std::vector<double> inverse(std::span<const std::complex<double>> spectrum,
                              std::size_t n) {
    std::vector<std::complex<double>> in(spectrum.begin(), spectrum.end());
    std::vector<double> out(n);
    fftw_execute_dft_c2r(plans(n).c2r,
                         reinterpret_cast<fftw_complex*>(in.data()),
                         out.data());
    const double scale = 1.0 / static_cast<double>(n);
    for (double& v : out) v *= scale;
    return out;
  }

 private:
  struct PlanPair {
    fftw_plan r2c = nullptr;
    fftw_plan c2r = nullptr;
  };

  RealFft() = default;

  ~RealFft() {
    for (auto& [n, pair] : plans_) {
      fftw_destroy_plan(pair.r2c);
      fftw_destroy_plan(pair.c2r);
    }
  }

  const PlanPair& plans(std::size_t n) {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = plans_.find(n);
    if (it != plans_.end()) return it->second;

    const int len = static_cast<int>(n);
    std::vector<double> real(n);
    std::vector<std::complex<double>> cplx(n / 2 + 1);
    auto* c = reinterpret_cast<fftw_complex*>(cplx.data());
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    PlanPair pair;
    pair.r2c = fftw_plan_dft_r2c_1d(len, real.data(), c, flags);
    pair.c2r = fftw_plan_dft_c2r_1d(len, c, real.data(), flags);
    return plans_.emplace(n, pair).first->second;
  }

  std::mutex mutex_;
  std::map<std::size_t, PlanPair> plans_;
};

}  // namespace cpgp::detail
