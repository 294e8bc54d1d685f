// Estimate the period of a noisy synthetic transient train and denoise it.
#include <cstdio>

#include "cpgp/cpgp.hpp"

int main() {
  cpgp::SyntheticSpec spec;  // T0 = 200 s, fs = 1 Hz, 4000 samples
  const cpgp::Signal clean = cpgp::synthesize(spec);
  const cpgp::Signal noisy = cpgp::add_noise(clean, {-11.0, 7});

  cpgp::SearchConfig config;
  config.p_max = 300;
  const auto basis = cpgp::RegressionBasis::constant();
  const cpgp::FitResult fit = cpgp::fit(noisy, config, basis);
  std::printf("period %.1f s (p=%zu), theta %.3f, delta %.3f\n", fit.period_hat, fit.p_hat,
              fit.theta_hat, fit.delta_hat);

  const auto state =
      cpgp::PredictorState::build(noisy, fit.theta_hat, fit.delta_hat, fit.p_hat, fit.d, basis);
  for (double t : {100.0, 200.0, 210.0, 4100.0}) {
    const cpgp::Prediction pr = state.predict(t);
    std::printf("t=%7.1f  y_hat=% .4f  clean=% .4f  sd=%.4f\n", t, pr.y_hat,
                cpgp::transient_value(spec, t), std::sqrt(pr.variance));
  }
}
