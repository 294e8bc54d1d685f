#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "cpgp/estimator.hpp"
#include "cpgp/oracle.hpp"
#include "cpgp/oracle_suite.hpp"
#include "cpgp/predictor.hpp"
#include "support.hpp"

using namespace cpgp;

namespace {

void expect_matches_dense(const std::vector<double>& y, double fs, double theta, double delta,
                          std::size_t p, std::size_t d, const RegressionBasis& basis,
                          const std::vector<double>& times) {
  const PredictorState st = PredictorState::build(Signal(y, fs), theta, delta, p, d, basis);
  const oracle::DenseModel dense(y, fs, theta, delta, p, d, basis);
  for (double t : times) {
    const Prediction a = st.predict(t);
    const auto [yd, vd] = dense.blup(t);
    EXPECT_NEAR(a.y_hat, yd, 1e-9 * std::max(1.0, std::abs(yd))) << "t=" << t;
    EXPECT_NEAR(a.variance, vd, 1e-9 * vd) << "t=" << t;
  }
}

}  // namespace

TEST(CrossCorrelations, FirstGridPoint) {
  std::mt19937_64 rng(51);
  const Signal s(test::random_values(rng, 14), 2.0);
  const PredictorState st = PredictorState::build(s, 2.0, 1.0, 4, 1, RegressionBasis::constant());
  const CrossCorrelations cc = st.cross_correlations(s.time(0));
  EXPECT_DOUBLE_EQ(cc.gamma_bar[0], 1.0);
}

TEST(CrossCorrelations, PeriodicInTime) {
  std::mt19937_64 rng(52);
  const Signal s(test::random_values(rng, 14), 2.0);
  const PredictorState st = PredictorState::build(s, 2.0, 1.0, 4, 1, RegressionBasis::constant());
  const auto a = st.cross_correlations(s.time(0));
  const auto b = st.cross_correlations(s.time(0) + st.period());
  EXPECT_LE((a.gamma_bar - b.gamma_bar).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((a.gamma_star - b.gamma_star).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(CrossCorrelations, OffGridMatchesDirectEvaluation) {
  std::mt19937_64 rng(53);
  const double fs = 2.0;
  const Signal s(test::random_values(rng, 14), fs);
  const PredictorState st = PredictorState::build(s, 2.5, 1.0, 4, 1, RegressionBasis::constant());
  const double t = 3.37;
  const double period = 4.0 / fs;
  const auto cc = st.cross_correlations(t);
  for (int i = 0; i < 4; ++i) {
    EXPECT_NEAR(cc.gamma_bar[i], oracle::time_kernel(t, (i + 1) / fs, 2.5, period), 1e-14);
  }
  for (int j = 0; j < 2; ++j) {
    EXPECT_NEAR(cc.gamma_star[j], oracle::time_kernel(t, (12 + j + 1) / fs, 2.5, period), 1e-14);
  }
}

TEST(Predict, ConstantSignal) {
  const Signal s(std::vector<double>(14, 1.25), 1.0);
  const PredictorState st = PredictorState::build(s, 2.0, 1.0, 4, 1, RegressionBasis::constant());
  for (double t : {1.0, 2.5, 13.0, 20.7, -3.0}) {
    const Prediction pr = st.predict(t);
    EXPECT_NEAR(pr.y_hat, 1.25, 1e-12);
    EXPECT_GE(pr.variance, 0.0);
  }
}

TEST(Predict, MatchesDenseWithRemainder) {
  std::mt19937_64 rng(54);
  const std::vector<double> y = test::random_values(rng, 14);
  expect_matches_dense(y, 1.0, 2.0, 1.0, 4, 1, RegressionBasis::constant(),
                       {1.0, 5.0, 13.0, 14.0, 2.5, 7.31, 16.2, 30.0});
  expect_matches_dense(y, 1.0, 2.0, 1.0, 4, 1, RegressionBasis::linear(), {2.0, 9.9, 14.5});
  expect_matches_dense(y, 1.0, 2.0, 1.0, 4, 1, RegressionBasis::zero_mean(), {2.0, 9.9, 14.5});
}

TEST(Predict, MatchesDenseWithoutRemainder) {
  std::mt19937_64 rng(55);
  const std::vector<double> y = test::random_values(rng, 12);
  expect_matches_dense(y, 1.0, 2.0, 1.0, 4, 1, RegressionBasis::constant(), {1.0, 6.5, 12.0, 15.1});
}

TEST(Predict, MatchesDenseWithoutSegments) {
  std::mt19937_64 rng(56);
  const std::vector<double> y = test::random_values(rng, 6);
  expect_matches_dense(y, 1.0, 2.0, 1.0, 9, 2, RegressionBasis::constant(), {1.0, 3.5, 8.0});
}

TEST(Predict, VarianceNonnegative) {
  std::mt19937_64 rng(57);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int rep = 0; rep < 60; ++rep) {
    const oracle::Instance inst = oracle::random_instance(rng);
    const PredictorState st =
        PredictorState::build(inst.signal(), inst.theta, inst.delta, inst.p, inst.d, inst.basis);
    for (int q = 0; q < 10; ++q) {
      const double t = (unit(rng) * 1.5 * static_cast<double>(inst.y.size())) / inst.fs;
      EXPECT_GE(st.predict(t).variance, 0.0);
    }
  }
}

TEST(Denoise, NoiseFreePeriodicSignalIsReproduced) {
  std::vector<double> y(200);
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double ph = 2.0 * std::numbers::pi * static_cast<double>(i + 1) / 20.0;
    y[i] = std::sin(ph) + 0.4 * std::cos(3.0 * ph);
  }
  const Signal s(y, 1.0);
  SearchConfig cfg;
  cfg.p_max = 30;
  cfg.theta_range = {1.0, 30.0};
  cfg.delta_range = {1e-4, 1e-3};
  const FitResult f = fit(s, cfg, RegressionBasis::constant());
  ASSERT_EQ(f.p_hat % 20, 0u);
  const PredictorState st =
      PredictorState::build(s, f.theta_hat, f.delta_hat, f.p_hat, f.d, RegressionBasis::constant());
  const auto out = denoise(st, training_grid(s));
  ASSERT_EQ(out.size(), y.size());
  double worst = 0.0, peak = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    worst = std::max(worst, std::abs(out[i].y_hat - y[i]));
    peak = std::max(peak, std::abs(y[i]));
  }
  EXPECT_LE(worst, 1e-3 * peak);
}

TEST(Denoise, EmptyAndSingleGrid) {
  std::mt19937_64 rng(58);
  const Signal s(test::random_values(rng, 14), 1.0);
  const PredictorState st = PredictorState::build(s, 2.0, 1.0, 4, 1, RegressionBasis::constant());
  EXPECT_TRUE(denoise(st, std::vector<double>{}).empty());
  const std::vector<double> one{3.3};
  const auto out = denoise(st, one);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].y_hat, st.predict(3.3).y_hat);
  EXPECT_EQ(out[0].variance, st.predict(3.3).variance);
}

TEST(Predict, RejectsNonFiniteTime) {
  std::mt19937_64 rng(59);
  const Signal s(test::random_values(rng, 14), 1.0);
  const PredictorState st = PredictorState::build(s, 2.0, 1.0, 4, 1, RegressionBasis::constant());
  EXPECT_THROW(st.predict(std::nan("")), Error);
}
