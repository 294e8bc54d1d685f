#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "cpgp/likelihood.hpp"
#include "cpgp/oracle.hpp"
#include "cpgp/oracle_suite.hpp"
#include "support.hpp"

using namespace cpgp;

TEST(DenseOracle, SinglePointClosedForm) {
  const std::vector<double> y{1.7};
  const double delta = 0.6;
  const auto r = oracle::dense_loglik(y, 1.0, 2.0, delta, 3, 1, RegressionBasis::zero_mean());
  const double v = 1.0 + delta * delta;
  const double s2 = y[0] * y[0] / v;
  EXPECT_NEAR(r.sigma2_hat, s2, 1e-15);
  EXPECT_NEAR(r.loglik, -0.5 * (std::log(s2) + std::log(v) + 1.0 + std::log(2.0 * std::numbers::pi)),
              1e-14);
}

TEST(DenseOracle, AgreesWithStructuredLikelihood) {
  std::mt19937_64 rng(41);
  const Signal s(test::random_values(rng, 12), 1.0);
  const auto dense = oracle::dense_loglik(s, 2.0, 1.0, 4, 1, RegressionBasis::constant());
  const LikelihoodEval fast = profile_loglik(s, 2.0, 1.0, 4, 1, RegressionBasis::constant());
  EXPECT_NEAR(dense.loglik, fast.loglik, 1e-9 * std::abs(dense.loglik));
}

TEST(DenseOracle, WhiteNoiseLimit) {
  std::mt19937_64 rng(42);
  const std::vector<double> y = test::random_values(rng, 200, 2.0);
  const auto r = oracle::dense_loglik(y, 1.0, 5.0, 1e3, 20, 1, RegressionBasis::constant());
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= 200.0;
  double var = 0.0;
  for (double v : y) var += (v - mean) * (v - mean);
  var /= 200.0;
  EXPECT_NEAR(r.sigma2_hat * 1e6, var, 0.1 * var);
}

TEST(DenseOracle, RefusesLargeInputsUnlessOverridden) {
  const std::vector<double> y(2049, 1.0);
  try {
    oracle::dense_loglik(y, 1.0, 1.0, 1.0, 3, 1, RegressionBasis::constant());
    FAIL() << "expected refusal";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::oracle_misuse);
  }
  std::vector<double> small(40);
  std::mt19937_64 rng(1);
  small = test::random_values(rng, 40);
  oracle::DenseOptions opt;
  opt.size_cap = 10;
  EXPECT_THROW(oracle::dense_loglik(small, 1.0, 1.0, 1.0, 3, 1, RegressionBasis::constant(), opt),
               Error);
  opt.override_cap = true;
  EXPECT_NO_THROW(oracle::dense_loglik(small, 1.0, 1.0, 1.0, 3, 1, RegressionBasis::constant(), opt));
}

TEST(DenseOracle, BlupOfConstantSignal) {
  const std::vector<double> y(9, 4.0);
  const oracle::DenseModel m(y, 2.0, 3.0, 0.5, 4, 1, RegressionBasis::constant());
  for (double t : {0.5, 2.0, 3.3, 11.0}) EXPECT_NEAR(m.blup(t).first, 4.0, 1e-12);
}

TEST(DecompositionCheck, SinglePointPeriodPasses) {
  const PeriodSpec spec(1, 1, 1.0, 6);
  const Hyperparams h{3.0, 1.0};
  EXPECT_TRUE(oracle::dense_decomposition_check(spec, h, build_kernel_blocks(spec, h)).passed);
}

TEST(DecompositionCheck, RandomDrawsPass) {
  oracle::SuiteOptions opt;
  opt.seed = 17;
  const auto rep = oracle::decomposition_suite(opt);
  EXPECT_EQ(rep.instances, 50u);
  EXPECT_TRUE(rep.passed()) << rep.first_failure;
}

TEST(DecompositionCheck, CorruptedEntryIsLocated) {
  const PeriodSpec spec(5, 2, 1.0, 13);
  const Hyperparams h{2.0, 1.0};
  KernelBlocks b = build_kernel_blocks(spec, h);
  b.bullet_cols(3, 1) += 1e-3;
  const auto r = oracle::dense_decomposition_check(spec, h, b);
  EXPECT_FALSE(r.passed);
  EXPECT_EQ(r.bad_row, 3);
  EXPECT_EQ(r.bad_col, 11);
  EXPECT_NE(r.message.find("R_bullet"), std::string::npos);
}

TEST(OracleSuites, PassAndNegativeControlFails) {
  oracle::SuiteOptions opt;
  opt.likelihood_instances = 40;
  opt.blup_instances = 20;
  opt.decomposition_instances = 10;
  opt.seed = 3;
  for (const auto& r : oracle::run_all_suites(opt)) EXPECT_TRUE(r.passed()) << r.name << ": " << r.first_failure;
  opt.corrupt = true;
  for (const auto& r : oracle::run_all_suites(opt)) EXPECT_FALSE(r.passed()) << r.name;
}
