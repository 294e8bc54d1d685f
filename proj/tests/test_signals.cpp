#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "cpgp/signals.hpp"

using namespace cpgp;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "cpgp_signal_tests";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST(Synthesize, StartsAtZero) {
  EXPECT_LT(std::abs(transient_value(SyntheticSpec{}, 0.0)), 1e-50);
}

TEST(Synthesize, DefaultsGiveFourThousandSamples) {
  const Signal s = synthesize(SyntheticSpec{});
  EXPECT_EQ(s.size(), 4000u);
  EXPECT_EQ(s.fs(), 1.0);
}

TEST(Synthesize, PeriodicInInterior) {
  const SyntheticSpec spec;
  double peak = 0.0;
  for (double t = 0.0; t < spec.length; t += 0.5) peak = std::max(peak, std::abs(transient_value(spec, t)));
  for (double t = 5 * spec.period; t < 15 * spec.period; t += 0.37) {
    EXPECT_LT(std::abs(transient_value(spec, t) - transient_value(spec, t + spec.period)), 1e-6 * peak);
  }
}

TEST(Synthesize, PeakInFirstQuarterOfEachPeriod) {
  const SyntheticSpec spec;
  const Signal s = synthesize(spec);
  const auto p = static_cast<std::size_t>(spec.period);
  for (std::size_t r = 0; r + 1 < s.size() / p; ++r) {
    std::size_t arg = 0;
    double best = -1.0;
    for (std::size_t j = 0; j < p; ++j) {
      // Period r covers t in [r T0, (r + 1) T0); sample i sits at t = i + 1.
      const std::size_t i = r * p + j;
      if (i == 0) continue;
      const double v = std::abs(s[i - 1]);
      if (v > best) {
        best = v;
        arg = j;
      }
    }
    EXPECT_LT(arg, p / 4) << "period " << r;
  }
}

TEST(Synthesize, Deterministic) {
  EXPECT_EQ(synthesize(SyntheticSpec{}).values(), synthesize(SyntheticSpec{}).values());
}

TEST(Synthesize, FractionalPeriod) {
  SyntheticSpec spec;
  spec.period = 40.2;
  spec.length = 1000.0;
  EXPECT_EQ(synthesize(spec).size(), 1000u);
  EXPECT_NEAR(transient_value(spec, 300.0), transient_value(spec, 300.0 + 40.2), 1e-9);
}

TEST(AddNoise, InfiniteSnrIsIdentity) {
  const Signal x = synthesize(SyntheticSpec{});
  EXPECT_EQ(add_noise(x, {}).values(), x.values());
}

TEST(AddNoise, ZeroDbPower) {
  SyntheticSpec spec;
  spec.length = 1e5;
  const Signal x = synthesize(spec);
  const Signal y = add_noise(x, {0.0, 3});
  std::vector<double> e(x.size());
  for (std::size_t i = 0; i < e.size(); ++i) e[i] = y[i] - x[i];
  EXPECT_NEAR(mean_square(e), mean_square(x.values()), 0.05 * mean_square(x.values()));
  EXPECT_NEAR(measured_snr_db(x.values(), e), 0.0, 0.2);
}

TEST(AddNoise, MinusEighteenDb) {
  const Signal x = synthesize(SyntheticSpec{});
  const Signal y = add_noise(x, {-18.0, 11});
  std::vector<double> e(x.size());
  for (std::size_t i = 0; i < e.size(); ++i) e[i] = y[i] - x[i];
  EXPECT_NEAR(measured_snr_db(x.values(), e), -18.0, 0.5);
}

TEST(AddNoise, SeedDeterminism) {
  const Signal x = synthesize(SyntheticSpec{});
  EXPECT_EQ(add_noise(x, {-3.0, 5}).values(), add_noise(x, {-3.0, 5}).values());
  EXPECT_NE(add_noise(x, {-3.0, 5}).values(), add_noise(x, {-3.0, 6}).values());
}

TEST(AddNoise, ZeroPowerRejected) {
  EXPECT_THROW(add_noise(Signal({0.0, 0.0, 0.0}, 1.0), {0.0, 1}), Error);
}

TEST(Csv, RoundTripIsBitwise) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> normal(0.0, 1e3);
  std::vector<double> v(500);
  for (double& x : v) x = normal(rng) * std::pow(10.0, static_cast<int>(rng() % 20) - 10);
  v[0] = 5e-324;
  v[1] = -0.0;
  const fs::path path = temp_file("roundtrip.csv");
  write_signal_csv(path.string(), Signal(v, 1.0));
  const auto back = read_values_csv(path.string());
  ASSERT_EQ(back.size(), v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    EXPECT_EQ(std::bit_cast<std::uint64_t>(back[i]), std::bit_cast<std::uint64_t>(v[i]));
  }
}

TEST(Csv, HeaderOptional) {
  const fs::path a = temp_file("with_header.csv");
  const fs::path b = temp_file("without_header.csv");
  std::ofstream(a) << "value\n1.5\n-2\n3e2\n";
  std::ofstream(b) << "1.5\n-2\n3e2\n";
  EXPECT_EQ(read_values_csv(a.string()), read_values_csv(b.string()));
}

TEST(Csv, BadRowIsReported) {
  const fs::path path = temp_file("bad_row.csv");
  std::ofstream(path) << "value\n1\n2\n3\n4\n5\nabc\n7\n";
  try {
    read_values_csv(path.string());
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::io_error);
    EXPECT_NE(std::string(e.what()).find("row 7"), std::string::npos) << e.what();
  }
}

TEST(Csv, EmptyAndMissingFiles) {
  const fs::path empty = temp_file("empty.csv");
  std::ofstream(empty) << "value\n";
  EXPECT_THROW(read_values_csv(empty.string()), Error);
  EXPECT_THROW(read_values_csv(temp_file("does_not_exist.csv").string()), Error);
}
