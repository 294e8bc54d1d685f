#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Outcome {
  int status;
  std::string err;
};

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "cpgp_cli_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome run(const std::string& args, const fs::path& dir) {
  const fs::path err = dir / "stderr.txt";
  const std::string cmd = std::string(CPGP_CLI_PATH) + " " + args + " > " + (dir / "stdout.txt").string() +
                          " 2> " + err.string();
  const int raw = std::system(cmd.c_str());
  return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, slurp(err)};
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

}  // namespace

TEST(Cli, SimulateThenFitNoiseFree) {
  const fs::path dir = scratch("fit_clean");
  ASSERT_EQ(run("simulate --period 50 --length 1000 --snr inf --output-dir " + dir.string(), dir).status, 0);
  EXPECT_TRUE(fs::exists(dir / "noisy.csv"));
  EXPECT_EQ(read_json(dir / "noisy.json").at("fs"), 1.0);
  const fs::path out = dir / "fit";
  const Outcome r = run("fit --input " + (dir / "noisy.csv").string() + " --pmax 120 --output-dir " + out.string(), dir);
  ASSERT_EQ(r.status, 0) << r.err;
  const json f = read_json(out / "fit.json");
  EXPECT_EQ(f.at("p_hat"), 50);
  EXPECT_EQ(f.at("period_hat"), 50.0);
  EXPECT_EQ(f.at("variant"), "cpgp");
  EXPECT_TRUE(fs::exists(out / "scan_trace.csv"));
}

TEST(Cli, ManifestReproducesRun) {
  const fs::path dir = scratch("manifest");
  const fs::path a = dir / "a", b = dir / "b";
  ASSERT_EQ(run("simulate --length 800 --snr -3 --seed 12 --output-dir " + a.string(), dir).status, 0);
  const json m = read_json(a / "manifest.json");
  EXPECT_NEAR(m.at("measured_snr_db").get<double>(), -3.0, 0.5);
  ASSERT_EQ(run("simulate --config " + (a / "manifest.json").string() + " --output-dir " + b.string(), dir).status,
            0);
  EXPECT_EQ(slurp(a / "noisy.csv"), slurp(b / "noisy.csv"));
}

TEST(Cli, VariantFlagSwitchesObjective) {
  const fs::path dir = scratch("variant");
  ASSERT_EQ(run("simulate --period 20 --length 400 --snr 5 --output-dir " + dir.string(), dir).status, 0);
  const std::string input = " --input " + (dir / "noisy.csv").string() + " --pmax 30";
  ASSERT_EQ(run("fit" + input + " --variant acpgp --output-dir " + (dir / "a").string(), dir).status, 0);
  ASSERT_EQ(run("fit" + input + " --variant cpgp --output-dir " + (dir / "c").string(), dir).status, 0);
  const json a = read_json(dir / "a" / "fit.json");
  const json c = read_json(dir / "c" / "fit.json");
  EXPECT_EQ(a.at("variant"), "acpgp");
  EXPECT_NE(a.at("loglik"), c.at("loglik"));
}

TEST(Cli, PredictOnTrainingGrid) {
  const fs::path dir = scratch("predict");
  ASSERT_EQ(run("simulate --period 20 --length 200 --snr 10 --output-dir " + dir.string(), dir).status, 0);
  const Outcome r = run("predict --input " + (dir / "noisy.csv").string() +
                        " --theta 3 --delta 1 --p 20 --grid training --output-dir " + dir.string(),
                    dir);
  ASSERT_EQ(r.status, 0) << r.err;
  std::ifstream in(dir / "prediction.csv");
  std::string line;
  std::size_t rows = 0;
  std::getline(in, line);
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 200u);
}

TEST(Cli, BenchSingleCell) {
  const fs::path dir = scratch("bench");
  const Outcome r = run("bench --n 500 --p 10 --reps 20 --output-dir " + dir.string(), dir);
  ASSERT_EQ(r.status, 0) << r.err;
  std::ifstream in(dir / "bench.csv");
  std::string header, row, extra;
  std::getline(in, header);
  EXPECT_TRUE(static_cast<bool>(std::getline(in, row)));
  EXPECT_FALSE(static_cast<bool>(std::getline(in, extra)));
  EXPECT_EQ(row.rfind("500,10,", 0), 0u) << row;
}

TEST(Cli, OracleCheckAndNegativeControl) {
  const fs::path dir = scratch("oracle");
  EXPECT_EQ(run("oracle-check --instances 20 --blup-instances 10 --output-dir " + dir.string(), dir).status, 0);
  EXPECT_TRUE(read_json(dir / "oracle_check.json").is_object());
  EXPECT_EQ(run("oracle-check --instances 20 --blup-instances 10 --corrupt --output-dir " + dir.string(), dir).status,
            3);
}

TEST(Cli, ErrorExitCodes) {
  const fs::path dir = scratch("errors");
  std::ofstream(dir / "y.csv") << "value\n1\n2\n3\n4\n5\nabc\n7\n";
  std::ofstream(dir / "ok.csv") << "1\n2\n3\n4\n5\n6\n7\n8\n";

  Outcome r = run("fit --input " + (dir / "y.csv").string() + " --fs 1 --output-dir " + dir.string(), dir);
  EXPECT_EQ(r.status, 4);
  EXPECT_NE(r.err.find("row 7"), std::string::npos) << r.err;
  EXPECT_EQ(json::parse(r.err).at("error").at("exit_code"), 4);

  r = run("fit --input " + (dir / "ok.csv").string() + " --output-dir " + dir.string(), dir);
  EXPECT_EQ(r.status, 2) << r.err;

  r = run("fit --input " + (dir / "ok.csv").string() + " --fs 1 --d 1 --dstar 2 --output-dir " + dir.string(), dir);
  EXPECT_EQ(r.status, 2);
  EXPECT_NE(r.err.find("d_star"), std::string::npos) << r.err;

  r = run("fit --input " + (dir / "ok.csv").string() + " --fs 1 --theta-range 5 --output-dir " + dir.string(), dir);
  EXPECT_EQ(r.status, 2);

  r = run("fit --input " + (dir / "missing.csv").string() + " --fs 1 --output-dir " + dir.string(), dir);
  EXPECT_EQ(r.status, 4);

  std::ofstream(dir / "flat.csv") << "0\n0\n0\n0\n0\n0\n";
  r = run("fit --input " + (dir / "flat.csv").string() + " --fs 1 --pmax 3 --output-dir " + dir.string(), dir);
  EXPECT_EQ(r.status, 3) << r.err;
}
