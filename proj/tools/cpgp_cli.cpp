// cpgp: command line front end for period estimation with the circulant
// periodic GP. Subcommands: simulate, fit, scan, predict, bench, oracle-check.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cpgp/cpgp.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum ExitCode { kOk = 0, kConfig = 2, kNumerical = 3, kIo = 4 };

int exit_code_for(cpgp::ErrorCode code) {
  switch (code) {
    case cpgp::ErrorCode::config_error:
    case cpgp::ErrorCode::invalid_argument:
      return kConfig;
    case cpgp::ErrorCode::io_error:
      return kIo;
    default:
      return kNumerical;
  }
}

int report_error(std::string_view code, const std::string& message, int exit_code) {
  json err = {{"error", {{"code", code}, {"message", message}, {"exit_code", exit_code}}}};
  std::cerr << err.dump() << '\n';
  return exit_code;
}

[[noreturn]] void config_fail(const std::string& msg) {
  cpgp::detail::fail(cpgp::ErrorCode::config_error, msg);
}

// Every run is driven by one flat JSON object. Defaults < --config file <
// explicit flags. The resolved object goes into the manifest so a run can be
// repeated with `--config manifest.json`.
json default_config() {
  return {
      {"input", ""},
      {"fs", nullptr},
      {"pmax", 500},
      {"d", 1},
      {"dstar", 1},
      {"theta_range", {1.0, 30.0}},
      {"delta_range", {2.0, 20.0}},
      {"variant", "cpgp"},
      {"seed", 0},
      {"workers", 1},
      {"output_dir", "."},
      {"basis", "constant"},
      // simulate
      {"zeta", 0.01},
      {"omega", 0.055},
      {"period", 200.0},
      {"length", 4000.0},
      {"snr_db", -18.0},
      // scan / predict
      {"theta", nullptr},
      {"delta", nullptr},
      {"p", nullptr},
      {"fit", ""},
      {"grid", "training"},
      // bench
      {"n_list", {10000, 100000}},
      {"p_list", {100}},
      {"reps", 20},
      // oracle-check
      {"instances", 200},
      {"blup_instances", 100},
      {"corrupt", false},
  };
}

std::pair<double, double> parse_range(const std::string& text, const std::string& flag) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) config_fail(flag + " expects lo:hi, got '" + text + "'");
  try {
    std::size_t used = 0;
    const std::string lo_s = text.substr(0, colon);
    const std::string hi_s = text.substr(colon + 1);
    const double lo = std::stod(lo_s, &used);
    if (used != lo_s.size()) throw std::invalid_argument(lo_s);
    const double hi = std::stod(hi_s, &used);
    if (used != hi_s.size()) throw std::invalid_argument(hi_s);
    return {lo, hi};
  } catch (const std::exception&) {
    config_fail(flag + " expects numeric lo:hi, got '" + text + "'");
  }
}

std::vector<long long> parse_list(const std::string& text, const std::string& flag) {
  std::vector<long long> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoll(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      config_fail(flag + " expects a comma separated integer list, got '" + text + "'");
    }
  }
  if (out.empty()) config_fail(flag + " is empty");
  return out;
}

json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) cpgp::detail::fail(cpgp::ErrorCode::io_error, "cannot open config " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    config_fail("config " + path + " is not valid JSON: " + e.what());
  }
  if (j.is_object() && j.contains("config") && j["config"].is_object()) j = j["config"];
  if (!j.is_object()) config_fail("config " + path + " must be a JSON object");
  const json defaults = default_config();
  for (const auto& [key, value] : j.items()) {
    if (!defaults.contains(key)) config_fail("unknown config key '" + key + "'");
  }
  return j;
}

template <class T>
T get(const json& cfg, const char* key) {
  try {
    return cfg.at(key).get<T>();
  } catch (const json::exception&) {
    config_fail(std::string("config key '") + key + "' has the wrong type");
  }
}

std::size_t get_count(const json& cfg, const char* key, long long min_value = 1) {
  const auto v = get<long long>(cfg, key);
  if (v < min_value) {
    config_fail(std::string(key) + " must be >= " + std::to_string(min_value));
  }
  return static_cast<std::size_t>(v);
}

cpgp::Range get_range(const json& cfg, const char* key) {
  const auto v = get<std::vector<double>>(cfg, key);
  if (v.size() != 2) config_fail(std::string(key) + " must be [lo, hi]");
  return {v[0], v[1]};
}

cpgp::Variant get_variant(const json& cfg) {
  const auto v = get<std::string>(cfg, "variant");
  if (v == "cpgp") return cpgp::Variant::cpgp;
  if (v == "acpgp") return cpgp::Variant::acpgp;
  config_fail("variant must be cpgp or acpgp, got '" + v + "'");
}

cpgp::RegressionBasis get_basis(const json& cfg) {
  const auto b = get<std::string>(cfg, "basis");
  if (b == "constant") return cpgp::RegressionBasis::constant();
  if (b == "none") return cpgp::RegressionBasis::zero_mean();
  if (b == "linear") return cpgp::RegressionBasis::linear();
  config_fail("basis must be constant, none or linear, got '" + b + "'");
}

cpgp::SearchConfig search_config(const json& cfg) {
  cpgp::SearchConfig sc;
  sc.p_max = get_count(cfg, "pmax");
  sc.d = get_count(cfg, "d");
  sc.d_star = get_count(cfg, "dstar");
  sc.theta_range = get_range(cfg, "theta_range");
  sc.delta_range = get_range(cfg, "delta_range");
  sc.workers = static_cast<unsigned>(get_count(cfg, "workers"));
  sc.rng_seed = get<unsigned long long>(cfg, "seed");
  sc.validate();
  return sc;
}

fs::path output_dir(const json& cfg) {
  fs::path dir = get<std::string>(cfg, "output_dir");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) cpgp::detail::fail(cpgp::ErrorCode::io_error, "cannot create " + dir.string());
  return dir;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) cpgp::detail::fail(cpgp::ErrorCode::io_error, "cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) cpgp::detail::fail(cpgp::ErrorCode::io_error, "failed writing " + path.string());
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) cpgp::detail::fail(cpgp::ErrorCode::io_error, "cannot write " + path.string());
  out.precision(17);
  return out;
}

// fs from the flag or config, else from a JSON sidecar next to the input:
// data.csv -> data.json, falling back to data.csv.json.
double resolve_fs(const json& cfg, const std::string& input) {
  if (!cfg.at("fs").is_null()) {
    const auto v = get<double>(cfg, "fs");
    if (!(v > 0.0) || !std::isfinite(v)) config_fail("fs must be positive");
    return v;
  }
  for (fs::path side : {fs::path(input).replace_extension(".json"), fs::path(input + ".json")}) {
    std::ifstream in(side);
    if (!in) continue;
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      config_fail("sidecar " + side.string() + " is not valid JSON: " + e.what());
    }
    if (!j.is_object() || !j.contains("fs") || !j["fs"].is_number()) {
      config_fail("sidecar " + side.string() + " lacks a numeric \"fs\"");
    }
    const double v = j["fs"].get<double>();
    if (!(v > 0.0)) config_fail("sidecar fs must be positive");
    return v;
  }
  config_fail("no sampling frequency: pass --fs or provide a {\"fs\": ...} sidecar for " + input);
}

cpgp::Signal load_input(const json& cfg) {
  const auto input = get<std::string>(cfg, "input");
  if (input.empty()) config_fail("--input is required");
  const double fs_value = resolve_fs(cfg, input);
  return cpgp::read_signal_csv(input, fs_value);
}

json manifest(const std::string& command, const json& cfg) {
  return {{"command", command}, {"config", cfg}};
}

// ---------------------------------------------------------------- commands

int cmd_simulate(json cfg) {
  cpgp::SyntheticSpec spec;
  spec.zeta = get<double>(cfg, "zeta");
  spec.omega = get<double>(cfg, "omega");
  spec.period = get<double>(cfg, "period");
  spec.length = get<double>(cfg, "length");
  spec.fs = cfg.at("fs").is_null() ? 1.0 : get<double>(cfg, "fs");
  cfg["fs"] = spec.fs;
  spec.validate();

  cpgp::NoiseSpec noise;
  noise.seed = get<unsigned long long>(cfg, "seed");
  noise.snr_db = cfg.at("snr_db").is_null() ? std::numeric_limits<double>::infinity()
                                            : get<double>(cfg, "snr_db");

  const cpgp::Signal clean = cpgp::synthesize(spec);
  const cpgp::Signal noisy = cpgp::add_noise(clean, noise);
  const fs::path dir = output_dir(cfg);
  cpgp::write_signal_csv((dir / "clean.csv").string(), clean);
  cpgp::write_signal_csv((dir / "noisy.csv").string(), noisy);
  write_json(dir / "clean.json", {{"fs", spec.fs}});
  write_json(dir / "noisy.json", {{"fs", spec.fs}});

  std::vector<double> e(noisy.size());
  for (std::size_t i = 0; i < e.size(); ++i) e[i] = noisy[i] - clean[i];
  json m = manifest("simulate", cfg);
  m["n"] = clean.size();
  m["measured_snr_db"] = std::isfinite(noise.snr_db)
                             ? json(cpgp::measured_snr_db(clean.values(), e))
                             : json(nullptr);
  write_json(dir / "manifest.json", m);
  std::cout << m.dump() << '\n';
  return kOk;
}

int cmd_fit(const json& cfg) {
  const cpgp::Signal signal = load_input(cfg);
  const cpgp::SearchConfig sc = search_config(cfg);
  const cpgp::Variant variant = get_variant(cfg);
  const cpgp::FitResult r = cpgp::fit(signal, sc, get_basis(cfg), variant);

  const fs::path dir = output_dir(cfg);
  json trace = json::array();
  for (const auto& h : r.hyper_trace) {
    trace.push_back({{"theta", h.theta}, {"delta", h.delta},
                     {"objective", std::isfinite(h.objective) ? json(h.objective) : json(nullptr)},
                     {"best_p", h.best_p}, {"improved", h.improved}});
  }
  json out = {
      {"variant", cpgp::to_string(r.variant)},
      {"theta_hat", r.theta_hat},
      {"delta_hat", r.delta_hat},
      {"p_hat", r.p_hat},
      {"d", r.d},
      {"p_reduced", r.p_reduced},
      {"d_reduced", r.d_reduced},
      {"fs", r.fs},
      {"period_hat", r.period_hat},
      {"beta_hat", std::vector<double>(r.beta_hat.data(), r.beta_hat.data() + r.beta_hat.size())},
      {"sigma2_hat", r.sigma2_hat},
      {"loglik", r.loglik},
      {"n", signal.size()},
      {"hyper_trace", trace},
  };
  write_json(dir / "fit.json", out);
  auto csv = open_out(dir / "scan_trace.csv");
  csv << "p,loglik\n";
  for (const auto& [p, ll] : r.scan_trace) csv << p << ',' << ll << '\n';
  write_json(dir / "manifest.json", manifest("fit", cfg));
  out.erase("hyper_trace");
  std::cout << out.dump() << '\n';
  return kOk;
}

double required_double(const json& cfg, const char* key, const char* flag) {
  if (cfg.at(key).is_null()) config_fail(std::string(flag) + " is required");
  return get<double>(cfg, key);
}

int cmd_scan(const json& cfg) {
  const cpgp::Signal signal = load_input(cfg);
  const double theta = required_double(cfg, "theta", "--theta");
  const double delta = required_double(cfg, "delta", "--delta");
  const std::size_t d = get_count(cfg, "d");
  const std::size_t pmax = get_count(cfg, "pmax");
  const cpgp::Variant variant = get_variant(cfg);
  const cpgp::RegressionBasis basis = get_basis(cfg);
  const unsigned workers = static_cast<unsigned>(get_count(cfg, "workers"));
  const std::size_t count = d * pmax;

  const std::vector<double> ll =
      cpgp::scan_periods(signal, theta, delta, d, count, basis, variant, workers);
  // Segment-only likelihood of the kp segmented samples and its per-sample
  // normalization, for contrast with the full likelihood.
  std::vector<double> l1(count, -std::numeric_limits<double>::infinity());
  for (std::size_t p = 1; p <= std::min(count, signal.size()); ++p) {
    try {
      l1[p - 1] = cpgp::acpgp_loglik(signal, theta, delta, p, d, basis).l1;
    } catch (const cpgp::Error& e) {
      if (e.code() == cpgp::ErrorCode::invalid_argument) throw;
    }
  }

  const fs::path dir = output_dir(cfg);
  auto csv = open_out(dir / "scan.csv");
  csv << "p,loglik,l1,l1_normalized\n";
  const cpgp::ScanBest best = cpgp::argmax_period(ll);
  for (std::size_t p = 1; p <= count; ++p) {
    const std::size_t k = signal.size() / p;
    const double norm = k > 0 ? l1[p - 1] / static_cast<double>(k * p)
                              : -std::numeric_limits<double>::infinity();
    csv << p << ',' << ll[p - 1] << ',' << l1[p - 1] << ',' << norm << '\n';
  }
  write_json(dir / "manifest.json", manifest("scan", cfg));
  std::cout << json{{"best_p", best.p}, {"loglik", best.loglik}}.dump() << '\n';
  return kOk;
}

int cmd_predict(json cfg) {
  const cpgp::Signal signal = load_input(cfg);
  const auto fit_path = get<std::string>(cfg, "fit");
  if (!fit_path.empty()) {
    std::ifstream in(fit_path);
    if (!in) cpgp::detail::fail(cpgp::ErrorCode::io_error, "cannot open " + fit_path);
    json f;
    try {
      in >> f;
      if (cfg["theta"].is_null()) cfg["theta"] = f.at("theta_hat");
      if (cfg["delta"].is_null()) cfg["delta"] = f.at("delta_hat");
      if (cfg["p"].is_null()) cfg["p"] = f.at("p_hat");
      cfg["d"] = f.at("d");
    } catch (const json::exception& e) {
      config_fail("fit file " + fit_path + " is malformed: " + e.what());
    }
  }
  const double theta = required_double(cfg, "theta", "--theta");
  const double delta = required_double(cfg, "delta", "--delta");
  if (cfg.at("p").is_null()) config_fail("--p or --fit is required");
  const std::size_t p = get_count(cfg, "p");
  const std::size_t d = get_count(cfg, "d");

  const cpgp::PredictorState state =
      cpgp::PredictorState::build(signal, theta, delta, p, d, get_basis(cfg));

  std::vector<double> grid;
  const auto spec = get<std::string>(cfg, "grid");
  if (spec == "training") {
    grid = cpgp::training_grid(signal);
  } else {
    // start:stop:count, evenly spaced and inclusive.
    std::stringstream ss(spec);
    std::string a, b, c;
    if (!std::getline(ss, a, ':') || !std::getline(ss, b, ':') || !std::getline(ss, c)) {
      config_fail("--grid expects 'training' or start:stop:count");
    }
    double t0, t1;
    long long count;
    try {
      t0 = std::stod(a);
      t1 = std::stod(b);
      count = std::stoll(c);
    } catch (const std::exception&) {
      config_fail("--grid expects numeric start:stop:count");
    }
    if (count < 1 || !(t1 >= t0)) config_fail("--grid needs count >= 1 and stop >= start");
    grid.resize(static_cast<std::size_t>(count));
    for (long long i = 0; i < count; ++i) {
      grid[static_cast<std::size_t>(i)] =
          count == 1 ? t0 : t0 + (t1 - t0) * static_cast<double>(i) / static_cast<double>(count - 1);
    }
  }

  const std::vector<cpgp::Prediction> pred = cpgp::denoise(state, grid);
  const fs::path dir = output_dir(cfg);
  auto csv = open_out(dir / "prediction.csv");
  csv << "t,y_hat,variance\n";
  for (std::size_t i = 0; i < grid.size(); ++i) {
    csv << grid[i] << ',' << pred[i].y_hat << ',' << pred[i].variance << '\n';
  }
  write_json(dir / "manifest.json", manifest("predict", cfg));
  std::cout << json{{"points", grid.size()}, {"period", state.period()}}.dump() << '\n';
  return kOk;
}

int cmd_bench(const json& cfg) {
  const auto n_list = get<std::vector<long long>>(cfg, "n_list");
  const auto p_list = get<std::vector<long long>>(cfg, "p_list");
  const std::size_t reps = get_count(cfg, "reps", 20);
  const auto seed = get<unsigned long long>(cfg, "seed");
  const double theta = cfg.at("theta").is_null() ? 15.0 : get<double>(cfg, "theta");
  const double delta = cfg.at("delta").is_null() ? 10.0 : get<double>(cfg, "delta");
  const cpgp::RegressionBasis basis = get_basis(cfg);
  for (long long v : n_list) if (v < 2) config_fail("n values must be >= 2");
  for (long long v : p_list) if (v < 1) config_fail("p values must be >= 1");

  const fs::path dir = output_dir(cfg);
  auto csv = open_out(dir / "bench.csv");
  csv << "n,p,mean_eval_seconds,median_eval_seconds\n";
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  json rows = json::array();
  for (long long n : n_list) {
    std::vector<double> y(static_cast<std::size_t>(n));
    for (double& v : y) v = normal(rng);
    const cpgp::Signal signal(std::move(y), 1.0);
    for (long long p : p_list) {
      const auto pp = static_cast<std::size_t>(p);
      volatile double sink = cpgp::profile_loglik(signal, theta, delta, pp, 1, basis).loglik;
      std::vector<double> times(reps);
      for (auto& t : times) {
        const auto start = std::chrono::steady_clock::now();
        sink = cpgp::profile_loglik(signal, theta, delta, pp, 1, basis).loglik;
        t = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      }
      (void)sink;
      const double mean = std::accumulate(times.begin(), times.end(), 0.0) / static_cast<double>(reps);
      std::sort(times.begin(), times.end());
      const double median = reps % 2 ? times[reps / 2] : 0.5 * (times[reps / 2 - 1] + times[reps / 2]);
      csv << n << ',' << p << ',' << mean << ',' << median << '\n';
      rows.push_back({{"n", n}, {"p", p}, {"mean_eval_seconds", mean}, {"median_eval_seconds", median}});
    }
  }
  write_json(dir / "manifest.json", manifest("bench", cfg));
  std::cout << rows.dump() << '\n';
  return kOk;
}

int cmd_oracle_check(const json& cfg) {
  cpgp::oracle::SuiteOptions opt;
  opt.likelihood_instances = get_count(cfg, "instances");
  opt.blup_instances = get_count(cfg, "blup_instances");
  opt.decomposition_instances = std::min<std::size_t>(50, opt.likelihood_instances);
  opt.seed = get<unsigned long long>(cfg, "seed");
  opt.corrupt = get<bool>(cfg, "corrupt");

  bool all = true;
  json suites = json::array();
  for (const auto& r : cpgp::oracle::run_all_suites(opt)) {
    all = all && r.passed();
    suites.push_back({{"suite", r.name}, {"passed", r.passed()}, {"instances", r.instances},
                      {"failures", r.failures}, {"max_error", r.max_error},
                      {"worst_instance", r.worst_instance}, {"first_failure", r.first_failure}});
  }
  const json report = {{"passed", all}, {"seed", opt.seed}, {"corrupt", opt.corrupt},
                       {"suites", suites}};
  const fs::path dir = output_dir(cfg);
  write_json(dir / "oracle_check.json", report);
  std::cout << report.dump(2) << '\n';
  if (!all) {
    return report_error(cpgp::to_string(cpgp::ErrorCode::numerical_failure),
                        "oracle equivalence check failed", kNumerical);
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Period estimation with circulant periodic Gaussian processes"};
  app.require_subcommand(1);

  // Raw flag text; converted into the JSON config after parsing so that only
  // flags given explicitly override the --config file.
  std::map<std::string, std::string> raw;
  std::string config_path;

  struct Flag {
    const char* name;
    const char* key;
    const char* help;
  };
  const std::vector<Flag> common = {
      {"--input", "input", "input CSV, one value per line"},
      {"--fs", "fs", "sampling frequency (Hz)"},
      {"--pmax", "pmax", "largest candidate period in samples"},
      {"--d", "d", "period resolution divisor d"},
      {"--dstar", "dstar", "coarse divisor d* used while tuning"},
      {"--theta-range", "theta_range", "theta search box lo:hi"},
      {"--delta-range", "delta_range", "delta search box lo:hi"},
      {"--variant", "variant", "cpgp or acpgp"},
      {"--seed", "seed", "random seed"},
      {"--workers", "workers", "threads for period scans"},
      {"--output-dir", "output_dir", "directory for outputs"},
      {"--basis", "basis", "mean model: constant, none, linear"},
  };
  const std::map<std::string, std::vector<Flag>> extra = {
      {"simulate",
       {{"--zeta", "zeta", "damping ratio"},
        {"--omega", "omega", "natural frequency (Hz)"},
        {"--period", "period", "period T0 (s)"},
        {"--length", "length", "record length (s)"},
        {"--snr", "snr_db", "SNR in dB, or 'inf' for no noise"}}},
      {"fit", {}},
      {"scan", {{"--theta", "theta", "fixed theta"}, {"--delta", "delta", "fixed delta"}}},
      {"predict",
       {{"--theta", "theta", "theta"},
        {"--delta", "delta", "delta"},
        {"--p", "p", "period in samples"},
        {"--fit", "fit", "fit.json supplying theta, delta, p and d"},
        {"--grid", "grid", "'training' or start:stop:count"}}},
      {"bench",
       {{"--n", "n_list", "comma separated signal lengths"},
        {"--p", "p_list", "comma separated periods"},
        {"--reps", "reps", "timed repetitions (>= 20)"},
        {"--theta", "theta", "theta"},
        {"--delta", "delta", "delta"}}},
      {"oracle-check",
       {{"--instances", "instances", "randomized likelihood instances"},
        {"--blup-instances", "blup_instances", "randomized BLUP instances"}}},
  };
  const std::map<std::string, std::string> descriptions = {
      {"simulate", "synthesize periodic transients with white noise"},
      {"fit", "estimate theta, delta and the period"},
      {"scan", "log-likelihood over p at fixed theta and delta"},
      {"predict", "BLUP and variance on a time grid"},
      {"bench", "time profile likelihood evaluations"},
      {"oracle-check", "compare fast paths against the dense model"},
  };

  std::map<std::string, std::string> flag_of;
  for (const auto& f : common) flag_of[f.key] = f.name;
  for (const auto& [name, flags] : extra) {
    for (const auto& f : flags) flag_of[f.key] = f.name;
  }

  bool corrupt = false;
  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, flags] : extra) {
    CLI::App* sub = app.add_subcommand(name, descriptions.at(name));
    sub->add_option("--config", config_path, "JSON config; flags override it");
    for (const auto& f : common) sub->add_option(f.name, raw[f.key], f.help);
    for (const auto& f : flags) sub->add_option(f.name, raw[f.key], f.help);
    if (name == "oracle-check") {
      sub->add_flag("--corrupt", corrupt, "negative control with a corrupted kernel");
    }
    subs[name] = sub;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("config_error", e.what(), kConfig);
  }

  std::string command;
  for (const auto& [name, sub] : subs) {
    if (sub->parsed()) command = name;
  }

  try {
    json cfg = default_config();
    if (!config_path.empty()) cfg.update(load_config_file(config_path));

    const auto set = [&](const std::string& key) {
      const auto it = raw.find(key);
      return it != raw.end() && !it->second.empty();
    };
    for (const auto& [key, text] : raw) {
      if (!set(key)) continue;
      const std::string flag = flag_of.at(key);
      if (key == "theta_range" || key == "delta_range") {
        const auto [lo, hi] = parse_range(text, flag);
        cfg[key] = {lo, hi};
      } else if (key == "n_list" || key == "p_list") {
        cfg[key] = parse_list(text, flag);
      } else if (key == "input" || key == "variant" || key == "output_dir" || key == "basis" ||
                 key == "fit" || key == "grid") {
        cfg[key] = text;
      } else if (key == "snr_db" && (text == "inf" || text == "+inf")) {
        cfg[key] = nullptr;
      } else {
        try {
          std::size_t used = 0;
          const double v = std::stod(text, &used);
          if (used != text.size()) throw std::invalid_argument(text);
          if (key == "fs" || key == "zeta" || key == "omega" || key == "period" ||
              key == "length" || key == "snr_db" || key == "theta" || key == "delta") {
            cfg[key] = v;
          } else {
            if (v != std::floor(v)) throw std::invalid_argument(text);
            cfg[key] = static_cast<long long>(v);
          }
        } catch (const std::exception&) {
          config_fail("invalid value '" + text + "' for " + flag);
        }
      }
    }
    if (corrupt) cfg["corrupt"] = true;

    if (command == "simulate") return cmd_simulate(cfg);
    if (command == "fit") return cmd_fit(cfg);
    if (command == "scan") return cmd_scan(cfg);
    if (command == "predict") return cmd_predict(cfg);
    if (command == "bench") return cmd_bench(cfg);
    return cmd_oracle_check(cfg);
  } catch (const cpgp::Error& e) {
    return report_error(cpgp::to_string(e.code()), e.what(), exit_code_for(e.code()));
  } catch (const std::bad_alloc&) {
    return report_error("numerical_failure", "out of memory", kNumerical);
  } catch (const std::exception& e) {
    return report_error("numerical_failure", e.what(), kNumerical);
  }
}
