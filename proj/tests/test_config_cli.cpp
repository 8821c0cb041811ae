#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <spikeslab/cli.hpp>
#include <spikeslab/config.hpp>

#include "helpers.hpp"

using namespace spikeslab;
using namespace spikeslab::testing;
using nlohmann::json;
namespace fs = std::filesystem;
using Catch::Matchers::ContainsSubstring;

namespace {

const fs::path& artifact_dir() {
  static const fs::path dir = [] {
    fs::path p = fs::temp_directory_path() / "spikeslab_cli_tests";
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return dir;
}

std::string path_in(const std::string& name) {
  return (artifact_dir() / name).string();
}

std::string write_config(const std::string& name, const json& j) {
  const std::string p = path_in(name);
  std::ofstream out(p);
  out << j.dump(2);
  return p;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return "<missing file: " + path + ">";
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

long count_lines(const std::string& text) {
  long lines = 0;
  for (char c : text)
    if (c == '\n') ++lines;
  return lines;
}

// Runs the CLI in process with stdout (and the stderr notes) captured.
int run_cli(const std::vector<std::string>& args, std::string* out = nullptr) {
  std::ostringstream captured, notes;
  auto* old_out = std::cout.rdbuf(captured.rdbuf());
  auto* old_err = std::cerr.rdbuf(notes.rdbuf());
  int code = -1;
  try {
    code = cli::run(args);
  } catch (...) {
    std::cout.rdbuf(old_out);
    std::cerr.rdbuf(old_err);
    throw;
  }
  std::cout.rdbuf(old_out);
  std::cerr.rdbuf(old_err);
  if (out) *out = captured.str();
  return code;
}

json base_config() {
  return json{
      {"model",
       {{"n", 12},
        {"d", 2},
        {"q", 0.3},
        {"slab", {{"kind", "gaussian"}, {"variance", 1.0}}},
        {"sigma_d", 1.0},
        {"design", {{"kind", "iid_gaussian"}, {"variance", 0.125}}}}},
      {"decomposition", {{"gamma", "auto"}}},
      {"sampler",
       {{"method", "mala"},
        {"tau", 0.2},
        {"total_steps", 400},
        {"burn_in", 300},
        {"thinning", 1},
        {"seed", 42}}},
      {"experiment", {{"repetitions", 2}, {"samples", 200}}}};
}

}  // namespace

TEST_CASE("config parsing rejects unknown keys at every level") {
  auto expect_rejects = [](json j, const std::string& fragment) {
    REQUIRE_THROWS_MATCHES(parse_run_config(j), ConfigError,
                           Catch::Matchers::MessageMatches(
                               ContainsSubstring(fragment)));
  };
  json j = base_config();
  j["bogus"] = 1;
  expect_rejects(j, "bogus");
  j = base_config();
  j["model"]["extra"] = 1;
  expect_rejects(j, "extra");
  j = base_config();
  j["model"]["slab"]["scale"] = 1.0;
  expect_rejects(j, "scale");
  j = base_config();
  j["model"]["design"]["rho"] = 0.5;  // not an iid_gaussian key
  expect_rejects(j, "rho");
  j = base_config();
  j["decomposition"]["grid"] = 10;
  expect_rejects(j, "grid");
  j = base_config();
  j["sampler"]["epsilon"] = 0.1;  // an hmc key on a mala sampler
  expect_rejects(j, "epsilon");
  j = base_config();
  j["experiment"]["alpha"] = 0.05;
  expect_rejects(j, "alpha");
  j = base_config();
  j["region"] = {{"axis1",
                  {{"param", "delta"}, {"min", 1.0}, {"max", 2.0},
                   {"count", 2}, {"step", 0.1}}},
                 {"axis2",
                  {{"param", "sigma0"}, {"min", 1.0}, {"max", 2.0},
                   {"count", 2}}}};
  expect_rejects(j, "step");
}

TEST_CASE("config parsing validates values and shapes") {
  SECTION("noise level is given exactly once") {
    json j = base_config();
    j["model"]["sigma0"] = 0.5;
    REQUIRE_THROWS_AS(parse_run_config(j), ConfigError);
    j["model"].erase("sigma_d");
    const RunConfig cfg = parse_run_config(j);
    REQUIRE(effective_sigma_d(cfg.model) == 0.5 * std::sqrt(2.0));
    ModelSection no_noise;
    no_noise.d = 4;
    REQUIRE_THROWS_AS(effective_sigma_d(no_noise), ConfigError);
    ModelSection no_dim;
    no_dim.sigma0 = 1.0;
    REQUIRE_THROWS_AS(effective_sigma_d(no_dim), ConfigError);
  }

  SECTION("slab and design kinds") {
    json j = base_config();
    j["model"]["slab"] = {{"kind", "cauchy"}, {"variance", 1.0}};
    REQUIRE_THROWS_AS(parse_run_config(j), ConfigError);
    j["model"]["slab"] = {{"kind", "gaussian"}};
    REQUIRE_THROWS_AS(parse_run_config(j), ConfigError);
    j["model"]["slab"] = {{"kind", "laplace"}};
    REQUIRE_THROWS_AS(parse_run_config(j), ConfigError);
    j = base_config();
    j["model"]["design"] = {{"kind", "toeplitz"}};
    REQUIRE_THROWS_AS(parse_run_config(j), ConfigError);
    j["model"]["design"] = {{"kind", "correlated_gaussian"}, {"rho", 0.4}};
    const RunConfig cfg = parse_run_config(j);
    REQUIRE(std::get<CorrelatedGaussian>(*cfg.model.design).rho == 0.4);
  }

  SECTION("gamma policy forms") {
    json j = base_config();
    j["decomposition"]["gamma"] = 3.5;
    REQUIRE(std::get<double>(parse_run_config(j).gamma) == 3.5);
    j["decomposition"]["gamma"] = "auto";
    REQUIRE(std::holds_alternative<AutoGamma>(parse_run_config(j).gamma));
    j["decomposition"]["gamma"] = "midpoint";
    REQUIRE_THROWS_AS(parse_run_config(j), ConfigError);
    j["decomposition"]["gamma"] = true;
    REQUIRE_THROWS_AS(parse_run_config(j), ConfigError);
  }

  SECTION("sampler section") {
    json j = base_config();
    j["sampler"]["method"] = "nuts";
    REQUIRE_THROWS_AS(parse_run_config(j), ConfigError);
    j = base_config();
    j["sampler"]["rejection_policy"] = "retry_until_accept";
    REQUIRE(parse_run_config(j).chain.rejection_policy ==
            RejectionPolicy::RetryUntilAccept);
    j["sampler"]["rejection_policy"] = "bounce";
    REQUIRE_THROWS_AS(parse_run_config(j), ConfigError);
    j = base_config();
    j["sampler"]["seed"] = -3;
    REQUIRE_THROWS_AS(parse_run_config(j), ConfigError);
    j = base_config();
    j["sampler"]["seed"] = 2.5;
    REQUIRE_THROWS_AS(parse_run_config(j), ConfigError);
    j = base_config();
    j["sampler"]["burn_in"] = "lots";
    REQUIRE_THROWS_AS(parse_run_config(j), ConfigError);
    j = base_config();
    j["sampler"] = {{"method", "hmc"}, {"epsilon", 0.3}, {"leapfrog_steps", 7}};
    const auto& hmc = std::get<HmcParams>(parse_run_config(j).chain.method);
    REQUIRE(hmc.epsilon == 0.3);
    REQUIRE(hmc.leapfrog_steps == 7);
  }

  SECTION("region axes") {
    json j = base_config();
    j["region"] = {{"axis1",
                    {{"param", "bandwidth"}, {"min", 1.0}, {"max", 2.0},
                     {"count", 2}}},
                   {"axis2",
                    {{"param", "sigma0"}, {"min", 1.0}, {"max", 2.0},
                     {"count", 2}}}};
    REQUIRE_THROWS_AS(parse_run_config(j), ConfigError);
    j["region"]["axis1"]["param"] = "delta";
    j["region"]["axis1"].erase("count");
    REQUIRE_THROWS_AS(parse_run_config(j), ConfigError);
    j["region"]["axis1"]["count"] = 2;
    REQUIRE(parse_run_config(j).region.present);
  }

  SECTION("file loading") {
    REQUIRE_THROWS_AS(load_run_config(path_in("does_not_exist.json")),
                      ConfigError);
    const std::string broken = path_in("broken.json");
    std::ofstream(broken) << "{ not json";
    REQUIRE_THROWS_AS(load_run_config(broken), ConfigError);
  }
}

TEST_CASE("config serialization round-trips") {
  json j = base_config();
  j["region"] = {{"axis1",
                  {{"param", "delta"}, {"min", 0.5}, {"max", 50.0},
                   {"count", 4}, {"log", true}}},
                 {"axis2",
                  {{"param", "sigma0"}, {"min", 0.2}, {"max", 5.0},
                   {"count", 4}, {"log", true}}},
                 {"q", 0.25}};
  j["experiment"] =
      {{"repetitions", 7}, {"samples", 55}, {"level", 0.9},
       {"force_run", true}, {"misspecified", true}};
  const RunConfig cfg = parse_run_config(j);
  const json echoed = to_json(cfg);
  REQUIRE(to_json(parse_run_config(echoed)) == echoed);

  json h = base_config();
  h["sampler"] = {{"method", "hmc"}, {"epsilon", 0.25}, {"leapfrog_steps", 9},
                  {"seed", 5}, {"rejection_policy", "retry_until_accept"}};
  h["decomposition"]["gamma"] = 4.25;
  const json echoed_hmc = to_json(parse_run_config(h));
  REQUIRE(to_json(parse_run_config(echoed_hmc)) == echoed_hmc);
  REQUIRE(echoed_hmc["decomposition"]["gamma"] == 4.25);
}

TEST_CASE("misspecified counterpart matches variances across families") {
  const SlabFamily from_gaussian =
      misspecified_counterpart(make_slab(GaussianSlab{2.0}));
  REQUIRE(std::get<LaplaceSlab>(from_gaussian).rate == 1.0);
  const SlabFamily from_laplace =
      misspecified_counterpart(make_slab(LaplaceSlab{0.5}));
  REQUIRE(std::get<GaussianSlab>(from_laplace).variance == 8.0);
  const SlabFamily back = misspecified_counterpart(from_gaussian);
  REQUIRE(std::get<GaussianSlab>(back).variance == Catch::Approx(2.0));
  REQUIRE(slab_variance(std::get<LaplaceSlab>(from_gaussian)) ==
          Catch::Approx(2.0));
  REQUIRE_THROWS_AS(misspecified_counterpart(make_slab(logistic_slab())),
                    ValidationError);
}

TEST_CASE("cli feasibility prints a verdict and exits accordingly") {
  const std::string cfg = write_config("feas.json", base_config());
  std::string out;
  REQUIRE(run_cli({"--quiet", "feasibility", "--config", cfg}, &out) == 0);
  const json verdict = json::parse(out);
  REQUIRE(verdict.at("feasible").get<bool>());
  REQUIRE(verdict.at("gamma_star").get<double>() >
          verdict.at("lambda_max").get<double>());

  const std::string out_path = path_in("feas_report.json");
  REQUIRE(run_cli({"--quiet", "feasibility", "--config", cfg, "--out",
                   out_path}, &out) == 0);
  REQUIRE(read_file(out_path) == out);

  json bad = base_config();
  bad["model"]["n"] = 5;
  bad["model"]["d"] = 20;
  bad["model"]["q"] = 0.2;
  bad["model"]["design"]["variance"] = 1.0;
  const std::string bad_cfg = write_config("feas_bad.json", bad);
  REQUIRE(run_cli({"--quiet", "feasibility", "--config", bad_cfg}, &out) == 3);
  REQUIRE_FALSE(json::parse(out).at("feasible").get<bool>());
}

TEST_CASE("cli exit codes distinguish usage, config and runtime errors") {
  REQUIRE(run_cli({"--bogus"}) == 1);
  REQUIRE(run_cli({}) == 1);
  const std::string cfg = write_config("codes.json", base_config());
  REQUIRE(run_cli({"--quiet", "sample", "--config", cfg}) == 1);  // --out required
  REQUIRE(run_cli({"--quiet", "sample", "--config", path_in("nope.json"),
                   "--out", path_in("x.csv")}) == 2);
  json unknown = base_config();
  unknown["typo"] = 1;
  const std::string unknown_cfg = write_config("codes_unknown.json", unknown);
  REQUIRE(run_cli({"--quiet", "sample", "--config", unknown_cfg, "--out",
                   path_in("x.csv")}) == 2);
  json no_noise = base_config();
  no_noise["model"].erase("sigma_d");
  const std::string no_noise_cfg = write_config("codes_nonoise.json", no_noise);
  REQUIRE(run_cli({"--quiet", "feasibility", "--config", no_noise_cfg}) == 2);
  REQUIRE(run_cli({"--quiet", "region", "--config", cfg, "--out",
                   path_in("r.csv")}) == 2);  // no region section

  // An infeasible instance fails the coverage gate at runtime.
  json infeasible = base_config();
  infeasible["model"]["n"] = 5;
  infeasible["model"]["d"] = 20;
  infeasible["model"]["q"] = 0.2;
  infeasible["model"]["design"]["variance"] = 1.0;
  infeasible["experiment"] = {{"repetitions", 1}, {"samples", 50}};
  infeasible["sampler"]["burn_in"] = 50;
  const std::string infeasible_cfg =
      write_config("codes_infeasible.json", infeasible);
  REQUIRE(run_cli({"--quiet", "coverage", "--config", infeasible_cfg, "--out",
                   path_in("c.csv")}) == 4);
}

TEST_CASE("cli sample emits a csv, a sidecar, and reproduces from it") {
  const std::string cfg = write_config("sample.json", base_config());
  const std::string out1 = path_in("draws1.csv");
  REQUIRE(run_cli({"--quiet", "sample", "--config", cfg, "--out", out1}) == 0);
  const std::string csv1 = read_file(out1);
  REQUIRE(count_lines(csv1) == 201);
  REQUIRE(csv1.rfind("theta_0,theta_1\n", 0) == 0);

  const json meta = json::parse(read_file(out1 + ".meta.json"));
  REQUIRE(meta.at("instance").at("n") == 12);
  REQUIRE(meta.at("instance").at("theta_star").size() == 2);
  const double acc = meta.at("result").at("acceptance_rate").get<double>();
  REQUIRE(acc > 0.0);
  REQUIRE(acc <= 1.0);

  // The sidecar config reproduces the run byte for byte.
  const std::string echo_cfg = write_config("sample_echo.json",
                                            meta.at("config"));
  const std::string out2 = path_in("draws2.csv");
  REQUIRE(run_cli({"--quiet", "sample", "--config", echo_cfg, "--out", out2}) ==
          0);
  REQUIRE(read_file(out2) == csv1);

  // A seed override changes the draws and is itself deterministic.
  const std::string out3 = path_in("draws3.csv");
  const std::string out4 = path_in("draws4.csv");
  REQUIRE(run_cli({"--quiet", "--seed", "7", "sample", "--config", cfg,
                   "--out", out3}) == 0);
  REQUIRE(run_cli({"--quiet", "--seed", "7", "sample", "--config", cfg,
                   "--out", out4}) == 0);
  REQUIRE(read_file(out3) == read_file(out4));
  REQUIRE(read_file(out3) != csv1);
}

TEST_CASE("cli oracle writes marginal tables for every coordinate") {
  const std::string cfg = write_config("oracle.json", base_config());
  const std::string out = path_in("oracle.csv");
  REQUIRE(run_cli({"--quiet", "oracle", "--config", cfg, "--out", out}) == 0);
  const std::string csv = read_file(out);
  REQUIRE(csv.rfind("coordinate,t,atom_prob,cdf\n", 0) == 0);
  REQUIRE(count_lines(csv) == 1 + 2 * 401);
  const json meta = json::parse(read_file(out + ".meta.json"));
  REQUIRE(meta.at("patterns") == 4);
  REQUIRE(std::isfinite(meta.at("log_evidence").get<double>()));
}

TEST_CASE("cli coverage output is identical across worker counts") {
  const std::string cfg = write_config("coverage.json", base_config());
  const std::string out1 = path_in("cov1.csv");
  const std::string out4 = path_in("cov4.csv");
  REQUIRE(run_cli({"--quiet", "--threads", "1", "coverage", "--config", cfg,
                   "--out", out1}) == 0);
  REQUIRE(run_cli({"--quiet", "--threads", "4", "coverage", "--config", cfg,
                   "--out", out4}) == 0);
  REQUIRE(read_file(out1) == read_file(out4));
  const std::string csv = read_file(out1);
  REQUIRE(csv.rfind("repetition,coordinate,covered\n", 0) == 0);
  REQUIRE(count_lines(csv) == 1 + 2 * 2);
  const json meta = json::parse(read_file(out1 + ".meta.json"));
  const double rate = meta.at("result").at("aggregate_rate").get<double>();
  REQUIRE(rate >= 0.0);
  REQUIRE(rate <= 1.0);
}

TEST_CASE("cli diagnose writes trace and autocorrelation files") {
  const std::string cfg = write_config("diagnose.json", base_config());
  const std::string out = path_in("trace.csv");
  REQUIRE(run_cli({"--quiet", "diagnose", "--config", cfg, "--out", out,
                   "--coordinate", "0", "--max-lag", "20"}) == 0);
  const std::string trace = read_file(out);
  REQUIRE(trace.rfind("step,value\n", 0) == 0);
  REQUIRE(count_lines(trace) == 1 + 400);
  const std::string acf = read_file(path_in("trace.acf.csv"));
  REQUIRE(acf.rfind("lag,autocorrelation\n", 0) == 0);
  REQUIRE(count_lines(acf) == 1 + 21);
  const json meta = json::parse(read_file(out + ".meta.json"));
  REQUIRE(meta.at("ess").get<double>() > 0.0);
  REQUIRE_FALSE(meta.at("degenerate").get<bool>());

  REQUIRE(run_cli({"--quiet", "diagnose", "--config", cfg, "--out", out,
                   "--coordinate", "5"}) == 2);
}

TEST_CASE("cli region writes the grid and its boundary") {
  json j = base_config();
  j["region"] = {{"axis1",
                  {{"param", "delta"}, {"min", 0.5}, {"max", 50.0},
                   {"count", 4}, {"log", true}}},
                 {"axis2",
                  {{"param", "sigma0"}, {"min", 0.2}, {"max", 5.0},
                   {"count", 4}, {"log", true}}}};
  const std::string cfg = write_config("region.json", j);
  const std::string out = path_in("region.csv");
  REQUIRE(run_cli({"--quiet", "region", "--config", cfg, "--out", out}) == 0);
  const std::string csv = read_file(out);
  REQUIRE(csv.rfind("axis1,axis2,feasible,gamma_star,margin\n", 0) == 0);
  REQUIRE(count_lines(csv) == 1 + 16);
  const std::string boundary = read_file(path_in("region.boundary.csv"));
  REQUIRE(boundary.rfind("axis1,axis2\n", 0) == 0);
}
