#pragma once

// Command-line front end.  Subcommands: feasibility, region, sample,
// oracle, coverage, diagnose.  All data is synthetic, generated from the
// model section of the JSON config and the master seed, with fixed stream
// labels (theta 1, design 2, response 3, chain 4) shared with the coverage
// harness so a single-instance command sees exactly repetition 0.
//
// Exit codes: 0 success, 1 usage error, 2 config error, 3 infeasible
// verdict (feasibility subcommand only), 4 runtime error.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "spikeslab/config.hpp"
#include "spikeslab/experiments.hpp"
#include "spikeslab/io.hpp"
#include "spikeslab/oracle.hpp"
#include "spikeslab/samplers.hpp"

namespace spikeslab::cli {

namespace detail {

struct GlobalOptions {
  std::uint64_t seed = 0;
  bool seed_given = false;
  int threads = 1;
  bool quiet = false;
};

inline std::ostream& note(const GlobalOptions& opts) {
  static std::ofstream devnull;
  if (opts.quiet) {
    if (!devnull.is_open()) devnull.setstate(std::ios_base::badbit);
    return devnull;
  }
  return std::cerr;
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open output file: " + path);
  out << text;
  if (!out) throw Error("failed writing output file: " + path);
}

template <typename Fn>
void write_csv_file(const std::string& path, Fn&& writer) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open output file: " + path);
  writer(out);
  if (!out) throw Error("failed writing output file: " + path);
}

inline std::string sibling_path(const std::string& out, const std::string& tag) {
  const std::string suffix = ".csv";
  if (out.size() > suffix.size() &&
      out.compare(out.size() - suffix.size(), suffix.size(), suffix) == 0)
    return out.substr(0, out.size() - suffix.size()) + tag + suffix;
  return out + tag + suffix;
}

inline std::uint64_t master_seed(const RunConfig& cfg, const GlobalOptions& opts) {
  return opts.seed_given ? opts.seed : cfg.chain.seed;
}

struct Instance {
  Matrix X;
  Vector y;
  Vector theta_star;
  double sigma_d = 0.0;
  SpikeSlabPrior prior;
};

inline SpikeSlabPrior model_prior(const RunConfig& cfg) {
  if (!cfg.model.q || !cfg.model.slab)
    throw ConfigError("model: requires \"q\" and \"slab\"");
  try {
    return make_prior(*cfg.model.q, *cfg.model.slab);
  } catch (const ValidationError& e) {
    throw ConfigError(e.what());
  }
}

inline DesignSpec model_design(const RunConfig& cfg) {
  if (!cfg.model.design) throw ConfigError("model: requires \"design\"");
  return *cfg.model.design;
}

inline void require_shape(const RunConfig& cfg) {
  if (!cfg.model.n || !cfg.model.d)
    throw ConfigError("model: requires \"n\" and \"d\"");
  if (*cfg.model.n < 1 || *cfg.model.d < 1)
    throw ConfigError("model: n and d must be >= 1");
}

inline Matrix instance_design(const RunConfig& cfg, std::uint64_t master) {
  require_shape(cfg);
  try {
    return generate_design(model_design(cfg), *cfg.model.n, *cfg.model.d,
                           derive_seed(master, 0, 2));
  } catch (const ValidationError& e) {
    throw ConfigError(e.what());
  }
}

inline Instance make_instance(const RunConfig& cfg, std::uint64_t master) {
  require_shape(cfg);
  Instance inst;
  inst.prior = model_prior(cfg);
  try {
    inst.sigma_d = effective_sigma_d(cfg.model);
    inst.theta_star =
        sample_prior(inst.prior, *cfg.model.d, derive_seed(master, 0, 1));
    inst.X = instance_design(cfg, master);
    inst.y = generate_response(inst.X, inst.theta_star, inst.sigma_d,
                               derive_seed(master, 0, 3));
  } catch (const ValidationError& e) {
    throw ConfigError(e.what());
  }
  return inst;
}

inline nlohmann::json effective_config_json(const RunConfig& cfg,
                                            std::uint64_t master) {
  RunConfig echo = cfg;
  echo.chain.seed = master;
  return to_json(echo);
}

inline int cmd_feasibility(const RunConfig& cfg, const GlobalOptions& opts,
                           const std::string& out) {
  const std::uint64_t master = master_seed(cfg, opts);
  const SpikeSlabPrior prior = model_prior(cfg);
  if (!cfg.model.sigma_d && !cfg.model.sigma0)
    throw ConfigError("model: requires \"sigma_d\" or \"sigma0\"");
  const Matrix X = instance_design(cfg, master);
  const FeasibilityReport report =
      empirical_feasibility(X, effective_sigma_d(cfg.model), prior);
  const std::string text = to_json(report).dump(2) + "\n";
  std::cout << text;
  if (!out.empty()) write_text_file(out, text);
  return report.feasible ? 0 : 3;
}

inline RegionParam axis_param(const std::string& name) {
  if (name == "delta") return RegionParam::Delta;
  if (name == "sigma0") return RegionParam::Sigma0;
  return RegionParam::MixingQ;
}

inline int cmd_region(const RunConfig& cfg, const GlobalOptions& opts,
                      const std::string& out) {
  if (!cfg.region.present) throw ConfigError("region subcommand: requires a \"region\" section");
  if (!cfg.model.slab) throw ConfigError("model: requires \"slab\"");
  auto to_axis = [](const AxisConfig& a) {
    return AxisSpec{axis_param(a.param), a.min, a.max, a.count, a.log_scale};
  };
  RegionFixed fixed;
  fixed.slab = *cfg.model.slab;
  fixed.delta = cfg.region.delta;
  fixed.sigma0 = cfg.region.sigma0;
  fixed.q = cfg.region.q ? cfg.region.q : cfg.model.q;
  RegionScan scan;
  try {
    scan = scan_region(to_axis(cfg.region.axis1), to_axis(cfg.region.axis2),
                       fixed, GammaGrid{}, opts.threads);
  } catch (const ValidationError& e) {
    throw ConfigError(e.what());
  }
  write_csv_file(out, [&](std::ostream& os) { write_region_csv(os, scan); });
  write_csv_file(sibling_path(out, ".boundary"),
                 [&](std::ostream& os) { write_boundary_csv(os, scan); });
  long feasible = 0;
  for (const auto& r : scan.reports) feasible += r.feasible ? 1 : 0;
  note(opts) << "region: " << scan.reports.size() << " points, " << feasible
             << " feasible, " << scan.boundary.size()
             << " boundary vertices\n";
  return 0;
}

inline int cmd_sample(const RunConfig& cfg, const GlobalOptions& opts,
                      const std::string& out) {
  const std::uint64_t master = master_seed(cfg, opts);
  const Instance inst = make_instance(cfg, master);
  const Decomposition decomp(inst.X, inst.y, inst.sigma_d, cfg.gamma);
  ChainConfig chain = cfg.chain;
  chain.seed = derive_seed(master, 0, 4);
  const SampleSet draws = two_stage_sample(decomp, inst.prior, chain,
                                           cfg.experiment.samples);
  write_csv_file(out, [&](std::ostream& os) { write_samples_csv(os, draws.thetas); });
  nlohmann::json meta{{"config", effective_config_json(cfg, master)},
                      {"result", to_json(draws)}};
  nlohmann::json truth = nlohmann::json::array();
  for (int i = 0; i < inst.theta_star.size(); ++i)
    truth.push_back(inst.theta_star[i]);
  meta["instance"] = {{"n", inst.X.rows()},
                      {"d", inst.X.cols()},
                      {"sigma_d", inst.sigma_d},
                      {"theta_star", truth}};
  write_text_file(out + ".meta.json", meta.dump(2) + "\n");
  note(opts) << "sample: " << draws.thetas.rows() << " draws, acceptance "
             << draws.acceptance_rate << ", margin " << draws.feasibility_margin
             << (draws.feasible_at_gamma ? "" : " (not feasible at gamma)")
             << "\n";
  return 0;
}

inline int cmd_oracle(const RunConfig& cfg, const GlobalOptions& opts,
                      const std::string& out) {
  const std::uint64_t master = master_seed(cfg, opts);
  const Instance inst = make_instance(cfg, master);
  ExactPosterior post = [&] {
    try {
      return enumerate_exact_posterior(inst.X, inst.y, inst.sigma_d, inst.prior);
    } catch (const ValidationError& e) {
      throw ConfigError(e.what());
    }
  }();
  const double scale = slab_scale(inst.prior.slab);
  constexpr int kGridPoints = 401;
  write_csv_file(out, [&](std::ostream& os) {
    os << "coordinate,t,atom_prob,cdf\n";
    for (int i = 0; i < post.d(); ++i) {
      const MarginalMoments mm = post.marginal_moments(i);
      const double sd = std::sqrt(std::max(mm.variance, 0.0));
      const double hw = std::max(8.0 * sd, 4.0 * scale);
      for (int k = 0; k < kGridPoints; ++k) {
        const double t = mm.mean - hw + 2.0 * hw * k / (kGridPoints - 1);
        const MarginalQuery q = post.marginal_query(i, t);
        os << i << ',' << format_double(t) << ','
           << format_double(q.atom_probability) << ',' << format_double(q.cdf)
           << '\n';
      }
    }
  });
  nlohmann::json meta{{"config", effective_config_json(cfg, master)},
                      {"log_evidence", post.log_evidence()},
                      {"patterns", post.log_weights().size()}};
  write_text_file(out + ".meta.json", meta.dump(2) + "\n");
  note(opts) << "oracle: " << post.d() << " coordinates, "
             << post.log_weights().size() << " patterns\n";
  return 0;
}

inline int cmd_coverage(const RunConfig& cfg, const GlobalOptions& opts,
                        const std::string& out) {
  const std::uint64_t master = master_seed(cfg, opts);
  require_shape(cfg);
  CoverageSetting setting;
  setting.n = *cfg.model.n;
  setting.d = *cfg.model.d;
  setting.prior = model_prior(cfg);
  if (cfg.experiment.misspecified)
    setting.assumed_slab = misspecified_counterpart(setting.prior.slab);
  setting.design = model_design(cfg);
  setting.sigma_d = effective_sigma_d(cfg.model);
  setting.gamma = cfg.gamma;
  setting.chain = cfg.chain;
  setting.level = cfg.experiment.level;
  setting.force_run = cfg.experiment.force_run;
  const CoverageResult result =
      coverage_experiment(setting, cfg.experiment.repetitions,
                          cfg.experiment.samples, master, opts.threads);
  write_csv_file(out, [&](std::ostream& os) { write_coverage_csv(os, result); });
  nlohmann::json meta{{"config", effective_config_json(cfg, master)},
                      {"result", to_json(result)}};
  write_text_file(out + ".meta.json", meta.dump(2) + "\n");
  note(opts) << "coverage: aggregate " << result.aggregate_rate << " over "
             << (result.repetitions - result.failed_repetitions)
             << " repetitions (" << result.failed_repetitions << " failed)\n";
  return 0;
}

inline int cmd_diagnose(const RunConfig& cfg, const GlobalOptions& opts,
                        const std::string& out, int coordinate, int max_lag) {
  const std::uint64_t master = master_seed(cfg, opts);
  const Instance inst = make_instance(cfg, master);
  const Decomposition decomp(inst.X, inst.y, inst.sigma_d, cfg.gamma);
  ChainConfig chain = cfg.chain;
  chain.seed = derive_seed(master, 0, 4);
  const ChainResult result = std::holds_alternative<MalaParams>(chain.method)
                                 ? run_mala(decomp, inst.prior, chain)
                                 : run_hmc(decomp, inst.prior, chain);
  DiagnosticsBundle bundle;
  try {
    bundle = chain_diagnostics(result, coordinate, max_lag);
  } catch (const ValidationError& e) {
    throw ConfigError(e.what());
  }
  write_csv_file(out, [&](std::ostream& os) { write_trace_csv(os, bundle); });
  write_csv_file(sibling_path(out, ".acf"),
                 [&](std::ostream& os) { write_acf_csv(os, bundle); });
  nlohmann::json meta{{"config", effective_config_json(cfg, master)},
                      {"coordinate", coordinate},
                      {"acceptance_rate", bundle.acceptance_rate},
                      {"ess", bundle.ess},
                      {"degenerate", bundle.degenerate}};
  write_text_file(out + ".meta.json", meta.dump(2) + "\n");
  note(opts) << "diagnose: coordinate " << coordinate << ", acceptance "
             << bundle.acceptance_rate << ", ess " << bundle.ess << "\n";
  return 0;
}

}  // namespace detail

// Parses arguments (program name excluded) and runs one subcommand.
// Exposed as a function so tests can drive the CLI in process.
inline int run(const std::vector<std::string>& args) {
  CLI::App app{"spike-and-slab posterior sampler"};
  app.require_subcommand(1);
  app.fallthrough();

  detail::GlobalOptions opts;
  auto* seed_opt =
      app.add_option("--seed", opts.seed, "override the sampler seed");
  app.add_option("--threads", opts.threads,
                 "worker threads (0 = hardware concurrency)")
      ->check(CLI::NonNegativeNumber);
  app.add_flag("--quiet", opts.quiet, "suppress progress notes");

  std::string config_path, out_path;
  int coordinate = 0, max_lag = 50;

  auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON run configuration")
        ->required();
  };
  auto add_out = [&](CLI::App* sub, bool required) {
    auto* o = sub->add_option("--out", out_path, "output file");
    if (required) o->required();
  };

  auto* feas = app.add_subcommand("feasibility",
                                  "report whether the instance admits a "
                                  "strongly log-concave decomposition");
  add_config(feas);
  add_out(feas, false);
  auto* region = app.add_subcommand(
      "region", "scan a 2-parameter grid for asymptotic feasibility");
  add_config(region);
  add_out(region, true);
  auto* sample =
      app.add_subcommand("sample", "draw posterior samples via the two-stage chain");
  add_config(sample);
  add_out(sample, true);
  auto* oracle = app.add_subcommand(
      "oracle", "exact marginal CDF tables by enumeration (d <= 20)");
  add_config(oracle);
  add_out(oracle, true);
  auto* coverage = app.add_subcommand(
      "coverage", "credible-interval coverage over repeated instances");
  add_config(coverage);
  add_out(coverage, true);
  auto* diagnose =
      app.add_subcommand("diagnose", "chain trace and autocorrelation summary");
  add_config(diagnose);
  add_out(diagnose, true);
  diagnose->add_option("--coordinate", coordinate, "coordinate to analyze");
  diagnose->add_option("--max-lag", max_lag, "largest autocorrelation lag");

  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("spikeslab");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  }
  opts.seed_given = seed_opt->count() > 0;

  try {
    const RunConfig cfg = load_run_config(config_path);
    if (*feas) return detail::cmd_feasibility(cfg, opts, out_path);
    if (*region) return detail::cmd_region(cfg, opts, out_path);
    if (*sample) return detail::cmd_sample(cfg, opts, out_path);
    if (*oracle) return detail::cmd_oracle(cfg, opts, out_path);
    if (*coverage) return detail::cmd_coverage(cfg, opts, out_path);
    if (*diagnose)
      return detail::cmd_diagnose(cfg, opts, out_path, coordinate, max_lag);
    std::cerr << "usage error: no subcommand\n";
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
}

}  // namespace spikeslab::cli
