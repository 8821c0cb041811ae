#pragma once

// Output formatting: shortest round-trip doubles, CSV writers for sample,
// region, coverage and diagnostics tables, and JSON conversions for
// reports and metadata sidecars.

#include <charconv>
#include <ostream>
#include <string>
#include <system_error>

#include <json.hpp>

#include "spikeslab/common.hpp"
#include "spikeslab/experiments.hpp"
#include "spikeslab/feasibility.hpp"
#include "spikeslab/samplers.hpp"

namespace spikeslab {

// Shortest decimal string that parses back to exactly x.
inline std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  if (res.ec != std::errc())
    throw Error("format_double: conversion failed");
  return std::string(buf, res.ptr);
}

inline void write_samples_csv(std::ostream& os, const Matrix& thetas) {
  for (int j = 0; j < thetas.cols(); ++j)
    os << (j ? ",theta_" : "theta_") << j;
  os << '\n';
  for (int i = 0; i < thetas.rows(); ++i) {
    for (int j = 0; j < thetas.cols(); ++j) {
      if (j) os << ',';
      os << format_double(thetas(i, j));
    }
    os << '\n';
  }
}

inline void write_region_csv(std::ostream& os, const RegionScan& scan) {
  os << "axis1,axis2,feasible,gamma_star,margin\n";
  const auto n2 = static_cast<long>(scan.values2.size());
  for (std::size_t i1 = 0; i1 < scan.values1.size(); ++i1) {
    for (std::size_t i2 = 0; i2 < scan.values2.size(); ++i2) {
      const auto& report =
          scan.reports[static_cast<std::size_t>(static_cast<long>(i1) * n2) + i2];
      os << format_double(scan.values1[i1]) << ','
         << format_double(scan.values2[i2]) << ','
         << (report.feasible ? 1 : 0) << ',';
      if (report.gamma_star) os << format_double(*report.gamma_star);
      os << ',' << format_double(report.margin) << '\n';
    }
  }
}

inline void write_boundary_csv(std::ostream& os, const RegionScan& scan) {
  os << "axis1,axis2\n";
  for (const auto& [a1, a2] : scan.boundary)
    os << format_double(a1) << ',' << format_double(a2) << '\n';
}

// Successful repetitions only; failed ones appear in the JSON summary.
inline void write_coverage_csv(std::ostream& os, const CoverageResult& result) {
  os << "repetition,coordinate,covered\n";
  for (long r = 0; r < result.repetitions; ++r) {
    if (result.indicators(r, 0) < 0) continue;
    for (int j = 0; j < result.d; ++j)
      os << r << ',' << j << ',' << int(result.indicators(r, j)) << '\n';
  }
}

inline void write_trace_csv(std::ostream& os, const DiagnosticsBundle& bundle) {
  os << "step,value\n";
  for (int i = 0; i < bundle.trace.size(); ++i)
    os << i << ',' << format_double(bundle.trace[i]) << '\n';
}

inline void write_acf_csv(std::ostream& os, const DiagnosticsBundle& bundle) {
  os << "lag,autocorrelation\n";
  for (int k = 0; k < bundle.autocorrelation.size(); ++k)
    os << k << ',' << format_double(bundle.autocorrelation[k]) << '\n';
}

inline nlohmann::json to_json(const FeasibilityReport& report) {
  nlohmann::json j{{"feasible", report.feasible},
                   {"margin", report.margin},
                   {"inf_v_second", report.inf_v_second},
                   {"lambda_min", report.lambda_min},
                   {"lambda_max", report.lambda_max},
                   {"gammas_tested", report.gammas_tested}};
  if (report.gamma_star)
    j["gamma_star"] = *report.gamma_star;
  else
    j["gamma_star"] = nullptr;
  return j;
}

inline nlohmann::json to_json(const ChainConfig& config) {
  nlohmann::json j;
  if (const auto* m = std::get_if<MalaParams>(&config.method)) {
    j["method"] = "mala";
    j["tau"] = m->tau;
  } else {
    const auto& h = std::get<HmcParams>(config.method);
    j["method"] = "hmc";
    j["epsilon"] = h.epsilon;
    j["leapfrog_steps"] = h.leapfrog_steps;
  }
  j["total_steps"] = config.total_steps;
  j["burn_in"] = config.burn_in;
  j["thinning"] = config.thinning;
  j["rejection_policy"] = config.rejection_policy == RejectionPolicy::StayOnReject
                              ? "stay_on_reject"
                              : "retry_until_accept";
  j["seed"] = config.seed;
  j["init_smoothness"] = config.init_smoothness;
  return j;
}

inline nlohmann::json to_json(const SampleSet& samples) {
  nlohmann::json mode = nlohmann::json::array();
  for (int i = 0; i < samples.mode.size(); ++i) mode.push_back(samples.mode[i]);
  return nlohmann::json{{"draws", samples.thetas.rows()},
                        {"dimension", samples.thetas.cols()},
                        {"gamma", samples.gamma},
                        {"feasible_at_gamma", samples.feasible_at_gamma},
                        {"feasibility_margin", samples.feasibility_margin},
                        {"acceptance_rate", samples.acceptance_rate},
                        {"proposals", samples.proposals},
                        {"accepted", samples.accepted},
                        {"mode", mode},
                        {"mode_grad_inf_norm", samples.mode_grad_inf_norm},
                        {"sampler", to_json(samples.config)}};
}

inline nlohmann::json to_json(const CoverageResult& result) {
  nlohmann::json per = nlohmann::json::array();
  for (int j = 0; j < result.per_coordinate_rate.size(); ++j)
    per.push_back(result.per_coordinate_rate[j]);
  return nlohmann::json{{"repetitions", result.repetitions},
                        {"d", result.d},
                        {"level", result.level},
                        {"aggregate_rate", result.aggregate_rate},
                        {"per_coordinate_rate", per},
                        {"failed_repetitions", result.failed_repetitions},
                        {"gate", to_json(result.gate_report)}};
}

}  // namespace spikeslab
