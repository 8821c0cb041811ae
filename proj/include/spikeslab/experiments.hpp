#pragma once

// Calibration and diagnostics experiments: equal-tailed credible intervals
// from posterior draws, repeated-instance coverage of the true signal, and
// autocorrelation / effective-sample-size summaries for phi chains.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "spikeslab/common.hpp"
#include "spikeslab/decomposition.hpp"
#include "spikeslab/design.hpp"
#include "spikeslab/feasibility.hpp"
#include "spikeslab/parallel.hpp"
#include "spikeslab/rng.hpp"
#include "spikeslab/samplers.hpp"
#include "spikeslab/slab.hpp"

namespace spikeslab {

// Linear-interpolation sample quantile (the common "type 7" rule):
// position p (N - 1) between order statistics.
inline double sample_quantile(std::vector<double> values, double p) {
  if (values.empty()) throw ValidationError("sample_quantile: empty input");
  if (!(p >= 0.0 && p <= 1.0))
    throw ValidationError("sample_quantile: p must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = p * (static_cast<double>(values.size()) - 1.0);
  const auto k = static_cast<std::size_t>(pos);
  if (k + 1 >= values.size()) return values.back();
  const double frac = pos - static_cast<double>(k);
  return values[k] + frac * (values[k + 1] - values[k]);
}

struct CredibleIntervals {
  Vector lower;
  Vector upper;
  double level;
};

// Equal-tailed per-coordinate intervals from an N x d draw matrix.  At
// least 40 draws are required so the tail quantiles are not pure
// extrapolation at the default level.
inline CredibleIntervals credible_intervals(const Matrix& samples, double level) {
  if (samples.rows() < 40)
    throw ValidationError("credible_intervals: need at least 40 draws");
  if (!(level > 0.0 && level < 1.0))
    throw ValidationError("credible_intervals: level must lie in (0, 1)");
  const double alpha = 0.5 * (1.0 - level);
  CredibleIntervals out;
  out.level = level;
  out.lower.resize(samples.cols());
  out.upper.resize(samples.cols());
  std::vector<double> column(static_cast<std::size_t>(samples.rows()));
  for (int j = 0; j < samples.cols(); ++j) {
    for (int i = 0; i < samples.rows(); ++i)
      column[static_cast<std::size_t>(i)] = samples(i, j);
    out.lower[j] = sample_quantile(column, alpha);
    out.upper[j] = sample_quantile(column, 1.0 - alpha);
  }
  return out;
}

inline CredibleIntervals credible_intervals(const SampleSet& samples,
                                            double level) {
  return credible_intervals(samples.thetas, level);
}

struct CoverageSetting {
  int n = 0;
  int d = 0;
  SpikeSlabPrior prior;                   // generates the true signal
  std::optional<SlabFamily> assumed_slab; // inference slab if misspecified
  DesignSpec design = IidGaussian{1.0};
  double sigma_d = 1.0;
  GammaPolicy gamma = AutoGamma{};
  ChainConfig chain;
  double level = 0.95;
  bool force_run = false;  // skip the feasibility gate
};

using IndicatorMatrix =
    Eigen::Matrix<std::int8_t, Eigen::Dynamic, Eigen::Dynamic>;

struct CoverageResult {
  long repetitions = 0;
  int d = 0;
  double level = 0.0;
  IndicatorMatrix indicators;  // R x d; 1 covered, 0 missed, -1 rep failed
  double aggregate_rate = 0.0;
  Vector per_coordinate_rate;
  long failed_repetitions = 0;
  FeasibilityReport gate_report;
};

// Repeat R times: draw theta* from the prior, a fresh design and response,
// sample the posterior, and record per-coordinate interval coverage of
// theta*.  All randomness is derived from master_seed, with fixed stream
// labels per repetition, so results do not depend on worker count.  The
// rep-0 design gates the run: an infeasible instance raises
// InfeasibleError unless force_run is set.
inline CoverageResult coverage_experiment(const CoverageSetting& setting,
                                          long repetitions,
                                          long samples_per_rep,
                                          std::uint64_t master_seed,
                                          int workers = 1) {
  if (repetitions < 1)
    throw ValidationError("coverage_experiment: repetitions must be >= 1");
  if (setting.n < 1 || setting.d < 1)
    throw ValidationError("coverage_experiment: n and d must be >= 1");
  if (!(setting.sigma_d > 0.0))
    throw ValidationError("coverage_experiment: sigma_d must be > 0");
  validate(setting.chain);

  SpikeSlabPrior inference = setting.prior;
  if (setting.assumed_slab) inference.slab = *setting.assumed_slab;

  auto design_for = [&](long r) {
    return generate_design(setting.design, setting.n, setting.d,
                           derive_seed(master_seed, static_cast<std::uint64_t>(r), 2));
  };

  CoverageResult out;
  out.repetitions = repetitions;
  out.d = setting.d;
  out.level = setting.level;
  out.gate_report =
      empirical_feasibility(design_for(0), setting.sigma_d, inference);
  if (!out.gate_report.feasible && !setting.force_run)
    throw InfeasibleError(
        "coverage_experiment: the rep-0 design admits no feasible gamma; "
        "pass force_run to override");

  out.indicators.setConstant(repetitions, setting.d, -1);
  parallel_for(repetitions, workers, [&](long r) {
    try {
      const Vector theta_star = sample_prior(
          setting.prior, setting.d,
          derive_seed(master_seed, static_cast<std::uint64_t>(r), 1));
      const Matrix X = design_for(r);
      const Vector y = generate_response(
          X, theta_star, setting.sigma_d,
          derive_seed(master_seed, static_cast<std::uint64_t>(r), 3));
      const Decomposition decomp(X, y, setting.sigma_d, setting.gamma);
      ChainConfig chain = setting.chain;
      chain.seed = derive_seed(master_seed, static_cast<std::uint64_t>(r), 4);
      const SampleSet draws =
          two_stage_sample(decomp, inference, chain, samples_per_rep);
      const CredibleIntervals ci = credible_intervals(draws, setting.level);
      for (int j = 0; j < setting.d; ++j)
        out.indicators(r, j) =
            (theta_star[j] >= ci.lower[j] && theta_star[j] <= ci.upper[j]) ? 1
                                                                           : 0;
    } catch (const Error&) {
      out.indicators.row(r).setConstant(-1);
    }
  });

  out.per_coordinate_rate = Vector::Zero(setting.d);
  long covered = 0, counted = 0;
  std::vector<long> column_counts(static_cast<std::size_t>(setting.d), 0);
  for (long r = 0; r < repetitions; ++r) {
    if (out.indicators(r, 0) < 0) {
      ++out.failed_repetitions;
      continue;
    }
    for (int j = 0; j < setting.d; ++j) {
      const int v = out.indicators(r, j);
      covered += v;
      ++counted;
      out.per_coordinate_rate[j] += v;
      ++column_counts[static_cast<std::size_t>(j)];
    }
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  out.aggregate_rate =
      counted > 0 ? static_cast<double>(covered) / counted : nan;
  for (int j = 0; j < setting.d; ++j)
    out.per_coordinate_rate[j] =
        column_counts[static_cast<std::size_t>(j)] > 0
            ? out.per_coordinate_rate[j] / column_counts[static_cast<std::size_t>(j)]
            : nan;
  return out;
}

struct DiagnosticsBundle {
  Vector trace;            // analyzed coordinate of the chain
  Vector autocorrelation;  // lags 0..max_lag (biased estimator)
  double acceptance_rate = std::numeric_limits<double>::quiet_NaN();
  double ess = 0.0;
  bool degenerate = false;
};

// Biased-normalization autocorrelation and the initial-positive-sum ESS
// (the running sum truncates at the first negative autocorrelation).  A
// constant chain is flagged degenerate with lag-0 autocorrelation 1.
inline DiagnosticsBundle chain_diagnostics(
    const Matrix& states, int coordinate, int max_lag,
    double acceptance_rate = std::numeric_limits<double>::quiet_NaN()) {
  const long n = states.rows();
  if (n < 2) throw ValidationError("chain_diagnostics: need at least 2 states");
  if (coordinate < 0 || coordinate >= states.cols())
    throw ValidationError("chain_diagnostics: coordinate out of range");
  if (max_lag < 1)
    throw ValidationError("chain_diagnostics: max_lag must be >= 1");
  const int lag_cap = static_cast<int>(std::min<long>(max_lag, n - 1));
  DiagnosticsBundle out;
  out.acceptance_rate = acceptance_rate;
  out.trace = states.col(coordinate);
  const double mean = out.trace.mean();
  const Vector centered = out.trace.array() - mean;
  const double c0 = centered.squaredNorm() / static_cast<double>(n);
  out.autocorrelation = Vector::Zero(lag_cap + 1);
  out.autocorrelation[0] = 1.0;
  if (!(c0 > 0.0)) {
    out.degenerate = true;
    out.ess = 0.0;
    return out;
  }
  for (int k = 1; k <= lag_cap; ++k) {
    double ck = 0.0;
    for (long t = 0; t + k < n; ++t) ck += centered[t] * centered[t + k];
    out.autocorrelation[k] = ck / static_cast<double>(n) / c0;
  }
  double rho_sum = 0.0;
  for (int k = 1; k <= lag_cap; ++k) {
    if (out.autocorrelation[k] < 0.0) break;
    rho_sum += out.autocorrelation[k];
  }
  out.ess = static_cast<double>(n) / (1.0 + 2.0 * rho_sum);
  return out;
}

inline DiagnosticsBundle chain_diagnostics(const ChainResult& chain,
                                           int coordinate, int max_lag) {
  return chain_diagnostics(chain.states, coordinate, max_lag,
                           chain.acceptance_rate);
}

}  // namespace spikeslab
