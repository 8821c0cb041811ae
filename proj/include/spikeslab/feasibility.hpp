#pragma once

// Feasibility of the decomposition: does some gamma above the spectral
// threshold make the field Hamiltonian strongly convex?  The criterion per
// gamma is 1/(gamma - lambda_min) + inf_x V''(x) > 0; the search scans a
// log-spaced gamma grid.  The asymptotic variant replaces the extreme
// eigenvalues by their Bai-Yin limits for i.i.d. designs.

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Eigenvalues>

#include "spikeslab/common.hpp"
#include "spikeslab/parallel.hpp"
#include "spikeslab/potential.hpp"
#include "spikeslab/slab.hpp"

namespace spikeslab {

struct FeasibilityReport {
  bool feasible = false;
  std::optional<double> gamma_star;  // absent when infeasible
  double margin = 0.0;               // best margin found
  double inf_v_second = 0.0;         // inf V'' at gamma_star / best gamma
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  int gammas_tested = 0;
};

// Search grid over gamma: `points` log-spaced values on
// (lambda_max * (1 + lower_rel), upper_factor * (lambda_max + 1)].
struct GammaGrid {
  int points = 200;
  double upper_factor = 100.0;
  double lower_rel = 1e-6;
};

// Margins within +-1e-9 of zero count as infeasible: downstream sampling
// needs strict strong convexity, so the boundary is classified
// conservatively.
inline constexpr double kFeasibilityMarginFloor = 1e-9;

inline FeasibilityReport feasibility_search(double lambda_min, double lambda_max,
                                            const SpikeSlabPrior& prior,
                                            const GammaGrid& grid = {}) {
  if (grid.points < 1)
    throw ValidationError("feasibility_search: grid must have >= 1 point");
  if (!(lambda_max >= lambda_min) || !(lambda_min >= 0.0))
    throw ValidationError("feasibility_search: need 0 <= lambda_min <= lambda_max");
  const double hi = grid.upper_factor * (lambda_max + 1.0);
  double lo = lambda_max * (1.0 + grid.lower_rel);
  if (!(lo > 0.0)) lo = hi * 1e-12;  // lambda_max == 0: keep the grid log-spaced
  FeasibilityReport report;
  report.lambda_min = lambda_min;
  report.lambda_max = lambda_max;
  double best_margin = -std::numeric_limits<double>::infinity();
  double best_iv = 0.0;
  const double ratio = std::pow(hi / lo, 1.0 / grid.points);
  double gamma = lo;
  for (int i = 1; i <= grid.points; ++i) {
    gamma *= ratio;
    const InfVSecond iv = inf_v_second(prior, gamma);
    const double margin = 1.0 / (gamma - lambda_min) + iv.inf_value;
    if (margin > kFeasibilityMarginFloor) {
      report.feasible = true;
      report.gamma_star = gamma;
      report.margin = margin;
      report.inf_v_second = iv.inf_value;
      report.gammas_tested = i;
      return report;
    }
    if (margin > best_margin) {
      best_margin = margin;
      best_iv = iv.inf_value;
    }
  }
  report.feasible = false;
  report.margin = best_margin;
  report.inf_v_second = best_iv;
  report.gammas_tested = grid.points;
  return report;
}

// Feasibility for a concrete design: eigenvalues of X^T X / sigma^2 by
// dense symmetric eigendecomposition, then the gamma-grid search.  The
// verdict depends only on X and sigma_d, never on y.
inline FeasibilityReport empirical_feasibility(const Matrix& X, double sigma_d,
                                               const SpikeSlabPrior& prior,
                                               const GammaGrid& grid = {}) {
  if (X.rows() < 1 || X.cols() < 1)
    throw ValidationError("empirical_feasibility: X must be nonempty");
  if (X.squaredNorm() == 0.0)
    throw ValidationError("empirical_feasibility: X must be nonzero");
  if (!(sigma_d > 0.0))
    throw ValidationError("empirical_feasibility: sigma_d must be > 0");
  const Matrix gram = (X.transpose() * X) / (sigma_d * sigma_d);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
  if (eig.info() != Eigen::Success)
    throw LinAlgError("empirical_feasibility: eigendecomposition failed");
  const double lmin = std::max(0.0, eig.eigenvalues().minCoeff());
  const double lmax = eig.eigenvalues().maxCoeff();
  return feasibility_search(lmin, lmax, prior, grid);
}

// The proportional limit n/d -> delta with noise scaling sigma_d = sqrt(d)
// sigma0; extreme eigenvalues follow the Bai-Yin limits
// delta (1 +- 1/sqrt(delta))^2 / sigma0^2 (lower limit zero when delta < 1).
struct AsymptoticPoint {
  double delta;
  double sigma0;
  SpikeSlabPrior prior;
};

inline FeasibilityReport asymptotic_feasibility(const AsymptoticPoint& pt,
                                                const GammaGrid& grid = {}) {
  if (!(pt.delta > 0.0) || !(pt.sigma0 > 0.0))
    throw ValidationError("asymptotic_feasibility: delta and sigma0 must be > 0");
  const double root = 1.0 / std::sqrt(pt.delta);
  const double s2 = pt.sigma0 * pt.sigma0;
  const double lmax = pt.delta * (1.0 + root) * (1.0 + root) / s2;
  const double lmin =
      (pt.delta >= 1.0) ? pt.delta * (1.0 - root) * (1.0 - root) / s2 : 0.0;
  return feasibility_search(lmin, lmax, pt.prior, grid);
}

enum class RegionParam { Delta, Sigma0, MixingQ };

struct AxisSpec {
  RegionParam param;
  double lo;
  double hi;
  int count;
  bool log_scale = false;

  std::vector<double> values() const {
    if (count < 1) throw ValidationError("AxisSpec: count must be >= 1");
    if (count == 1) return {lo};
    if (!(lo < hi)) throw ValidationError("AxisSpec: requires lo < hi");
    if (log_scale && !(lo > 0.0))
      throw ValidationError("AxisSpec: log-scale axis requires lo > 0");
    std::vector<double> v(count);
    if (log_scale) {
      const double r = std::pow(hi / lo, 1.0 / (count - 1));
      double x = lo;
      for (int i = 0; i < count; ++i, x *= r) v[i] = x;
      v.back() = hi;
    } else {
      const double step = (hi - lo) / (count - 1);
      for (int i = 0; i < count; ++i) v[i] = lo + i * step;
      v.back() = hi;
    }
    return v;
  }
};

// Values for whichever of (delta, sigma0, q) are not swept by an axis.
struct RegionFixed {
  std::optional<double> delta;
  std::optional<double> sigma0;
  std::optional<double> q;
  SlabFamily slab;
};

struct RegionScan {
  AxisSpec axis1, axis2;
  std::vector<double> values1, values2;
  // report at (i1, i2) sits at index i1 * values2.size() + i2
  std::vector<FeasibilityReport> reports;
  // feasible/infeasible transitions along axis2, one entry per crossing:
  // (axis1 value, axis2 midpoint of the transition cell)
  std::vector<std::pair<double, double>> boundary;
};

inline RegionScan scan_region(const AxisSpec& axis1, const AxisSpec& axis2,
                              const RegionFixed& fixed, const GammaGrid& grid = {},
                              int workers = 1) {
  if (axis1.param == axis2.param)
    throw ValidationError("scan_region: axes must sweep different parameters");
  auto provided = [&](RegionParam p) {
    const bool on_axis = (axis1.param == p) || (axis2.param == p);
    const bool is_fixed = (p == RegionParam::Delta && fixed.delta.has_value()) ||
                          (p == RegionParam::Sigma0 && fixed.sigma0.has_value()) ||
                          (p == RegionParam::MixingQ && fixed.q.has_value());
    if (on_axis && is_fixed)
      throw ValidationError("scan_region: parameter both swept and fixed");
    if (!on_axis && !is_fixed)
      throw ValidationError("scan_region: parameter neither swept nor fixed");
  };
  provided(RegionParam::Delta);
  provided(RegionParam::Sigma0);
  provided(RegionParam::MixingQ);

  RegionScan scan;
  scan.axis1 = axis1;
  scan.axis2 = axis2;
  scan.values1 = axis1.values();
  scan.values2 = axis2.values();
  const long n1 = static_cast<long>(scan.values1.size());
  const long n2 = static_cast<long>(scan.values2.size());
  if (n1 * n2 > 1000000L)
    throw ValidationError("scan_region: grid exceeds 1e6 points");
  const SlabFamily slab = make_slab(fixed.slab);  // validate once, reuse per point

  scan.reports.resize(n1 * n2);
  parallel_for(n1 * n2, workers, [&](long idx) {
    const double v1 = scan.values1[idx / n2];
    const double v2 = scan.values2[idx % n2];
    auto pick = [&](RegionParam p, const std::optional<double>& fallback) {
      if (axis1.param == p) return v1;
      if (axis2.param == p) return v2;
      return *fallback;
    };
    const double delta = pick(RegionParam::Delta, fixed.delta);
    const double sigma0 = pick(RegionParam::Sigma0, fixed.sigma0);
    const double q = pick(RegionParam::MixingQ, fixed.q);
    if (!(q > 0.0 && q < 1.0))
      throw ValidationError("scan_region: q grid value outside (0, 1)");
    const AsymptoticPoint pt{delta, sigma0, SpikeSlabPrior{q, slab}};
    scan.reports[idx] = asymptotic_feasibility(pt, grid);
  });

  for (long i1 = 0; i1 < n1; ++i1) {
    for (long i2 = 0; i2 + 1 < n2; ++i2) {
      const bool a = scan.reports[i1 * n2 + i2].feasible;
      const bool b = scan.reports[i1 * n2 + i2 + 1].feasible;
      if (a != b) {
        const double x = scan.values2[i2], y = scan.values2[i2 + 1];
        const double mid = axis2.log_scale ? std::sqrt(x * y) : 0.5 * (x + y);
        scan.boundary.emplace_back(scan.values1[i1], mid);
      }
    }
  }
  return scan;
}

// Marchenko-Pastur density (the absolutely continuous part; the point mass
// (1 - delta) at zero for delta < 1 is not represented).  Diagnostics only.
inline double mp_density(double x, double delta) {
  if (!(delta > 0.0)) throw ValidationError("mp_density: delta must be > 0");
  const double root = 1.0 / std::sqrt(delta);
  const double a = (1.0 - root) * (1.0 - root);
  const double b = (1.0 + root) * (1.0 + root);
  if (x <= a || x >= b) return 0.0;
  return delta * std::sqrt((b - x) * (x - a)) / (2.0 * std::numbers::pi * x);
}

}  // namespace spikeslab
