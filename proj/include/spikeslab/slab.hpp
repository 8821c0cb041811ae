#pragma once

// Slab families and the spike-and-slab prior.  A slab is a symmetric
// log-concave density on the real line; the prior puts mass 1-q on the
// point mass at zero and mass q on the slab, independently per coordinate.

#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <utility>
#include <variant>
#include <vector>

#include "spikeslab/common.hpp"
#include "spikeslab/quadrature.hpp"
#include "spikeslab/rng.hpp"

namespace spikeslab {

struct GaussianSlab {
  double variance;
};

struct LaplaceSlab {
  double rate;  // density (rate/2) exp(-rate|x|)
};

// Arbitrary symmetric log-concave slab given by its log-density, with tail
// parameters (k, c1, c2) certifying f(x) >= c1 exp(-c2 x^{2k}); the tail
// parameters set quadrature/search scales.
struct GenericSlab {
  std::function<double(double)> log_density;
  int tail_order;  // k
  double c1;
  double c2;
};

using SlabFamily = std::variant<GaussianSlab, LaplaceSlab, GenericSlab>;

inline double slab_log_density(const GaussianSlab& s, double x) {
  return -0.5 * x * x / s.variance -
         0.5 * std::log(2.0 * std::numbers::pi * s.variance);
}

inline double slab_log_density(const LaplaceSlab& s, double x) {
  return std::log(0.5 * s.rate) - s.rate * std::fabs(x);
}

inline double slab_log_density(const GenericSlab& s, double x) {
  return s.log_density(x);
}

inline double slab_log_density(const SlabFamily& slab, double x) {
  return std::visit([x](const auto& s) { return slab_log_density(s, x); }, slab);
}

// Rough standard-deviation scale, used to size quadrature windows and grids.
inline double slab_scale(const SlabFamily& slab) {
  if (const auto* g = std::get_if<GaussianSlab>(&slab)) return std::sqrt(g->variance);
  if (const auto* l = std::get_if<LaplaceSlab>(&slab))
    return std::numbers::sqrt2 / l->rate;
  const auto& gen = std::get<GenericSlab>(slab);
  return std::pow(1.0 / gen.c2, 1.0 / (2.0 * gen.tail_order));
}

inline double slab_cdf(const GaussianSlab& s, double x) {
  return 0.5 * std::erfc(-x / std::sqrt(2.0 * s.variance));
}

inline double slab_cdf(const LaplaceSlab& s, double x) {
  if (x < 0.0) return 0.5 * std::exp(s.rate * x);
  return 1.0 - 0.5 * std::exp(-s.rate * x);
}

inline double slab_variance(const GaussianSlab& s) { return s.variance; }
inline double slab_variance(const LaplaceSlab& s) { return 2.0 / (s.rate * s.rate); }

namespace detail {

inline void check_normalization(const SlabFamily& slab, double half_width,
                                const char* name) {
  const double z = integrate_or_throw(
      [&](double x) { return std::exp(slab_log_density(slab, x)); }, -half_width,
      half_width, IntegrationOptions{1e-12, 1e-12, 4000}, name);
  if (std::fabs(z - 1.0) > 1e-8)
    throw ValidationError(std::string(name) +
                          ": density does not normalize to 1 (integral " +
                          std::to_string(z) + ")");
}

}  // namespace detail

// Validates a slab family at construction time: positive parameters,
// quadrature normalization for the analytic families, and symmetry plus
// grid log-concavity for generic slabs.
inline SlabFamily make_slab(SlabFamily slab) {
  if (const auto* g = std::get_if<GaussianSlab>(&slab)) {
    if (!(g->variance > 0.0))
      throw ValidationError("GaussianSlab: variance must be > 0");
    detail::check_normalization(slab, 12.0 * std::sqrt(g->variance), "GaussianSlab");
  } else if (const auto* l = std::get_if<LaplaceSlab>(&slab)) {
    if (!(l->rate > 0.0)) throw ValidationError("LaplaceSlab: rate must be > 0");
    detail::check_normalization(slab, 45.0 / l->rate, "LaplaceSlab");
  } else {
    const auto& gen = std::get<GenericSlab>(slab);
    if (!gen.log_density) throw ValidationError("GenericSlab: missing log-density");
    if (gen.tail_order < 1)
      throw ValidationError("GenericSlab: tail order must be a positive integer");
    if (!(gen.c1 > 0.0) || !(gen.c2 > 0.0))
      throw ValidationError("GenericSlab: tail constants must be > 0");
    const double reach = 8.0 * std::max(1.0, slab_scale(slab));
    const int points = 401;
    std::vector<double> logf(points);
    const double step = 2.0 * reach / (points - 1);
    for (int i = 0; i < points; ++i) {
      const double x = -reach + i * step;
      logf[i] = gen.log_density(x);
      if (!std::isfinite(logf[i]))
        throw ValidationError("GenericSlab: log-density not finite at x = " +
                              std::to_string(x));
      const double mirror = gen.log_density(-x);
      if (std::fabs(logf[i] - mirror) > 1e-10)
        throw ValidationError("GenericSlab: density not symmetric at x = " +
                              std::to_string(x));
    }
    for (int i = 1; i + 1 < points; ++i) {
      const double second_diff = logf[i - 1] - 2.0 * logf[i] + logf[i + 1];
      if (second_diff > 1e-8)
        throw ValidationError(
            "GenericSlab: log-density fails concavity near x = " +
            std::to_string(-reach + i * step));
    }
  }
  return slab;
}

struct SpikeSlabPrior {
  double q;  // weight on the slab; 1-q is the atom mass at zero
  SlabFamily slab;
};

inline SpikeSlabPrior make_prior(double q, SlabFamily slab) {
  if (!(q > 0.0 && q < 1.0))
    throw ValidationError("SpikeSlabPrior: q must lie strictly in (0, 1)");
  return SpikeSlabPrior{q, make_slab(std::move(slab))};
}

// Inverse-CDF sampler built from a tabulated cumulative of exp(log_density)
// over [lo, hi].  Used for generic slabs (plain and tilted), where no
// closed-form sampler exists.  Resolution is fine enough for CDF errors
// around 1e-7, far below the Monte Carlo noise of any consumer.
class TabulatedInverseCdf {
 public:
  TabulatedInverseCdf(const std::function<double(double)>& log_density, double lo,
                      double hi, int cells = 8192)
      : lo_(lo), hi_(hi) {
    if (!(lo < hi)) throw ValidationError("TabulatedInverseCdf: requires lo < hi");
    const int points = cells + 1;
    grid_.resize(points);
    cdf_.resize(points);
    std::vector<double> logf(points);
    double max_logf = -std::numeric_limits<double>::infinity();
    const double step = (hi - lo) / cells;
    for (int i = 0; i < points; ++i) {
      grid_[i] = lo + i * step;
      logf[i] = log_density(grid_[i]);
      if (logf[i] > max_logf) max_logf = logf[i];
    }
    if (!std::isfinite(max_logf))
      throw QuadratureError("TabulatedInverseCdf: log-density not finite on table");
    // trapezoid accumulation of the rescaled density
    cdf_[0] = 0.0;
    for (int i = 1; i < points; ++i) {
      const double f0 = std::exp(logf[i - 1] - max_logf);
      const double f1 = std::exp(logf[i] - max_logf);
      cdf_[i] = cdf_[i - 1] + 0.5 * (f0 + f1) * step;
    }
    const double total = cdf_.back();
    if (!(total > 0.0))
      throw QuadratureError("TabulatedInverseCdf: density mass vanishes on table");
    for (double& c : cdf_) c /= total;
  }

  double sample(double u) const {
    // binary search for the cell containing u, then linear interpolation
    size_t lo_idx = 0, hi_idx = cdf_.size() - 1;
    while (hi_idx - lo_idx > 1) {
      const size_t mid = (lo_idx + hi_idx) / 2;
      if (cdf_[mid] <= u)
        lo_idx = mid;
      else
        hi_idx = mid;
    }
    const double c0 = cdf_[lo_idx], c1 = cdf_[hi_idx];
    const double t = (c1 > c0) ? (u - c0) / (c1 - c0) : 0.5;
    return grid_[lo_idx] + t * (grid_[hi_idx] - grid_[lo_idx]);
  }

 private:
  double lo_, hi_;
  std::vector<double> grid_;
  std::vector<double> cdf_;
};

namespace detail {

// Window [-R, R] capturing all but ~1e-12 of a generic slab's mass: grow R
// until the density at the edge is negligible relative to the center.
inline double generic_slab_reach(const GenericSlab& gen) {
  const double center = gen.log_density(0.0);
  double reach = 4.0 * std::max(1.0, slab_scale(SlabFamily{gen}));
  for (int i = 0; i < 60; ++i) {
    if (gen.log_density(reach) < center - 40.0) return reach;
    reach *= 2.0;
  }
  throw ConvergenceError("GenericSlab: density tail does not decay");
}

}  // namespace detail

// One draw from the slab density itself (no tilt).
inline double sample_slab(const GaussianSlab& s, RngStream& rng) {
  return std::sqrt(s.variance) * rng.normal();
}

inline double sample_slab(const LaplaceSlab& s, RngStream& rng) {
  const double magnitude = rng.exponential() / s.rate;
  return (rng.uniform() < 0.5) ? magnitude : -magnitude;
}

inline double sample_slab(const GenericSlab& s, RngStream& rng,
                          const TabulatedInverseCdf& table) {
  return table.sample(rng.uniform());
}

}  // namespace spikeslab
