#pragma once

// The Gaussian-tilted slab transform g and the potential V with its first
// two derivatives, plus the auxiliary-field Hamiltonian H and the global
// infimum of V''.  Everything runs in log space: g(x) grows like
// exp(x^2 / (2(gamma + 1/v))) and overflows for |x| of a few dozen.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <utility>
#include <variant>

#include "spikeslab/common.hpp"
#include "spikeslab/decomposition.hpp"
#include "spikeslab/quadrature.hpp"
#include "spikeslab/slab.hpp"
#include "spikeslab/special.hpp"

namespace spikeslab {

// g, g', g'' at one query point, stored as log g plus the ratios that stay
// bounded: d1_ratio = g'/g (the tilted-slab mean) and cond_variance =
// g''/g - (g'/g)^2 (the tilted-slab variance, in [0, 1/gamma]).
struct SlabTransform {
  double log_g;
  double d1_ratio;
  double cond_variance;

  double g() const { return std::exp(log_g); }
  double g_prime() const { return d1_ratio * g(); }
  double g_second() const { return (cond_variance + d1_ratio * d1_ratio) * g(); }
};

namespace detail {

inline SlabTransform gaussian_slab_transform(const GaussianSlab& s, double gamma,
                                             double x) {
  const double a = gamma + 1.0 / s.variance;  // tilted precision
  SlabTransform t;
  t.log_g = -0.5 * std::log(s.variance * a) + 0.5 * x * x / a;
  t.d1_ratio = x / a;
  t.cond_variance = 1.0 / a;
  return t;
}

inline SlabTransform laplace_slab_transform(const LaplaceSlab& s, double gamma,
                                            double x) {
  // One-sided pieces: integral_0^inf e^{a t - gamma t^2/2} dt
  //   = sqrt(pi/(2 gamma)) erfcx(-a / sqrt(2 gamma))
  // with a = x - rate on the positive side and a = -x - rate on the
  // negative side; combined in log space to survive |x| ~ 1e3.
  const double rate = s.rate;
  const double scale = std::sqrt(2.0 * gamma);
  const double log_half_gauss = 0.5 * std::log(std::numbers::pi / (2.0 * gamma));
  const double l_pos = log_half_gauss + log_erfcx((rate - x) / scale);
  const double l_neg = log_half_gauss + log_erfcx((rate + x) / scale);
  const double lse = logsumexp(l_pos, l_neg);
  const double w_pos = std::exp(l_pos - lse);
  const double w_neg = std::exp(l_neg - lse);
  SlabTransform t;
  t.log_g = std::log(0.5 * rate) + lse;
  t.d1_ratio = (x + rate * std::tanh(0.5 * (l_neg - l_pos))) / gamma;
  const double xm = x - rate, xp = x + rate;
  const double second_ratio = 1.0 / gamma -
                              (2.0 * rate / (gamma * gamma)) * std::exp(-lse) +
                              (xm * xm * w_pos + xp * xp * w_neg) / (gamma * gamma);
  t.cond_variance = second_ratio - t.d1_ratio * t.d1_ratio;
  return t;
}

// Maximizer of the tilted log-integrand l(t) = x t - gamma t^2/2 + log f(t).
// l is concave and its maximizer lies between 0 and x/gamma for symmetric
// log-concave f; golden-section needs no derivatives of the user evaluator.
template <typename LogF>
double tilted_mode(const LogF& logf, double gamma, double x) {
  double lo = std::min(0.0, x / gamma);
  double hi = std::max(0.0, x / gamma);
  if (hi - lo < 1e-12) return 0.5 * (lo + hi);
  auto l = [&](double t) { return x * t - 0.5 * gamma * t * t + logf(t); };
  const double inv_phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double m1 = hi - inv_phi * (hi - lo);
  double m2 = lo + inv_phi * (hi - lo);
  double l1 = l(m1), l2 = l(m2);
  for (int i = 0; i < 200 && hi - lo > 1e-10 * (1.0 + std::fabs(hi)); ++i) {
    if (l1 < l2) {
      lo = m1;
      m1 = m2;
      l1 = l2;
      m2 = lo + inv_phi * (hi - lo);
      l2 = l(m2);
    } else {
      hi = m2;
      m2 = m1;
      l2 = l1;
      m1 = hi - inv_phi * (hi - lo);
      l1 = l(m1);
    }
  }
  return 0.5 * (lo + hi);
}

inline SlabTransform generic_slab_transform(const GenericSlab& s, double gamma,
                                            double x) {
  // Adaptive quadrature of the tilted density on mode +- 12/sqrt(gamma);
  // the total curvature is at least gamma, so that window holds the mass.
  const double m = tilted_mode(s.log_density, gamma, x);
  const double width = 12.0 / std::sqrt(gamma);
  const double peak = x * m - 0.5 * gamma * m * m + s.log_density(m);
  auto scaled = [&](double t) {
    return std::exp(x * t - 0.5 * gamma * t * t + s.log_density(t) - peak);
  };
  const IntegrationOptions opt{1e-10, 1e-10, 4000};
  const double i0 = integrate_or_throw(scaled, m - width, m + width, opt,
                                       "tilted slab mass");
  const double i1 = integrate_or_throw(
      [&](double t) { return (t - m) * scaled(t); }, m - width, m + width, opt,
      "tilted slab first moment");
  const double i2 = integrate_or_throw(
      [&](double t) { return (t - m) * (t - m) * scaled(t); }, m - width,
      m + width, opt, "tilted slab second moment");
  SlabTransform t;
  t.log_g = peak + std::log(i0);
  const double centered_mean = i1 / i0;
  t.d1_ratio = m + centered_mean;
  t.cond_variance = i2 / i0 - centered_mean * centered_mean;
  return t;
}

}  // namespace detail

inline SlabTransform slab_transform(const SlabFamily& slab, double gamma, double x) {
  if (!(gamma > 0.0)) throw ValidationError("slab_transform: gamma must be > 0");
  if (const auto* g = std::get_if<GaussianSlab>(&slab))
    return detail::gaussian_slab_transform(*g, gamma, x);
  if (const auto* l = std::get_if<LaplaceSlab>(&slab))
    return detail::laplace_slab_transform(*l, gamma, x);
  return detail::generic_slab_transform(std::get<GenericSlab>(slab), gamma, x);
}

// V(x) = -log((1-q) + q g(x)) with derivatives
//   V'  = -p g'/g
//   V'' = -p (g''/g - (g'/g)^2) - p(1-p) (g'/g)^2
// where p = q g / ((1-q) + q g) is the slab probability of the tilted
// mixture.  Computed through log-sum-exp / sigmoid so large x is exact.
struct PotentialTerms {
  double value;
  double d1;
  double d2;
  double p;
};

inline PotentialTerms potential_terms(const SpikeSlabPrior& prior, double gamma,
                                      double x) {
  const SlabTransform t = slab_transform(prior.slab, gamma, x);
  const double log_q = std::log(prior.q);
  const double log_1mq = std::log1p(-prior.q);
  const double s = log_q - log_1mq + t.log_g;  // logit of p
  PotentialTerms out;
  out.p = sigmoid(s);
  const double one_minus_p = sigmoid(-s);
  out.value = -logsumexp(log_1mq, log_q + t.log_g);
  out.d1 = -out.p * t.d1_ratio;
  out.d2 = -out.p * t.cond_variance - out.p * one_minus_p * t.d1_ratio * t.d1_ratio;
  return out;
}

// H(phi) = (1/2) <phi, A^{-1} phi> + sum_i V(h_i + phi_i) and its gradient
// A^{-1} phi + V'(h + phi), sharing one factorized solve.
inline std::pair<double, Vector> field_hamiltonian(const Decomposition& decomp,
                                                   const SpikeSlabPrior& prior,
                                                   const Vector& phi) {
  if (phi.size() != decomp.d())
    throw ValidationError("field_hamiltonian: phi has wrong dimension");
  const Vector a_inv_phi = decomp.solve_A(phi);
  double H = 0.5 * phi.dot(a_inv_phi);
  Vector grad = a_inv_phi;
  for (Eigen::Index i = 0; i < phi.size(); ++i) {
    const PotentialTerms pt =
        potential_terms(prior, decomp.gamma(), decomp.h()[i] + phi[i]);
    H += pt.value;
    grad[i] += pt.d1;
  }
  return {H, std::move(grad)};
}

// Target interface used by the samplers: dimension plus joint (H, grad).
class FieldTarget {
 public:
  FieldTarget(const Decomposition& decomp, const SpikeSlabPrior& prior)
      : decomp_(&decomp), prior_(&prior) {}

  int dim() const { return decomp_->d(); }

  void eval(const Vector& phi, double& H, Vector& grad) const {
    auto [h, g] = field_hamiltonian(*decomp_, *prior_, phi);
    H = h;
    grad = std::move(g);
  }

 private:
  const Decomposition* decomp_;
  const SpikeSlabPrior* prior_;
};

struct InfVSecond {
  double inf_value;  // certified <= 0
  double argmin;     // >= 0 (V'' is even)
};

// Global infimum of V'' over the line, searching x >= 0 by evenness:
// a dense log-spaced grid up to x_max, golden-section refinement of the
// best bracket, and geometric growth of x_max until the tail has clearly
// recovered above the current best (V'' -> its asymptote from below the
// dip for every valid prior; extremely degenerate q make the dip shallower
// than the 1e-3 slack and are reported as non-convergent).
inline InfVSecond inf_v_second(const SpikeSlabPrior& prior, double gamma) {
  if (!(gamma > 0.0)) throw ValidationError("inf_v_second: gamma must be > 0");
  auto v2 = [&](double x) { return potential_terms(prior, gamma, x).d2; };
  const double inv_phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double x_max =
      8.0 * (1.0 + std::sqrt(gamma + 1.0)) * std::max(1.0, slab_scale(prior.slab));
  for (int growth = 0; growth < 60; ++growth, x_max *= 2.0) {
    // grid: zero plus log-spaced points over six decades below x_max
    constexpr int kGridPoints = 480;
    const double x_lo = x_max * 1e-6;
    const double ratio = std::pow(x_max / x_lo, 1.0 / (kGridPoints - 1));
    double best_x = 0.0;
    double best_v = v2(0.0);
    double prev_x = 0.0;
    double bracket_lo = 0.0, bracket_hi = x_lo;
    double xg = x_lo;
    for (int i = 0; i < kGridPoints; ++i, xg *= ratio) {
      const double v = v2(xg);
      if (v < best_v) {
        best_v = v;
        best_x = xg;
        bracket_lo = prev_x;
        bracket_hi = std::min(xg * ratio, x_max);
      }
      prev_x = xg;
    }
    // golden-section refinement of the bracket around the grid argmin
    // (when the argmin is the origin the bracket is [0, first grid point])
    double lo = bracket_lo, hi = bracket_hi;
    double m1 = hi - inv_phi * (hi - lo);
    double m2 = lo + inv_phi * (hi - lo);
    double v1 = v2(m1), vz = v2(m2);
    for (int it = 0; it < 240 && hi - lo > 1e-7; ++it) {
      if (v1 > vz) {
        lo = m1;
        m1 = m2;
        v1 = vz;
        m2 = lo + inv_phi * (hi - lo);
        vz = v2(m2);
      } else {
        hi = m2;
        m2 = m1;
        vz = v1;
        m1 = hi - inv_phi * (hi - lo);
        v1 = v2(m1);
      }
    }
    const double x_ref = 0.5 * (lo + hi);
    const double v_ref = v2(x_ref);
    if (v_ref < best_v) {
      best_v = v_ref;
      best_x = x_ref;
    }
    if (v2(x_max) > (1.0 - 1e-3) * best_v)
      return InfVSecond{std::min(best_v, 0.0), best_x};
  }
  throw ConvergenceError(
      "inf_v_second: tail growth did not certify the infimum after 60 "
      "doublings of the search range");
}

}  // namespace spikeslab
