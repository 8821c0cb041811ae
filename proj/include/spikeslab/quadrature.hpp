#pragma once

// Globally adaptive Gauss-Kronrod (7,15) integration plus fixed-order
// Gauss-Legendre rules.  Used for slab normalization checks, generic slab
// transforms, and the one-dimensional decomposition consistency check.

#include <cmath>
#include <numbers>
#include <queue>
#include <utility>
#include <vector>

#include "spikeslab/common.hpp"

namespace spikeslab {

struct IntegrationOptions {
  double abs_tol = 1e-10;
  double rel_tol = 1e-10;
  int max_segments = 2000;
};

struct IntegrationResult {
  double value = 0.0;
  double error = 0.0;       // estimated absolute error
  int segments = 0;
  bool converged = false;
};

namespace detail {

// 15-point Kronrod nodes on [0, 1] side of the symmetric rule and the
// matching weights; odd positions carry the embedded 7-point Gauss rule.
inline constexpr double kKronrodNodes[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144838258730, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0};
inline constexpr double kKronrodWeights[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr double kGaussWeights[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Segment {
  double a, b, value, error;
};

template <typename F>
Segment gk15_segment(const F& f, double a, double b) {
  const double hw = 0.5 * (b - a);
  const double c = 0.5 * (a + b);
  const double fc = f(c);
  double resk = fc * kKronrodWeights[7];
  double resg = fc * kGaussWeights[3];
  for (int j = 0; j < 7; ++j) {
    const double dx = hw * kKronrodNodes[j];
    const double f1 = f(c - dx);
    const double f2 = f(c + dx);
    resk += kKronrodWeights[j] * (f1 + f2);
    if (j % 2 == 1) resg += kGaussWeights[(j - 1) / 2] * (f1 + f2);
  }
  return Segment{a, b, resk * hw, std::fabs((resk - resg) * hw)};
}

}  // namespace detail

// Integrates f over [a, b], bisecting the segment with the largest error
// estimate until the total estimate meets max(abs_tol, rel_tol * |value|).
template <typename F>
IntegrationResult integrate(const F& f, double a, double b,
                            const IntegrationOptions& opt = {}) {
  if (!(a < b)) throw ValidationError("integrate: requires a < b");
  auto worse = [](const detail::Segment& s, const detail::Segment& t) {
    return s.error < t.error;
  };
  std::priority_queue<detail::Segment, std::vector<detail::Segment>,
                      decltype(worse)>
      queue(worse);
  detail::Segment first = detail::gk15_segment(f, a, b);
  double total_value = first.value;
  double total_error = first.error;
  queue.push(first);
  int segments = 1;
  while (total_error > std::max(opt.abs_tol, opt.rel_tol * std::fabs(total_value)) &&
         segments < opt.max_segments) {
    const detail::Segment s = queue.top();
    queue.pop();
    const double mid = 0.5 * (s.a + s.b);
    if (mid <= s.a || mid >= s.b) break;  // interval at machine resolution
    const detail::Segment left = detail::gk15_segment(f, s.a, mid);
    const detail::Segment right = detail::gk15_segment(f, mid, s.b);
    total_value += left.value + right.value - s.value;
    total_error += left.error + right.error - s.error;
    queue.push(left);
    queue.push(right);
    ++segments;
  }
  IntegrationResult result;
  result.value = total_value;
  result.error = total_error;
  result.segments = segments;
  result.converged =
      total_error <= std::max(opt.abs_tol, opt.rel_tol * std::fabs(total_value));
  return result;
}

// Same, but a failure to converge is an error with a diagnostic message
// instead of a silently inaccurate value.
template <typename F>
double integrate_or_throw(const F& f, double a, double b,
                          const IntegrationOptions& opt = {},
                          const char* what = "integrand") {
  const IntegrationResult r = integrate(f, a, b, opt);
  if (!r.converged) {
    throw QuadratureError(std::string("adaptive quadrature did not converge for ") +
                          what + ": estimated error " + std::to_string(r.error) +
                          " after " + std::to_string(r.segments) + " segments on [" +
                          std::to_string(a) + ", " + std::to_string(b) + "]");
  }
  return r.value;
}

// Gauss-Legendre nodes and weights on [-1, 1] (Newton iteration on the
// Legendre recurrence).  Deterministic and accurate to ~1e-15.
inline std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int n) {
  if (n < 1) throw ValidationError("gauss_legendre: order must be >= 1");
  std::vector<double> x(n), w(n);
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p1 = 1.0, p2 = 0.0;
      for (int j = 1; j <= n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j - 1.0) * z * p2 - (j - 1.0) * p3) / j;
      }
      pp = n * (z * p1 - p2) / (z * z - 1.0);
      const double dz = p1 / pp;
      z -= dz;
      if (std::fabs(dz) < 1e-15) break;
    }
    x[i] = -z;
    x[n - 1 - i] = z;
    w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
    w[n - 1 - i] = w[i];
  }
  return {std::move(x), std::move(w)};
}

}  // namespace spikeslab
