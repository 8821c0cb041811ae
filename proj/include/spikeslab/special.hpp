#pragma once

// Scaled complementary error function, log-domain tail helpers, and the
// normal quantile.  The slab transforms and truncated-normal sampling in
// this library run entirely in log space so that |x| of order 1e3 (which
// makes exp(x^2/...) overflow long before) stays representable.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "spikeslab/common.hpp"

namespace spikeslab {

// erfcx(x) = exp(x^2) * erfc(x).  Rational approximations from Cody's
// SPECFUN CALERF, accurate to ~1e-16 relative over the whole range.
// Overflows (returns +inf) for x < -26.628 where exp(x^2) does.
inline double erfcx(double x) {
  static constexpr double kA[5] = {
      3.16112374387056560e00, 1.13864154151050156e02, 3.77485237685302021e02,
      3.20937758913846947e03, 1.85777706184603153e-1};
  static constexpr double kB[4] = {
      2.36012909523441209e01, 2.44024637934444173e02, 1.28261652607737228e03,
      2.84423683343917062e03};
  static constexpr double kC[9] = {
      5.64188496988670089e-1, 8.88314979438837594e00, 6.61191906371416295e01,
      2.98635138197400131e02, 8.81952221241769090e02, 1.71204761263407058e03,
      2.05107837782607147e03, 1.23033935479799725e03, 2.15311535474403846e-8};
  static constexpr double kD[8] = {
      1.57449261107098347e01, 1.17693950891312499e02, 5.37181101862009858e02,
      1.62138957456669019e03, 3.29079923573345963e03, 4.36261909014324716e03,
      3.43936767414372164e03, 1.23033935480374942e03};
  static constexpr double kP[6] = {
      3.05326634961232344e-1, 3.60344899949804439e-1, 1.25781726111229246e-1,
      1.60837851487422766e-2, 6.58749161529837803e-4, 1.63153871373020978e-2};
  static constexpr double kQ[5] = {
      2.56852019228982242e00, 1.87295284992346047e00, 5.27905102951428412e-1,
      6.05183413124413191e-2, 2.33520497626869185e-3};
  static constexpr double kSqrtPiInv = 5.6418958354775628695e-1;
  static constexpr double kXNeg = -26.628;
  static constexpr double kXSmall = 1.11e-16;
  static constexpr double kXHuge = 6.71e7;
  static constexpr double kXMax = 2.53e307;

  const double y = std::fabs(x);
  double result;
  if (y <= 0.46875) {
    const double ysq = (y > kXSmall) ? y * y : 0.0;
    double xnum = kA[4] * ysq;
    double xden = ysq;
    for (int i = 0; i < 3; ++i) {
      xnum = (xnum + kA[i]) * ysq;
      xden = (xden + kB[i]) * ysq;
    }
    const double erf_x = x * (xnum + kA[3]) / (xden + kB[3]);
    return std::exp(ysq) * (1.0 - erf_x);
  } else if (y <= 4.0) {
    double xnum = kC[8] * y;
    double xden = y;
    for (int i = 0; i < 7; ++i) {
      xnum = (xnum + kC[i]) * y;
      xden = (xden + kD[i]) * y;
    }
    result = (xnum + kC[7]) / (xden + kD[7]);
  } else {
    if (y >= kXMax) {
      result = 0.0;
    } else if (y >= kXHuge) {
      result = kSqrtPiInv / y;
    } else {
      const double ysq = 1.0 / (y * y);
      double xnum = kP[5] * ysq;
      double xden = ysq;
      for (int i = 0; i < 4; ++i) {
        xnum = (xnum + kP[i]) * ysq;
        xden = (xden + kQ[i]) * ysq;
      }
      result = ysq * (xnum + kP[4]) / (xden + kQ[4]);
      result = (kSqrtPiInv - result) / y;
    }
  }
  if (x < 0.0) {
    if (x < kXNeg) return std::numeric_limits<double>::infinity();
    // erfcx(x) = 2 exp(x^2) - erfcx(-x); split x^2 for a correctly rounded exp
    const double ysq = std::trunc(x * 16.0) / 16.0;
    const double del = (x - ysq) * (x + ysq);
    const double e = std::exp(ysq * ysq) * std::exp(del);
    result = (e + e) - result;
  }
  return result;
}

// log(erfcx(x)), finite for all finite x (erfcx itself overflows for
// x < -26.628).  For x < 0 uses erfcx(x) = e^{x^2} (2 - erfc(-x)).
inline double log_erfcx(double x) {
  if (x >= 0.0) return std::log(erfcx(x));
  const double t = -x;
  if (t > 26.5) return x * x + std::numbers::ln2;  // erfc(t) < 1e-305
  return x * x + std::log(2.0 - std::erfc(t));
}

inline double log_normal_pdf(double z) {
  return -0.5 * z * z - 0.5 * std::log(2.0 * std::numbers::pi);
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

inline double normal_sf(double z) { return 0.5 * std::erfc(z / std::numbers::sqrt2); }

// log of the upper tail Q(z) = P(Z > z); finite for all finite z.
inline double log_normal_sf(double z) {
  return -std::numbers::ln2 + log_erfcx(z / std::numbers::sqrt2) - 0.5 * z * z;
}

// log(exp(a) + exp(b)) without overflow; handles -inf inputs.
inline double logsumexp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double m = (a > b) ? a : b;
  return m + std::log1p(std::exp(-std::fabs(a - b)));
}

// log sum of exponentials of a whole collection, shifted by its maximum.
inline double logsumexp(const std::vector<double>& values) {
  if (values.empty()) return -std::numeric_limits<double>::infinity();
  double m = -std::numeric_limits<double>::infinity();
  for (double v : values) m = std::max(m, v);
  if (m == -std::numeric_limits<double>::infinity()) return m;
  double s = 0.0;
  for (double v : values) s += std::exp(v - m);
  return m + std::log(s);
}

// log(1 + exp(x)) without overflow.
inline double log1pexp(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

// 1 / (1 + exp(-s)) evaluated stably from either tail.
inline double sigmoid(double s) {
  if (s >= 0.0) return 1.0 / (1.0 + std::exp(-s));
  const double e = std::exp(s);
  return e / (1.0 + e);
}

// Inverse standard normal CDF (Acklam's rational approximation plus one
// Halley step against erfc, giving close to full double precision).
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw ValidationError("normal_quantile: p must lie strictly in (0, 1)");
  static constexpr double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                  -2.759285104469687e+02, 1.383577518672690e+02,
                                  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                  -1.556989798598866e+02, 6.680131188771972e+01,
                                  -1.328068155288572e+01};
  static constexpr double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                  -2.400758277161838e+00, -2.549732539343734e+00,
                                  4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                  2.445134137142996e+00, 3.754408661907416e+00};
  static constexpr double p_low = 0.02425;

  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // Halley refinement: e = Phi(x) - p
  const double e = 0.5 * std::erfc(-x / std::numbers::sqrt2) - p;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

// Solves log Q(z) = log_q for z, where Q is the normal upper tail.  Works
// for arbitrarily small tails (log_q ~ -1e6) where the probability itself
// underflows.  Newton iteration on log Q, which is concave in z.
inline double normal_quantile_from_log_sf(double log_q) {
  if (!(log_q < 0.0))
    throw ValidationError("normal_quantile_from_log_sf: log_q must be negative");
  double z;
  if (log_q > -690.0) {
    const double q = std::exp(log_q);
    z = (q >= 1.0 - 1e-16) ? -8.3 : -normal_quantile(q);
  } else {
    // Q(z) ~ phi(z)/z: bootstrap the asymptotic inversion
    double t = std::sqrt(-2.0 * log_q);
    for (int i = 0; i < 3; ++i) {
      t = std::sqrt(-2.0 * (log_q + std::log(t) +
                            0.5 * std::log(2.0 * std::numbers::pi)));
    }
    z = t;
  }
  for (int iter = 0; iter < 60; ++iter) {
    const double f = log_normal_sf(z) - log_q;
    const double dlog = log_normal_pdf(z) - log_normal_sf(z);
    const double step = f * std::exp(-dlog);  // f / f' with f' = -pdf/Q
    z += step;
    if (std::fabs(step) < 1e-13 * (1.0 + std::fabs(z))) break;
  }
  return z;
}

}  // namespace spikeslab
