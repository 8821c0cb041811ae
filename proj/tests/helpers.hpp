#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include <spikeslab/common.hpp>
#include <spikeslab/quadrature.hpp>
#include <spikeslab/slab.hpp>
#include <spikeslab/special.hpp>

namespace spikeslab::testing {

// Two-sided Kolmogorov-Smirnov statistic of samples against a reference cdf.
// The alpha = 0.01 rejection threshold is 1.63 / sqrt(n).
inline double ks_statistic(std::vector<double> samples,
                           const std::function<double(double)>& cdf) {
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    d = std::max(d, f - static_cast<double>(i) / n);
    d = std::max(d, static_cast<double>(i + 1) / n - f);
  }
  return d;
}

inline double sample_mean(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

inline double sample_variance(const std::vector<double>& xs) {
  const double m = sample_mean(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return s / static_cast<double>(xs.size() - 1);
}

inline std::vector<double> to_std(const Vector& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

// Central finite differences on a scalar function.
inline double fd_first(const std::function<double(double)>& f, double x,
                       double h) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

inline double fd_second(const std::function<double(double)>& f, double x,
                        double h) {
  return (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
}

inline double rel_err(double got, double want) {
  return std::abs(got - want) / std::max(1.0, std::abs(want));
}

// Standard logistic density expressed as a generic slab: unit scale,
// variance pi^2 / 3, cdf sigmoid(x).
inline GenericSlab logistic_slab() {
  GenericSlab gen;
  gen.log_density = [](double x) {
    return -std::abs(x) - 2.0 * log1pexp(-std::abs(x));
  };
  gen.tail_order = 1;
  gen.c1 = 0.1;
  gen.c2 = 1.0;
  return gen;
}

// Quadrature oracle for the tilted moments: the transform g(x) integrates
// f(theta) exp(x theta - gamma theta^2 / 2), and d1_ratio / cond_variance
// are the mean and variance of the corresponding tilted density.
struct TiltedOracle {
  double log_g, mean, variance;
};

inline TiltedOracle tilted_oracle(const SlabFamily& slab, double gamma,
                                  double x) {
  const double scale = slab_scale(slab);
  const double center = x / gamma;
  const double scan_lo = std::min(-10.0 * scale, center - 14.0 / std::sqrt(gamma));
  const double scan_hi = std::max(10.0 * scale, center + 14.0 / std::sqrt(gamma));
  auto log_tilt = [&](double t) {
    return slab_log_density(slab, t) + x * t - 0.5 * gamma * t * t;
  };
  // Locate the tilted mode by scanning, then integrate a window around it:
  // the tilted variance is at most 1/gamma, so +-30/sqrt(gamma) captures
  // all mass while keeping the peak resolvable by adaptive bisection.
  double shift = log_tilt(center);
  double peak = center;
  for (int i = 0; i <= 2000; ++i) {
    const double t = scan_lo + (scan_hi - scan_lo) * i / 2000.0;
    if (log_tilt(t) > shift) {
      shift = log_tilt(t);
      peak = t;
    }
  }
  const double w = 30.0 / std::sqrt(gamma);
  const double lo = peak - w, hi = peak + w;
  // Split at the density kink (x = 0 for Laplace-like slabs) and at the
  // peak: both can otherwise align with quadrature nodes in ways that fool
  // the Gauss-Kronrod error estimate.
  std::vector<double> cuts = {lo, hi, peak};
  if (lo < 0.0 && 0.0 < hi) cuts.push_back(0.0);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  const IntegrationOptions opt{1e-13, 1e-13, 4000};
  auto piecewise = [&](const std::function<double(double)>& f) {
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
      if (cuts[i] < cuts[i + 1])
        total += integrate_or_throw(f, cuts[i], cuts[i + 1], opt);
    return total;
  };
  const double z =
      piecewise([&](double t) { return std::exp(log_tilt(t) - shift); });
  const double m1 =
      piecewise([&](double t) { return t * std::exp(log_tilt(t) - shift); });
  const double mean = m1 / z;
  const double m2 = piecewise([&](double t) {
    return (t - mean) * (t - mean) * std::exp(log_tilt(t) - shift);
  });
  return TiltedOracle{std::log(z) + shift, mean, m2 / z};
}

}  // namespace spikeslab::testing
