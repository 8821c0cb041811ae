#pragma once

// Brute-force reference posterior for small d with a Gaussian slab: all 2^d
// support patterns are enumerated with exact per-pattern evidence, giving
// marginals, moments, and exact samples to test the MCMC pipeline against.
// Also provides a d = 1 consistency check between the direct posterior and
// its auxiliary-field representation.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>

#include "spikeslab/common.hpp"
#include "spikeslab/decomposition.hpp"
#include "spikeslab/potential.hpp"
#include "spikeslab/quadrature.hpp"
#include "spikeslab/rng.hpp"
#include "spikeslab/slab.hpp"
#include "spikeslab/special.hpp"

namespace spikeslab {

struct PatternConditional {
  std::vector<int> support;  // active coordinate indices, increasing
  Vector mean;
  Matrix cov;
};

struct MarginalQuery {
  double atom_probability;  // P(theta_i = 0)
  double cdf;               // P(theta_i <= t), atom included when t >= 0
};

struct MarginalMoments {
  double atom_probability;
  double mean;
  double variance;
};

class ExactPosterior {
 public:
  ExactPosterior(const Matrix& X, const Vector& y, double sigma_d,
                 double q, double slab_variance)
      : n_(static_cast<int>(X.rows())), d_(static_cast<int>(X.cols())),
        q_(q), v_(slab_variance) {
    if (d_ < 1 || n_ < 1)
      throw ValidationError("ExactPosterior: X must be nonempty");
    if (d_ > 20)
      throw ValidationError("ExactPosterior: enumeration is limited to d <= 20");
    if (y.size() != n_)
      throw ValidationError("ExactPosterior: y length must match rows of X");
    if (!(sigma_d > 0.0))
      throw ValidationError("ExactPosterior: sigma_d must be > 0");
    if (!(q > 0.0 && q < 1.0))
      throw ValidationError("ExactPosterior: q must lie in (0, 1)");
    if (!(slab_variance > 0.0))
      throw ValidationError("ExactPosterior: slab variance must be > 0");
    const double s2 = sigma_d * sigma_d;
    gram_ = (X.transpose() * X) / s2;
    xty_ = X.transpose() * y / s2;
    yty_ = y.squaredNorm() / s2;
    const double log_sigma2 = 2.0 * std::log(sigma_d);
    const double log_q = std::log(q_), log_1mq = std::log1p(-q_);
    const double log_v = std::log(v_);
    const std::uint32_t count = 1u << d_;
    std::vector<double> log_w(count);
    constexpr double kLog2Pi = 1.8378770664093454836;
    for (std::uint32_t mask = 0; mask < count; ++mask) {
      const int s = std::popcount(mask);
      double logdet_m = 0.0, quad = 0.0;
      if (s > 0) {
        Matrix m;
        Vector b;
        gather(mask, m, b);
        Eigen::LLT<Matrix> llt(m);
        if (llt.info() != Eigen::Success)
          throw LinAlgError("ExactPosterior: pattern precision not PD");
        logdet_m =
            2.0 * Matrix(llt.matrixL()).diagonal().array().log().sum();
        quad = b.dot(llt.solve(b));
      }
      const double logdet_c = n_ * log_sigma2 + s * log_v + logdet_m;
      const double log_marginal =
          -0.5 * (n_ * kLog2Pi + logdet_c + (yty_ - quad));
      log_w[mask] = s * log_q + (d_ - s) * log_1mq + log_marginal;
    }
    log_evidence_ = logsumexp(log_w);
    log_weights_.resize(count);
    cumulative_.resize(count);
    double running = 0.0;
    for (std::uint32_t mask = 0; mask < count; ++mask) {
      log_weights_[mask] = log_w[mask] - log_evidence_;
      running += std::exp(log_weights_[mask]);
      cumulative_[mask] = running;
    }
    cumulative_.back() = 1.0;
  }

  int n() const { return n_; }
  int d() const { return d_; }
  double q() const { return q_; }
  double slab_variance() const { return v_; }
  double log_evidence() const { return log_evidence_; }
  const std::vector<double>& log_weights() const { return log_weights_; }

  double pattern_probability(std::uint32_t mask) const {
    return std::exp(log_weights_.at(mask));
  }

  // Gaussian law of theta restricted to an active pattern.
  PatternConditional conditional(std::uint32_t mask) const {
    check_mask(mask);
    PatternConditional out;
    for (int i = 0; i < d_; ++i)
      if (mask & (1u << i)) out.support.push_back(i);
    const int s = static_cast<int>(out.support.size());
    if (s == 0) {
      out.mean = Vector();
      out.cov = Matrix();
      return out;
    }
    Matrix m;
    Vector b;
    gather(mask, m, b);
    Eigen::LLT<Matrix> llt(m);
    if (llt.info() != Eigen::Success)
      throw LinAlgError("ExactPosterior: pattern precision not PD");
    out.mean = llt.solve(b);
    out.cov = llt.solve(Matrix::Identity(s, s));
    return out;
  }

  MarginalQuery marginal_query(int coordinate, double t) const {
    const auto& cache = coordinate_cache(coordinate);
    double atom = 0.0, cdf = 0.0;
    const std::uint32_t bit = 1u << coordinate;
    for (std::uint32_t mask = 0; mask < log_weights_.size(); ++mask) {
      const double w = std::exp(log_weights_[mask]);
      if (!(mask & bit)) {
        atom += w;
        if (t >= 0.0) cdf += w;
      } else {
        const auto& [mu, var] = cache[mask];
        cdf += w * normal_cdf((t - mu) / std::sqrt(var));
      }
    }
    return MarginalQuery{atom, cdf};
  }

  MarginalMoments marginal_moments(int coordinate) const {
    const auto& cache = coordinate_cache(coordinate);
    double atom = 0.0, mean = 0.0, second = 0.0;
    const std::uint32_t bit = 1u << coordinate;
    for (std::uint32_t mask = 0; mask < log_weights_.size(); ++mask) {
      const double w = std::exp(log_weights_[mask]);
      if (!(mask & bit)) {
        atom += w;
        continue;
      }
      const auto& [mu, var] = cache[mask];
      mean += w * mu;
      second += w * (var + mu * mu);
    }
    return MarginalMoments{atom, mean, second - mean * mean};
  }

  // Exact draw: pick a pattern by its posterior weight, then draw the
  // active block from its Gaussian conditional.
  Vector sample(RngStream& rng) const {
    const double u = rng.uniform();
    const auto it =
        std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    const std::uint32_t mask = static_cast<std::uint32_t>(
        std::min<std::ptrdiff_t>(it - cumulative_.begin(),
                                 static_cast<std::ptrdiff_t>(cumulative_.size()) - 1));
    Vector theta = Vector::Zero(d_);
    const int s = std::popcount(mask);
    if (s == 0) return theta;
    Matrix m;
    Vector b;
    gather(mask, m, b);
    Eigen::LLT<Matrix> llt(m);
    if (llt.info() != Eigen::Success)
      throw LinAlgError("ExactPosterior: pattern precision not PD");
    const Vector mean = llt.solve(b);
    Vector zeta(s);
    for (int j = 0; j < s; ++j) zeta[j] = rng.normal();
    const Vector active = mean + llt.matrixU().solve(zeta);
    int j = 0;
    for (int i = 0; i < d_; ++i)
      if (mask & (1u << i)) theta[i] = active[j++];
    return theta;
  }

 private:
  void check_mask(std::uint32_t mask) const {
    if (mask >= (1u << d_))
      throw ValidationError("ExactPosterior: pattern mask out of range");
  }

  // M = (X^T X)_S / sigma^2 + I/v and b = (X^T y)_S / sigma^2 for the
  // active pattern, gathered from the precomputed full-gram blocks.
  void gather(std::uint32_t mask, Matrix& m, Vector& b) const {
    std::vector<int> idx;
    for (int i = 0; i < d_; ++i)
      if (mask & (1u << i)) idx.push_back(i);
    const int s = static_cast<int>(idx.size());
    m.resize(s, s);
    b.resize(s);
    for (int r = 0; r < s; ++r) {
      b[r] = xty_[idx[r]];
      for (int c = 0; c < s; ++c) m(r, c) = gram_(idx[r], idx[c]);
      m(r, r) += 1.0 / v_;
    }
  }

  // Marginal mean/variance of one coordinate under every pattern that
  // activates it, cached for the most recently queried coordinate only
  // (keeps memory flat at d = 20).
  const std::vector<std::pair<double, double>>& coordinate_cache(
      int coordinate) const {
    if (coordinate < 0 || coordinate >= d_)
      throw ValidationError("ExactPosterior: coordinate out of range");
    if (cached_coordinate_ == coordinate) return cache_;
    cache_.assign(log_weights_.size(), {0.0, 0.0});
    const std::uint32_t bit = 1u << coordinate;
    for (std::uint32_t mask = 0; mask < log_weights_.size(); ++mask) {
      if (!(mask & bit)) continue;
      Matrix m;
      Vector b;
      gather(mask, m, b);
      Eigen::LLT<Matrix> llt(m);
      if (llt.info() != Eigen::Success)
        throw LinAlgError("ExactPosterior: pattern precision not PD");
      int pos = 0;
      for (int i = 0; i < coordinate; ++i)
        if (mask & (1u << i)) ++pos;
      const Vector mean = llt.solve(b);
      Vector e = Vector::Zero(mean.size());
      e[pos] = 1.0;
      const double var = llt.solve(e)[pos];
      cache_[mask] = {mean[pos], var};
    }
    cached_coordinate_ = coordinate;
    return cache_;
  }

  int n_, d_;
  double q_, v_;
  Matrix gram_;
  Vector xty_;
  double yty_ = 0.0;
  double log_evidence_ = 0.0;
  std::vector<double> log_weights_;
  std::vector<double> cumulative_;
  mutable int cached_coordinate_ = -1;
  mutable std::vector<std::pair<double, double>> cache_;
};

inline ExactPosterior enumerate_exact_posterior(const Matrix& X, const Vector& y,
                                                double sigma_d,
                                                const SpikeSlabPrior& prior) {
  const auto* slab = std::get_if<GaussianSlab>(&prior.slab);
  if (!slab)
    throw ValidationError(
        "enumerate_exact_posterior: only the Gaussian slab is supported");
  return ExactPosterior(X, y, sigma_d, prior.q, slab->variance);
}

struct ConsistencyResult {
  double max_abs_diff;   // over the theta grid plus the atom
  double atom_route_a;   // normalized atom mass, direct route
  double atom_route_b;   // normalized atom mass, field route
};

// d = 1 check that the auxiliary-field representation reproduces the
// direct posterior.  Route A evaluates the unnormalized posterior density
// on a theta grid; route B integrates the joint over phi with
// Gauss-Legendre nodes.  Both are normalized with the same trapezoid rule
// so any discrepancy is pure phi-quadrature error, which must vanish as
// the node count grows.
inline ConsistencyResult decomposition_consistency_check(
    const Decomposition& decomp, const SpikeSlabPrior& prior,
    int phi_nodes = 400, int theta_grid = 200) {
  if (decomp.d() != 1)
    throw ValidationError("consistency check: requires d = 1");
  if (phi_nodes < 2 || theta_grid < 10)
    throw ValidationError("consistency check: node counts too small");
  const double gamma = decomp.gamma();
  const double a = decomp.A()(0, 0);
  const double s = gamma - a;  // X^T X / sigma^2
  const double h = decomp.h()[0];
  const double log_q = std::log(prior.q);
  const double log_1mq = std::log1p(-prior.q);

  // grid wide enough for both prior-dominated and likelihood-dominated mass
  const double scale = slab_scale(prior.slab);
  const double center = s > 0.0 ? h / s : 0.0;
  const double width = 1.0 / std::sqrt(s + 1.0 / (scale * scale));
  const double lo = std::min(-6.0 * scale, center - 8.0 * width);
  const double hi = std::max(6.0 * scale, center + 8.0 * width);
  Vector grid(theta_grid);
  for (int i = 0; i < theta_grid; ++i)
    grid[i] = lo + (hi - lo) * i / (theta_grid - 1);

  // route A: log u_A(theta) = log q + log f + h theta - s theta^2 / 2
  Vector log_ua(theta_grid);
  for (int i = 0; i < theta_grid; ++i) {
    const double t = grid[i];
    log_ua[i] = log_q + slab_log_density(prior.slab, t) + h * t -
                0.5 * s * t * t;
  }
  const double log_atom_a = log_1mq;

  // route B: same with exp(A theta^2 / 2) replaced by the GL integral of
  // exp(theta phi - phi^2 / (2A)) over phi in [A theta +- 10 sqrt(A)]
  const auto [nodes, weights] = gauss_legendre(phi_nodes);
  const double root_a = std::sqrt(a);
  auto log_phi_integral = [&](double theta) {
    const double c = a * theta;
    std::vector<double> terms(static_cast<std::size_t>(phi_nodes));
    for (int k = 0; k < phi_nodes; ++k) {
      const double phi = c + 10.0 * root_a * nodes[k];
      terms[static_cast<std::size_t>(k)] =
          std::log(weights[k] * 10.0 * root_a) + theta * phi -
          phi * phi / (2.0 * a);
    }
    return logsumexp(terms);
  };
  Vector log_ub(theta_grid);
  for (int i = 0; i < theta_grid; ++i) {
    const double t = grid[i];
    log_ub[i] = log_q + slab_log_density(prior.slab, t) + h * t -
                0.5 * gamma * t * t + log_phi_integral(t);
  }
  const double log_atom_b = log_1mq + log_phi_integral(0.0);

  // shared trapezoid normalization over the grid plus the atom
  auto normalize = [&](const Vector& log_u, double log_atom, double& atom_out) {
    const double peak = std::max(log_u.maxCoeff(), log_atom);
    Vector u = (log_u.array() - peak).exp();
    double mass = 0.0;
    for (int i = 0; i + 1 < theta_grid; ++i)
      mass += 0.5 * (u[i] + u[i + 1]) * (grid[i + 1] - grid[i]);
    const double atom = std::exp(log_atom - peak);
    const double z = mass + atom;
    atom_out = atom / z;
    return Vector(u / z);
  };
  ConsistencyResult out{};
  const Vector pa = normalize(log_ua, log_atom_a, out.atom_route_a);
  const Vector pb = normalize(log_ub, log_atom_b, out.atom_route_b);
  out.max_abs_diff = (pa - pb).cwiseAbs().maxCoeff();
  out.max_abs_diff =
      std::max(out.max_abs_diff, std::abs(out.atom_route_a - out.atom_route_b));
  return out;
}

}  // namespace spikeslab
