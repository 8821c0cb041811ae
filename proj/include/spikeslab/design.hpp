#pragma once

// Design-matrix ensembles and synthetic data generation for y = X theta + eps.
// Every generator is a pure function of (spec, seed); rows use per-row child
// streams so parallel generation would be order-independent.

#include <cmath>
#include <functional>
#include <memory>
#include <variant>

#include "spikeslab/common.hpp"
#include "spikeslab/rng.hpp"
#include "spikeslab/slab.hpp"

namespace spikeslab {

struct IidGaussian {
  double variance;  // per-entry variance
};

// Rows are N(0, Sigma) with AR(1) covariance Sigma_ij = rho^|i-j|.
struct CorrelatedGaussian {
  double rho;
};

// Rows have i.i.d. entries from a caller-supplied zero-mean unit-variance
// sampler (trusted; no moment checks at construction).
struct IidGeneric {
  std::function<double(RngStream&)> draw;
};

using DesignSpec = std::variant<IidGaussian, CorrelatedGaussian, IidGeneric>;

inline DesignSpec make_design(DesignSpec spec) {
  if (const auto* g = std::get_if<IidGaussian>(&spec)) {
    if (!(g->variance > 0.0))
      throw ValidationError("IidGaussian: entry variance must be > 0");
  } else if (const auto* c = std::get_if<CorrelatedGaussian>(&spec)) {
    if (!(c->rho >= 0.0 && c->rho < 1.0))
      throw ValidationError("CorrelatedGaussian: rho must lie in [0, 1)");
  } else if (!std::get<IidGeneric>(spec).draw) {
    throw ValidationError("IidGeneric: missing entry sampler");
  }
  return spec;
}

struct RegressionInstance {
  Matrix X;
  Vector y;
  double sigma_d;
};

// n x d design with i.i.d. rows per spec; deterministic in seed.
inline Matrix generate_design(const DesignSpec& spec, int n, int d,
                              std::uint64_t seed) {
  if (n < 1 || d < 1)
    throw ValidationError("generate_design: n and d must be positive");
  Matrix X(n, d);
  RngStream master(seed);
  for (int i = 0; i < n; ++i) {
    RngStream row = master.child(static_cast<std::uint64_t>(i));
    if (const auto* g = std::get_if<IidGaussian>(&spec)) {
      const double s = std::sqrt(g->variance);
      for (int j = 0; j < d; ++j) X(i, j) = s * row.normal();
    } else if (const auto* c = std::get_if<CorrelatedGaussian>(&spec)) {
      // AR(1) recursion = bidiagonal Cholesky factor of the Toeplitz Sigma
      const double rho = c->rho;
      const double s = std::sqrt(1.0 - rho * rho);
      double prev = row.normal();
      X(i, 0) = prev;
      for (int j = 1; j < d; ++j) {
        prev = rho * prev + s * row.normal();
        X(i, j) = prev;
      }
    } else {
      const auto& gen = std::get<IidGeneric>(spec);
      for (int j = 0; j < d; ++j) X(i, j) = gen.draw(row);
    }
  }
  return X;
}

// One prior draw: each coordinate is 0 with probability 1-q, else a slab
// draw.  Generic slabs sample through a tabulated inverse CDF built once.
inline Vector sample_prior(const SpikeSlabPrior& prior, int d, std::uint64_t seed) {
  if (d < 1) throw ValidationError("sample_prior: d must be positive");
  Vector theta(d);
  RngStream rng(seed);
  const GenericSlab* gen = std::get_if<GenericSlab>(&prior.slab);
  std::unique_ptr<TabulatedInverseCdf> table;
  if (gen) {
    const double reach = detail::generic_slab_reach(*gen);
    table = std::make_unique<TabulatedInverseCdf>(gen->log_density, -reach, reach);
  }
  for (int i = 0; i < d; ++i) {
    if (rng.uniform() >= prior.q) {
      theta[i] = 0.0;
    } else if (const auto* g = std::get_if<GaussianSlab>(&prior.slab)) {
      theta[i] = sample_slab(*g, rng);
    } else if (const auto* l = std::get_if<LaplaceSlab>(&prior.slab)) {
      theta[i] = sample_slab(*l, rng);
    } else {
      theta[i] = sample_slab(*gen, rng, *table);
    }
  }
  return theta;
}

inline Vector generate_response(const Matrix& X, const Vector& theta,
                                double sigma_d, std::uint64_t seed) {
  if (X.cols() != theta.size())
    throw ValidationError("generate_response: X columns and theta length differ");
  if (!(sigma_d > 0.0))
    throw ValidationError("generate_response: sigma_d must be > 0");
  Vector y = X * theta;
  RngStream rng(seed);
  for (Eigen::Index i = 0; i < y.size(); ++i) y[i] += sigma_d * rng.normal();
  return y;
}

}  // namespace spikeslab
