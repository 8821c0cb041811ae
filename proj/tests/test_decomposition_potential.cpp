#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include <spikeslab/decomposition.hpp>
#include <spikeslab/design.hpp>
#include <spikeslab/potential.hpp>
#include <spikeslab/quadrature.hpp>
#include <spikeslab/special.hpp>

#include "helpers.hpp"

using namespace spikeslab;
using namespace spikeslab::testing;

TEST_CASE("decomposition reconstructs A and h exactly") {
  const Matrix X = generate_design(IidGaussian{1.0}, 30, 4, 2);
  const Vector theta = sample_prior(make_prior(0.4, GaussianSlab{1.0}), 4, 3);
  const Vector y = generate_response(X, theta, 1.3, 4);
  const double s2 = 1.3 * 1.3;
  const Decomposition decomp(X, y, 1.3, AutoGamma{});

  const Matrix gram = X.transpose() * X / s2;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
  REQUIRE(std::abs(decomp.lambda_max() - eig.eigenvalues().maxCoeff()) < 1e-10);
  REQUIRE(std::abs(decomp.lambda_min() - eig.eigenvalues().minCoeff()) < 1e-10);
  REQUIRE(std::abs(decomp.gamma() - (decomp.lambda_max() + 0.1)) < 1e-12);

  const Matrix A_expect = decomp.gamma() * Matrix::Identity(4, 4) - gram;
  REQUIRE((decomp.A() - A_expect).cwiseAbs().maxCoeff() < 1e-12);
  REQUIRE((decomp.h() - X.transpose() * y / s2).cwiseAbs().maxCoeff() < 1e-12);

  const Vector v = Vector::LinSpaced(4, -1.0, 2.0);
  REQUIRE((decomp.solve_A(A_expect * v) - v).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("decomposition refuses gamma at or below the spectrum") {
  const Matrix X = generate_design(IidGaussian{1.0}, 20, 3, 5);
  const Vector y = Vector::Zero(20);
  const Decomposition auto_d(X, y, 1.0, AutoGamma{});
  REQUIRE_THROWS_AS(Decomposition(X, y, 1.0, GammaPolicy{auto_d.lambda_max()}),
                    ValidationError);
  REQUIRE_THROWS_AS(
      Decomposition(X, y, 1.0, GammaPolicy{0.5 * auto_d.lambda_max()}),
      ValidationError);
  REQUIRE_NOTHROW(
      Decomposition(X, y, 1.0, GammaPolicy{auto_d.lambda_max() + 1e-6}));
}

TEST_CASE("reference potential values at q=1/2, unit gaussian slab, gamma=3") {
  const auto prior = make_prior(0.5, GaussianSlab{1.0});
  const double gamma = 3.0;
  const auto t = slab_transform(prior.slab, gamma, 0.0);
  REQUIRE(t.g() == Catch::Approx(0.5).epsilon(1e-12));
  REQUIRE(t.g_prime() == Catch::Approx(0.0).margin(1e-14));
  REQUIRE(t.g_second() == Catch::Approx(0.125).epsilon(1e-12));

  const auto pt = potential_terms(prior, gamma, 0.0);
  REQUIRE(pt.value == Catch::Approx(-std::log(0.75)).epsilon(1e-12));
  REQUIRE(pt.d1 == Catch::Approx(0.0).margin(1e-14));
  REQUIRE(pt.d2 == Catch::Approx(-1.0 / 12.0).epsilon(1e-12));
  REQUIRE(pt.p == Catch::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("slab transforms match the quadrature oracle for every family") {
  const std::vector<SlabFamily> slabs = {
      make_slab(GaussianSlab{1.0}), make_slab(GaussianSlab{0.3}),
      make_slab(LaplaceSlab{1.0}), make_slab(LaplaceSlab{2.5}),
      make_slab(logistic_slab())};
  for (const auto& slab : slabs) {
    for (double gamma : {0.5, 3.0, 25.0}) {
      for (double x : {0.0, 0.7, -2.0, 8.0, 40.0}) {
        const auto t = slab_transform(slab, gamma, x);
        const auto oracle = tilted_oracle(slab, gamma, x);
        const bool generic = std::holds_alternative<GenericSlab>(slab);
        const double tol = generic ? 1e-6 : 1e-9;
        REQUIRE(std::abs(t.log_g - oracle.log_g) <
                tol * std::max(1.0, std::abs(oracle.log_g)));
        REQUIRE(std::abs(t.d1_ratio - oracle.mean) <
                tol * std::max(1.0, std::abs(oracle.mean)));
        REQUIRE(std::abs(t.cond_variance - oracle.variance) <
                (generic ? 1e-6 : 1e-7));
      }
    }
  }
}

TEST_CASE("potential is even in x for every family") {
  const std::vector<SlabFamily> slabs = {make_slab(GaussianSlab{0.8}),
                                         make_slab(LaplaceSlab{1.7}),
                                         make_slab(logistic_slab())};
  for (const auto& slab : slabs) {
    const auto prior = make_prior(0.35, slab);
    for (double gamma : {1.0, 6.0}) {
      for (double x : {0.1, 1.0, 3.7, 11.0}) {
        const auto plus = potential_terms(prior, gamma, x);
        const auto minus = potential_terms(prior, gamma, -x);
        REQUIRE(std::abs(plus.value - minus.value) < 1e-10);
        REQUIRE(std::abs(plus.d1 + minus.d1) < 1e-10);
        REQUIRE(std::abs(plus.d2 - minus.d2) < 1e-10);
      }
    }
  }
}

TEST_CASE("potential derivatives match finite differences") {
  const std::vector<SlabFamily> slabs = {make_slab(GaussianSlab{1.0}),
                                         make_slab(LaplaceSlab{1.3})};
  for (const auto& slab : slabs) {
    const auto prior = make_prior(0.25, slab);
    for (double gamma : {0.7, 4.0, 20.0}) {
      for (double x : {0.0, 0.4, -1.5, 5.0, 12.0}) {
        auto v = [&](double t) { return potential_terms(prior, gamma, t).value; };
        const auto pt = potential_terms(prior, gamma, x);
        const double h1 = 1e-5 * std::max(1.0, std::abs(x));
        REQUIRE(std::abs(fd_first(v, x, h1) - pt.d1) <
                1e-6 * std::max(1.0, std::abs(pt.d1)));
        const double h2 = 1e-4 * std::max(1.0, std::abs(x));
        REQUIRE(std::abs(fd_second(v, x, h2) - pt.d2) <
                1e-5 * std::max(1.0, std::abs(pt.d2)));
      }
    }
  }
}

TEST_CASE("curvature is nonpositive and obeys the relaxed lower bound") {
  RngStream rng(99);
  const std::vector<SlabFamily> slabs = {make_slab(GaussianSlab{1.0}),
                                         make_slab(GaussianSlab{0.2}),
                                         make_slab(LaplaceSlab{0.8}),
                                         make_slab(LaplaceSlab{3.0})};
  for (int trial = 0; trial < 200; ++trial) {
    const auto& slab = slabs[trial % slabs.size()];
    const double q = 0.02 + 0.96 * rng.uniform();
    const double gamma = std::exp(rng.uniform() * 6.0 - 1.0);
    const double x = 30.0 * rng.normal();
    const auto prior = make_prior(q, slab);
    const auto pt = potential_terms(prior, gamma, x);
    REQUIRE(pt.d2 <= 1e-12);
    REQUIRE(pt.d2 >= -1.0 / gamma - x * x / (gamma * gamma) - 1e-12);
    REQUIRE(pt.p >= 0.0);
    REQUIRE(pt.p <= 1.0);
  }
}

TEST_CASE("tilted mean is monotone with slope at most 1/gamma") {
  const auto slabs = {make_slab(GaussianSlab{1.0}), make_slab(LaplaceSlab{1.0})};
  for (const auto& slab : slabs) {
    for (double gamma : {0.5, 2.0, 10.0}) {
      double prev_x = -20.0;
      double prev_r = slab_transform(slab, gamma, prev_x).d1_ratio;
      for (double x = -19.5; x <= 20.0; x += 0.5) {
        const double r = slab_transform(slab, gamma, x).d1_ratio;
        const double slope = (r - prev_r) / (x - prev_x);
        REQUIRE(slope >= -1e-10);
        REQUIRE(slope <= 1.0 / gamma + 1e-10);
        const double cv = slab_transform(slab, gamma, x).cond_variance;
        REQUIRE(cv >= 0.0);
        REQUIRE(cv <= 1.0 / gamma + 1e-12);
        prev_x = x;
        prev_r = r;
      }
    }
  }
}

TEST_CASE("field hamiltonian gradient matches finite differences") {
  const Matrix X = generate_design(IidGaussian{0.25}, 25, 4, 11);
  const auto prior = make_prior(0.3, GaussianSlab{1.0});
  const Vector theta = sample_prior(prior, 4, 12);
  const Vector y = generate_response(X, theta, 1.0, 13);
  const Decomposition decomp(X, y, 1.0, AutoGamma{});

  RngStream rng(14);
  for (int trial = 0; trial < 5; ++trial) {
    Vector phi(4);
    for (int i = 0; i < 4; ++i) phi[i] = rng.normal();
    const auto [h_value, grad] = field_hamiltonian(decomp, prior, phi);
    REQUIRE(std::isfinite(h_value));
    for (int i = 0; i < 4; ++i) {
      auto slice = [&](double t) {
        Vector p = phi;
        p[i] = t;
        return field_hamiltonian(decomp, prior, p).first;
      };
      const double fd = fd_first(slice, phi[i], 1e-6 * std::max(1.0, std::abs(phi[i])));
      REQUIRE(std::abs(fd - grad[i]) < 1e-6 * std::max(1.0, std::abs(grad[i])));
    }
  }
}

TEST_CASE("curvature infimum matches a dense grid scan") {
  struct Case {
    SpikeSlabPrior prior;
    double gamma;
    int points;
    double tol;
  };
  const std::vector<Case> cases = {
      {make_prior(0.3, GaussianSlab{1.0}), 2.0, 1000001, 1e-6},
      {make_prior(0.2, GaussianSlab{1.0}), 30.0, 1000001, 1e-6},
      {make_prior(0.5, LaplaceSlab{1.0}), 3.0, 1000001, 1e-6},
      {make_prior(0.4, logistic_slab()), 5.0, 20001, 1e-4},
  };
  for (const auto& c : cases) {
    const auto inf = inf_v_second(c.prior, c.gamma);
    double grid_min = 0.0;
    for (int i = 0; i < c.points; ++i) {
      const double x = 50.0 * static_cast<double>(i) / (c.points - 1);
      grid_min = std::min(grid_min, potential_terms(c.prior, c.gamma, x).d2);
    }
    REQUIRE(inf.inf_value <= 0.0);
    REQUIRE(inf.inf_value <= potential_terms(c.prior, c.gamma, 0.0).d2 + 1e-12);
    REQUIRE(std::abs(inf.inf_value - grid_min) <
            c.tol * std::max(1.0, std::abs(grid_min)));
    REQUIRE(inf.argmin >= 0.0);
  }
}
