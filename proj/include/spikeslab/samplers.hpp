#pragma once

// The two-stage sampler and its parts: gradient-descent mode finding,
// MALA and HMC chains over the auxiliary field phi, and the exact product
// conditional draw of theta given phi.

#include <cmath>
#include <concepts>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <variant>

#include <Eigen/Cholesky>

#include "spikeslab/common.hpp"
#include "spikeslab/decomposition.hpp"
#include "spikeslab/feasibility.hpp"
#include "spikeslab/potential.hpp"
#include "spikeslab/rng.hpp"
#include "spikeslab/slab.hpp"
#include "spikeslab/special.hpp"

namespace spikeslab {

// Anything with a dimension and a joint (H, gradient) evaluation can be
// sampled; FieldTarget is the production target, quadratic targets serve
// as test hooks.
template <typename T>
concept SamplerTarget = requires(const T& t, const Vector& v, double& h, Vector& g) {
  { t.dim() } -> std::convertible_to<int>;
  t.eval(v, h, g);
};

// H(phi) = ||phi||^2 / 2, i.e. a standard Gaussian target.
struct IsotropicQuadraticTarget {
  int d;
  int dim() const { return d; }
  void eval(const Vector& phi, double& H, Vector& grad) const {
    H = 0.5 * phi.squaredNorm();
    grad = phi;
  }
};

struct MalaParams {
  double tau = 0.2;
};

struct HmcParams {
  double epsilon = 0.4;
  int leapfrog_steps = 10;
  std::optional<Matrix> mass;  // omitted = identity
};

using MethodParams = std::variant<MalaParams, HmcParams>;

// StayOnReject is standard Metropolis-Hastings.  RetryUntilAccept redraws
// proposals until one is accepted, which alters the transition kernel; it
// is provided as an explicitly labeled variant without any stationarity
// claim, capped at 1e6 consecutive rejections per step.
enum class RejectionPolicy { StayOnReject, RetryUntilAccept };

namespace detail {
inline constexpr long kRetryCap = 1000000;
}

struct ChainConfig {
  MethodParams method = MalaParams{};
  long total_steps = 1000;  // K, consumed by run_mala/run_hmc
  long burn_in = 0;         // B
  long thinning = 1;        // g
  RejectionPolicy rejection_policy = RejectionPolicy::StayOnReject;
  std::uint64_t seed = 0;
  double init_smoothness = 10.0;  // L; chains start at mode + N(0, I/L)
};

inline void validate(const ChainConfig& c) {
  if (const auto* m = std::get_if<MalaParams>(&c.method)) {
    if (!(m->tau > 0.0)) throw ValidationError("ChainConfig: tau must be > 0");
  } else {
    const auto& h = std::get<HmcParams>(c.method);
    if (!(h.epsilon > 0.0))
      throw ValidationError("ChainConfig: epsilon must be > 0");
    if (h.leapfrog_steps < 1)
      throw ValidationError("ChainConfig: leapfrog count must be >= 1");
    if (h.mass && (h.mass->rows() != h.mass->cols()))
      throw ValidationError("ChainConfig: mass matrix must be square");
  }
  if (c.total_steps < 1) throw ValidationError("ChainConfig: K must be >= 1");
  if (c.burn_in < 0) throw ValidationError("ChainConfig: burn-in must be >= 0");
  if (c.thinning < 1) throw ValidationError("ChainConfig: thinning must be >= 1");
  if (!(c.init_smoothness > 0.0))
    throw ValidationError("ChainConfig: init smoothness L must be > 0");
}

struct ModeResult {
  Vector phi;
  double grad_inf_norm;
  long iterations;
  bool converged;
};

// Fixed-step gradient descent on H from the origin.  Stops at
// ||grad||_inf < 1e-8 or after max_iters (returning the last iterate);
// ten consecutive increases of H are reported as divergence.
template <SamplerTarget Target>
ModeResult find_mode(const Target& target, double learning_rate = 0.01,
                     long max_iters = 100000) {
  if (!(learning_rate > 0.0))
    throw ValidationError("find_mode: learning rate must be > 0");
  if (max_iters < 1) throw ValidationError("find_mode: max_iters must be >= 1");
  constexpr double kGradTol = 1e-8;
  Vector phi = Vector::Zero(target.dim());
  double H = 0.0;
  Vector grad(target.dim());
  target.eval(phi, H, grad);
  if (!std::isfinite(H) || !grad.allFinite())
    throw ConvergenceError("find_mode: H not finite at the origin");
  long iter = 0;
  int rising = 0;
  double gnorm = grad.lpNorm<Eigen::Infinity>();
  while (gnorm >= kGradTol && iter < max_iters) {
    phi -= learning_rate * grad;
    double H_next = 0.0;
    target.eval(phi, H_next, grad);
    if (!std::isfinite(H_next) || !grad.allFinite())
      throw ConvergenceError("find_mode: non-finite H after " +
                             std::to_string(iter + 1) + " iterations");
    rising = (H_next > H) ? rising + 1 : 0;
    if (rising >= 10)
      throw ConvergenceError(
          "find_mode: H increased for 10 consecutive steps; trace length " +
          std::to_string(iter + 1));
    H = H_next;
    gnorm = grad.lpNorm<Eigen::Infinity>();
    ++iter;
  }
  return ModeResult{std::move(phi), gnorm, iter, gnorm < kGradTol};
}

inline ModeResult find_mode(const Decomposition& decomp, const SpikeSlabPrior& prior,
                            double learning_rate = 0.01, long max_iters = 100000) {
  return find_mode(FieldTarget(decomp, prior), learning_rate, max_iters);
}

namespace detail {

template <SamplerTarget Target>
class MalaStepper {
 public:
  MalaStepper(const Target& target, const MalaParams& params,
              RejectionPolicy policy)
      : target_(&target), tau_(params.tau), policy_(policy) {}

  void init(Vector phi0) {
    phi_ = std::move(phi0);
    target_->eval(phi_, H_, grad_);
    if (!std::isfinite(H_) || !grad_.allFinite())
      throw ChainError("MALA: non-finite H at the initial state", 0);
  }

  void step(RngStream& rng, long step_index) {
    const int d = target_->dim();
    for (long attempt = 0;; ++attempt) {
      ++proposals_;
      Vector xi(d);
      for (int i = 0; i < d; ++i) xi[i] = rng.normal();
      const Vector proposal =
          phi_ - tau_ * grad_ + std::sqrt(2.0 * tau_) * xi;
      double H_prop = 0.0;
      Vector grad_prop(d);
      target_->eval(proposal, H_prop, grad_prop);
      if (!std::isfinite(H_prop) || !grad_prop.allFinite())
        throw ChainError("MALA: non-finite H or gradient at proposal",
                         step_index);
      // forward kernel exponent is exactly the injected noise
      const double forward = 2.0 * tau_ * xi.squaredNorm();
      const double backward =
          (phi_ - proposal + tau_ * grad_prop).squaredNorm();
      const double log_alpha =
          (H_ - H_prop) + (forward - backward) / (4.0 * tau_);
      if (std::log(rng.uniform_pos()) < log_alpha) {
        phi_ = proposal;
        H_ = H_prop;
        grad_ = std::move(grad_prop);
        ++accepted_;
        return;
      }
      if (policy_ == RejectionPolicy::StayOnReject) return;
      if (attempt + 1 >= kRetryCap)
        throw ChainError("MALA: retry-until-accept exhausted its budget",
                         step_index);
    }
  }

  const Vector& state() const { return phi_; }
  long proposals() const { return proposals_; }
  long accepted() const { return accepted_; }

 private:
  const Target* target_;
  double tau_;
  RejectionPolicy policy_;
  Vector phi_, grad_;
  double H_ = 0.0;
  long proposals_ = 0, accepted_ = 0;
};

template <SamplerTarget Target>
class HmcStepper {
 public:
  HmcStepper(const Target& target, const HmcParams& params,
             RejectionPolicy policy)
      : target_(&target), epsilon_(params.epsilon),
        leapfrog_(params.leapfrog_steps), policy_(policy) {
    if (params.mass) {
      if (params.mass->rows() != target.dim())
        throw ValidationError("HMC: mass matrix dimension mismatch");
      mass_llt_.compute(*params.mass);
      if (mass_llt_.info() != Eigen::Success)
        throw ValidationError("HMC: mass matrix is not positive definite");
      identity_mass_ = false;
    }
  }

  void init(Vector phi0) {
    phi_ = std::move(phi0);
    target_->eval(phi_, H_, grad_);
    if (!std::isfinite(H_) || !grad_.allFinite())
      throw ChainError("HMC: non-finite H at the initial state", 0);
  }

  void step(RngStream& rng, long step_index) {
    const int d = target_->dim();
    for (long attempt = 0;; ++attempt) {
      ++proposals_;
      // rho = L zeta for Omega = L L^T, so the initial kinetic energy is
      // just ||zeta||^2 / 2
      Vector zeta(d);
      for (int i = 0; i < d; ++i) zeta[i] = rng.normal();
      const double kinetic0 = 0.5 * zeta.squaredNorm();
      Vector rho =
          identity_mass_ ? zeta : Vector(mass_llt_.matrixL() * zeta);
      Vector x = phi_;
      Vector g = grad_;
      double H_new = H_;
      for (int l = 0; l < leapfrog_; ++l) {
        rho -= 0.5 * epsilon_ * g;
        x += epsilon_ * (identity_mass_ ? rho : Vector(mass_llt_.solve(rho)));
        target_->eval(x, H_new, g);
        if (!std::isfinite(H_new) || !g.allFinite())
          throw ChainError("HMC: non-finite H or gradient during leapfrog",
                           step_index);
        rho -= 0.5 * epsilon_ * g;
      }
      const double kinetic1 =
          0.5 * (identity_mass_ ? rho.squaredNorm()
                                : rho.dot(mass_llt_.solve(rho)));
      const double log_alpha = (H_ - H_new) + (kinetic0 - kinetic1);
      if (std::log(rng.uniform_pos()) < log_alpha) {
        phi_ = std::move(x);
        H_ = H_new;
        grad_ = std::move(g);
        ++accepted_;
        return;
      }
      if (policy_ == RejectionPolicy::StayOnReject) return;
      if (attempt + 1 >= kRetryCap)
        throw ChainError("HMC: retry-until-accept exhausted its budget",
                         step_index);
    }
  }

  const Vector& state() const { return phi_; }
  long proposals() const { return proposals_; }
  long accepted() const { return accepted_; }

 private:
  const Target* target_;
  double epsilon_;
  int leapfrog_;
  RejectionPolicy policy_;
  bool identity_mass_ = true;
  Eigen::LLT<Matrix> mass_llt_;
  Vector phi_, grad_;
  double H_ = 0.0;
  long proposals_ = 0, accepted_ = 0;
};

template <SamplerTarget Target>
Vector initial_state(const Target& target, const Vector& mode, double smoothness,
                     RngStream& rng) {
  Vector phi0 = mode;
  const double scale = 1.0 / std::sqrt(smoothness);
  for (int i = 0; i < target.dim(); ++i) phi0[i] += scale * rng.normal();
  return phi0;
}

}  // namespace detail

struct ChainResult {
  Matrix states;  // one row per step, total_steps rows
  Vector initial_state;
  double acceptance_rate = 0.0;
  long proposals = 0;
  long accepted = 0;
};

namespace detail {

template <SamplerTarget Target, typename Stepper>
ChainResult run_chain_with(const Target& target, Stepper stepper,
                           const Vector& mode, const ChainConfig& config) {
  if (mode.size() != target.dim())
    throw ValidationError("run chain: mode estimate has wrong dimension");
  if (config.burn_in >= config.total_steps * config.thinning)
    throw ValidationError("ChainConfig: burn-in must be < K * thinning");
  RngStream rng(config.seed);
  Vector phi0 = initial_state(target, mode, config.init_smoothness, rng);
  stepper.init(phi0);
  ChainResult result;
  result.initial_state = std::move(phi0);
  result.states.resize(config.total_steps, target.dim());
  for (long k = 0; k < config.total_steps; ++k) {
    stepper.step(rng, k);
    result.states.row(k) = stepper.state();
  }
  result.proposals = stepper.proposals();
  result.accepted = stepper.accepted();
  result.acceptance_rate =
      result.proposals > 0
          ? static_cast<double>(result.accepted) / result.proposals
          : 0.0;
  return result;
}

}  // namespace detail

// K MALA steps from mode + N(0, I/L); states are the K post-step iterates.
template <SamplerTarget Target>
ChainResult run_mala(const Target& target, const Vector& mode,
                     const ChainConfig& config) {
  validate(config);
  const auto* params = std::get_if<MalaParams>(&config.method);
  if (!params) throw ValidationError("run_mala: config.method must be MALA");
  return detail::run_chain_with(
      target,
      detail::MalaStepper<Target>(target, *params, config.rejection_policy),
      mode, config);
}

template <SamplerTarget Target>
ChainResult run_hmc(const Target& target, const Vector& mode,
                    const ChainConfig& config) {
  validate(config);
  const auto* params = std::get_if<HmcParams>(&config.method);
  if (!params) throw ValidationError("run_hmc: config.method must be HMC");
  return detail::run_chain_with(
      target,
      detail::HmcStepper<Target>(target, *params, config.rejection_policy),
      mode, config);
}

inline ChainResult run_mala(const Decomposition& decomp,
                            const SpikeSlabPrior& prior,
                            const ChainConfig& config) {
  FieldTarget target(decomp, prior);
  return run_mala(target, find_mode(target).phi, config);
}

inline ChainResult run_hmc(const Decomposition& decomp,
                           const SpikeSlabPrior& prior,
                           const ChainConfig& config) {
  FieldTarget target(decomp, prior);
  return run_hmc(target, find_mode(target).phi, config);
}

// Standard normal conditioned on z > a, by inverse CDF in the log domain;
// exact for truncation points anywhere on the line.
inline double sample_truncated_standard_normal_lower(double a, RngStream& rng) {
  const double log_tail = log_normal_sf(a) + std::log(rng.uniform_pos());
  return normal_quantile_from_log_sf(log_tail);
}

// One draw from the tilted slab, density proportional to
// exp(x t - gamma t^2 / 2) times the slab density.
inline double sample_tilted_slab(const SlabFamily& slab, double gamma, double x,
                                 RngStream& rng) {
  if (const auto* g = std::get_if<GaussianSlab>(&slab)) {
    const double a = gamma + 1.0 / g->variance;
    return x / a + rng.normal() / std::sqrt(a);
  }
  if (const auto* l = std::get_if<LaplaceSlab>(&slab)) {
    // Two one-sided truncated Gaussians; side weights are the one-sided
    // masses combined in log space (same pieces as the slab transform).
    const double rate = l->rate;
    const double scale = std::sqrt(2.0 * gamma);
    const double l_pos = log_erfcx((rate - x) / scale);
    const double l_neg = log_erfcx((rate + x) / scale);
    const double w_pos = sigmoid(l_pos - l_neg);
    const double root_gamma = std::sqrt(gamma);
    if (rng.uniform() < w_pos) {
      const double mean = (x - rate) / gamma;
      const double z =
          sample_truncated_standard_normal_lower(-mean * root_gamma, rng);
      return mean + z / root_gamma;
    }
    const double mean = (x + rate) / gamma;
    const double z =
        sample_truncated_standard_normal_lower(mean * root_gamma, rng);
    return mean - z / root_gamma;
  }
  const auto& gen = std::get<GenericSlab>(slab);
  const double m = detail::tilted_mode(gen.log_density, gamma, x);
  const double width = 12.0 / std::sqrt(gamma);
  const TabulatedInverseCdf table(
      [&](double t) {
        return x * t - 0.5 * gamma * t * t + gen.log_density(t);
      },
      m - width, m + width, 2048);
  return table.sample(rng.uniform());
}

// Product conditional of theta given phi: coordinate i sees x = h_i + phi_i,
// is zero with probability 1 - p(x), and otherwise draws from the tilted
// slab.
inline Vector sample_theta_given_phi(const Decomposition& decomp,
                                     const SpikeSlabPrior& prior,
                                     const Vector& phi, RngStream& rng) {
  if (phi.size() != decomp.d())
    throw ValidationError("sample_theta_given_phi: phi has wrong dimension");
  const double logit_q = std::log(prior.q) - std::log1p(-prior.q);
  Vector theta(decomp.d());
  for (int i = 0; i < decomp.d(); ++i) {
    const double x = decomp.h()[i] + phi[i];
    const SlabTransform t = slab_transform(prior.slab, decomp.gamma(), x);
    const double p_slab = sigmoid(logit_q + t.log_g);
    if (rng.uniform() < p_slab) {
      theta[i] = sample_tilted_slab(prior.slab, decomp.gamma(), x, rng);
    } else {
      theta[i] = 0.0;
    }
  }
  return theta;
}

inline Vector sample_theta_given_phi(const Decomposition& decomp,
                                     const SpikeSlabPrior& prior,
                                     const Vector& phi, std::uint64_t seed) {
  RngStream rng(seed);
  return sample_theta_given_phi(decomp, prior, phi, rng);
}

struct SampleSet {
  Matrix thetas;              // N x d
  std::optional<Matrix> phis;  // kept phi states when requested
  double acceptance_rate = 0.0;
  long proposals = 0;
  long accepted = 0;
  ChainConfig config;
  double gamma = 0.0;
  double feasibility_margin = 0.0;  // at this gamma, not a gamma search
  bool feasible_at_gamma = false;
  Vector mode;
  double mode_grad_inf_norm = 0.0;
};

// The two-stage algorithm: burn the phi-chain in for B steps, then per
// kept state (every thinning-th step) draw one conditional theta.  Runs
// regardless of feasibility; the margin at gamma is recorded so callers
// can warn.  Deterministic given config.seed.
inline SampleSet two_stage_sample(const Decomposition& decomp,
                                  const SpikeSlabPrior& prior,
                                  const ChainConfig& config, long num_samples,
                                  bool keep_phis = false) {
  validate(config);
  if (num_samples < 0)
    throw ValidationError("two_stage_sample: sample count must be >= 0");
  SampleSet out;
  out.config = config;
  out.gamma = decomp.gamma();
  const InfVSecond iv = inf_v_second(prior, decomp.gamma());
  out.feasibility_margin =
      1.0 / (decomp.gamma() - decomp.lambda_min()) + iv.inf_value;
  out.feasible_at_gamma = out.feasibility_margin > kFeasibilityMarginFloor;

  FieldTarget target(decomp, prior);
  const ModeResult mode = find_mode(target);
  out.mode = mode.phi;
  out.mode_grad_inf_norm = mode.grad_inf_norm;

  RngStream rng(config.seed);
  Vector phi0 =
      detail::initial_state(target, mode.phi, config.init_smoothness, rng);
  out.thetas.resize(num_samples, decomp.d());
  if (keep_phis) out.phis = Matrix(num_samples, decomp.d());

  auto drive = [&](auto stepper) {
    stepper.init(std::move(phi0));
    long step_index = 0;
    for (long b = 0; b < config.burn_in; ++b) stepper.step(rng, step_index++);
    for (long i = 0; i < num_samples; ++i) {
      for (long t = 0; t < config.thinning; ++t) stepper.step(rng, step_index++);
      out.thetas.row(i) = sample_theta_given_phi(decomp, prior, stepper.state(), rng);
      if (keep_phis) out.phis->row(i) = stepper.state();
    }
    out.proposals = stepper.proposals();
    out.accepted = stepper.accepted();
  };
  if (const auto* m = std::get_if<MalaParams>(&config.method)) {
    drive(detail::MalaStepper<FieldTarget>(target, *m, config.rejection_policy));
  } else {
    drive(detail::HmcStepper<FieldTarget>(target, std::get<HmcParams>(config.method),
                                          config.rejection_policy));
  }
  out.acceptance_rate =
      out.proposals > 0 ? static_cast<double>(out.accepted) / out.proposals : 0.0;
  return out;
}

}  // namespace spikeslab
