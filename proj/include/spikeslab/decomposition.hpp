#pragma once

// The auxiliary-field decomposition data: gamma, h = X^T y / sigma^2, and
// A = gamma I - X^T X / sigma^2 with a cached Cholesky factorization.
// Requires gamma strictly above the top eigenvalue of X^T X / sigma^2 so
// that A is positive definite.

#include <variant>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "spikeslab/common.hpp"

namespace spikeslab {

// gamma = lambda_max + shift, the default recipe with shift 0.1.
struct AutoGamma {
  double shift = 0.1;
};

using GammaPolicy = std::variant<double, AutoGamma>;

class Decomposition {
 public:
  Decomposition(const Matrix& X, const Vector& y, double sigma_d,
                const GammaPolicy& policy) {
    if (X.rows() < 1 || X.cols() < 1)
      throw ValidationError("Decomposition: X must be nonempty");
    if (y.size() != X.rows())
      throw ValidationError("Decomposition: y length must equal rows of X");
    if (!(sigma_d > 0.0))
      throw ValidationError("Decomposition: sigma_d must be > 0");
    n_ = static_cast<int>(X.rows());
    d_ = static_cast<int>(X.cols());
    sigma_d_ = sigma_d;
    const Matrix gram = (X.transpose() * X) / (sigma_d * sigma_d);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
    if (eig.info() != Eigen::Success)
      throw LinAlgError("Decomposition: eigendecomposition of X^T X failed");
    lambda_min_ = eig.eigenvalues().minCoeff();
    lambda_max_ = eig.eigenvalues().maxCoeff();
    if (const auto* fixed = std::get_if<double>(&policy)) {
      gamma_ = *fixed;
    } else {
      gamma_ = lambda_max_ + std::get<AutoGamma>(policy).shift;
    }
    if (!(gamma_ > lambda_max_))
      throw ValidationError(
          "Decomposition: gamma must exceed the top eigenvalue of X^T X / "
          "sigma^2 (gamma " +
          std::to_string(gamma_) + ", lambda_max " + std::to_string(lambda_max_) +
          ")");
    A_ = -gram;
    A_.diagonal().array() += gamma_;
    llt_.compute(A_);
    if (llt_.info() != Eigen::Success)
      throw LinAlgError("Decomposition: Cholesky factorization of A failed");
    h_ = X.transpose() * y / (sigma_d * sigma_d);
  }

  double gamma() const { return gamma_; }
  const Vector& h() const { return h_; }
  const Matrix& A() const { return A_; }
  double lambda_min() const { return lambda_min_; }
  double lambda_max() const { return lambda_max_; }
  int n() const { return n_; }
  int d() const { return d_; }
  double sigma_d() const { return sigma_d_; }

  // A^{-1} v through the cached factorization (A is never inverted).
  Vector solve_A(const Vector& v) const { return llt_.solve(v); }

 private:
  double gamma_ = 0.0;
  Vector h_;
  Matrix A_;
  Eigen::LLT<Matrix> llt_;
  double lambda_min_ = 0.0;
  double lambda_max_ = 0.0;
  int n_ = 0;
  int d_ = 0;
  double sigma_d_ = 0.0;
};

}  // namespace spikeslab
