#pragma once

// ADMM for
//
//     minimize ||y1||_inf + lambda ||y2||_1   subject to  y1 = A y2 + b
//
// with the consensus split y = z, g(z) the indicator of {E z = b},
// E = [I, -A]. The penalized solve shrinks the coefficient block with soft
// thresholding; the refit solve restricts A to a support and leaves the
// coefficient block unpenalized.

#include <cstddef>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "shapectl/numerics.hpp"

namespace shapectl {

struct AdmmConfig {
  double rho = 1.0;
  double abs_tol = 1e-6;  // e3
  double rel_tol = 1e-5;  // e4
  std::size_t max_iters = 50000;
  double lambda = 0.0;  // l1 weight; ignored by the refit

  /// Throws std::invalid_argument when a field violates its range.
  void validate() const;
};

/// Immutable split of one regression instance. Holds A, b and the factor
/// used for the projection onto {y1 = A y2 + b}.
class SplitProblem {
 public:
  SplitProblem(Matrix a, Vector b);

  /// The regression Y - X beta maps to A = -X, b = Y.
  static SplitProblem from_regression(const Matrix& x, std::span<const double> y);

  const Matrix& a() const noexcept { return a_; }
  const Vector& b() const noexcept { return b_; }
  std::size_t n_resid() const noexcept { return a_.rows(); }
  std::size_t n_coef() const noexcept { return a_.cols(); }
  std::size_t dimension() const noexcept { return n_resid() + n_coef(); }

  /// Dense E = [I, -A]; only needed for checks.
  Matrix e() const;

  SplitProblem restrict_columns(std::span<const std::size_t> columns) const;

  /// Euclidean projection of w onto {E z = b}. Uses the coefficient-side
  /// system (I + A'A) t = w2 + A'(w1 - b), then z2 = t, z1 = A t + b.
  void project(std::span<const double> w, std::span<double> out) const;

  /// ||A beta + b||_inf
  double max_residual(std::span<const double> beta) const;

 private:
  Matrix a_;
  Matrix a_t_;  // columns of A stored contiguously, for project()
  Vector b_;
  SpdFactorization coef_gram_;
};

struct AdmmState {
  Vector y;
  Vector z;
  Vector u;  // scaled dual
  std::size_t iter = 0;
  std::size_t n_coef = 0;
};

struct ResidualRecord {
  double r_norm;
  double s_norm;
};

struct AdmmResult {
  /// Coefficient block of the final y iterate (exact zeros from the shrinkage).
  Vector solution;
  bool converged = false;
  std::size_t iters_used = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double eps_primal = 0.0;
  double eps_dual = 0.0;
  /// ||A solution + b||_inf + lambda ||solution||_1
  double objective = 0.0;
  std::vector<ResidualRecord> residual_history;
};

struct IterationInfo {
  const AdmmState& state;
  double r_norm;
  double s_norm;
  double eps_primal;
  double eps_dual;
};

/// Called once per iteration after the dual update.
using IterationObserver = std::function<void(const IterationInfo&)>;

/// Tolerances e1 = sqrt(m) e3 + e4 max(||z||, ||y||) and
/// e2 = sqrt(m) e3 + e4 ||rho u|| with m the coefficient-block length.
std::pair<double, double> residual_tolerances(const AdmmState& state, const AdmmConfig& config);

AdmmResult solve_penalized(const SplitProblem& problem, const AdmmConfig& config,
                           const IterationObserver& observer = {});

/// Minimizes ||A_S beta_S + b||_inf over the given support. The returned
/// solution has length n_coef with zeros off the support.
AdmmResult solve_refit(const SplitProblem& problem, std::span<const std::size_t> support,
                       const AdmmConfig& config, const IterationObserver& observer = {});

}  // namespace shapectl
