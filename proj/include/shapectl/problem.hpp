#pragma once

// Physical assembly instance, its regression form, and the two-stage
// select-then-refit pipeline.

#include <cstddef>
#include <filesystem>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "shapectl/admm.hpp"
#include "shapectl/numerics.hpp"

namespace shapectl {

/// Two fuselages measured at n_meas points. Deviations and displacement rows
/// hold the Y components first, then the Z components.
struct AssemblyProblem {
  Matrix b;  // n_meas x n_meas diagonal weights
  Matrix u1;  // 2 n_meas x m1, inches per pound
  Matrix u2;  // 2 n_meas x m2
  Vector psi1;  // 2 n_meas, inches
  Vector psi2;
  double scale_ln = 1e7;

  std::size_t n_meas() const noexcept { return b.rows(); }
  std::size_t m1() const noexcept { return u1.cols(); }
  std::size_t m2() const noexcept { return u2.cols(); }

  /// Throws std::invalid_argument on inconsistent dimensions, a non-diagonal
  /// or negative B, or a nonpositive scale.
  void validate() const;
};

struct RegressionProblem {
  Matrix x;  // [B~ U1, -B~ U2] L_N with B~ = diag(B, B)
  Vector y;  // B~ (psi2 - psi1) L_N
  std::size_t n() const noexcept { return x.rows(); }
  std::size_t p() const noexcept { return x.cols(); }
};

RegressionProblem build_regression(const AssemblyProblem& assembly);

/// Entrywise max |X_ij|. Any lambda strictly above it gives beta = 0.
double lambda_upper_bound(const Matrix& x);

/// Number of entries with |beta_i| > zero_tol * max(1, ||beta||_inf).
std::size_t count_nonzeros(std::span<const double> beta, double zero_tol);

/// Indices counted by count_nonzeros, ascending.
std::vector<std::size_t> support_of(std::span<const double> beta, double zero_tol);

struct SolveSummary {
  std::size_t iters = 0;
  bool converged = false;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double objective = 0.0;
};

SolveSummary summarize(const AdmmResult& result);

struct SelectionProbe {
  double lambda;
  std::size_t nonzeros;
  std::size_t iters;
  bool converged;
};

struct SelectionResult {
  std::vector<std::size_t> support;
  double lambda_used = 0.0;
  /// Set when the budget reaches p; the full support is returned unsolved.
  bool budget_covers_all = false;
  /// Penalized solve at lambda_used; default-initialized when no probe was
  /// kept (budget_covers_all, or every probe exceeded the budget).
  SolveSummary solve;
  std::vector<SelectionProbe> trace;
};

/// Stage-specific observer: `stage` is "select" or "refit".
using PipelineObserver = std::function<void(std::string_view stage, double lambda, const IterationInfo&)>;

/// Bisection on lambda in (0, lambda_upper_bound(X)] for the largest support
/// with at most `budget` nonzeros, preferring the smallest lambda on ties.
/// Stops when a probe hits exactly `budget` or the bracket is narrower than
/// 1e-10 times the upper bound.
SelectionResult select_actuators(const RegressionProblem& problem, std::size_t budget, const AdmmConfig& config,
                                 double zero_tol = 1e-6, const PipelineObserver& observer = {});

struct ControlSolution {
  Vector f1;  // pounds
  Vector f2;
  std::vector<std::size_t> support1;
  std::vector<std::size_t> support2;
  Vector delta;  // psi2 + U2 F2 - psi1 - U1 F1
  double lambda_used = 0.0;
  SolveSummary selection;
  SolveSummary refit;
  std::vector<SelectionProbe> trace;
  /// No actuator survived selection; forces are zero and no refit ran.
  bool empty_support = false;
  bool budget_covers_all = false;

  /// Selection and refit both converged (vacuously true for skipped stages).
  bool converged() const noexcept;
};

Vector compute_delta(const AssemblyProblem& assembly, std::span<const double> f1, std::span<const double> f2);

ControlSolution solve_pair(const AssemblyProblem& assembly, std::size_t budget, const AdmmConfig& config,
                           double zero_tol = 1e-6, const PipelineObserver& observer = {});

/// Settings stored next to a CSV bundle.
struct BundleConfig {
  std::size_t n_meas = 0;
  std::size_t m1 = 0;
  std::size_t m2 = 0;
  double scale_ln = 1e7;
  std::size_t budget = 18;
  AdmmConfig admm;
};

/// Reads B.csv, U1.csv, U2.csv, psi1.csv, psi2.csv and config.json from
/// `dir`. Throws std::runtime_error on I/O failure and std::invalid_argument
/// on malformed content.
AssemblyProblem load_assembly(const std::filesystem::path& dir, BundleConfig* config_out = nullptr);

/// Writes the five CSV files (atomically, one at a time). The config file is
/// left to the caller.
void save_assembly(const std::filesystem::path& dir, const AssemblyProblem& assembly);

}  // namespace shapectl
