#pragma once

// Synthetic fuselage pairs, gap metrics, the per-fuselage l2 baseline,
// paired comparisons, and Monte-Carlo checks of the constrained estimator.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "shapectl/admm.hpp"
#include "shapectl/numerics.hpp"
#include "shapectl/problem.hpp"
#include "shapectl/stats.hpp"

namespace shapectl {

/// Independent stream for (seed, index): trials and pairs draw from their
/// own generator, so results do not depend on evaluation order.
std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t index);

struct FuselageGenParams {
  std::size_t n_meas = 182;
  double radius = 60.0;  // inches
  /// Peak radial deviation, inches. The default keeps L_N B psi of order
  /// one at L_N = 1e7, where the fixed rho = 1 is well conditioned.
  double deviation_scale = 2e-5;
  std::size_t fourier_modes = 3;
  double arc_start_deg = -12.0;
  double arc_end_deg = 192.0;
  std::size_t m_feasible = 18;
  /// Influence decay per inch of arc length.
  double decay_rate = 0.02;
  /// Share of the circumference held by the fixture (centred at
  /// fixture_center_deg); displacement rows there are damped by 1e-6.
  double fixture_fraction = 0.1;
  double fixture_center_deg = 270.0;
  /// Radial displacement at the actuator per pound, inches.
  double compliance = 1e-4;
  /// Tangential deviation amplitude relative to the radial one.
  double tangential_ratio = 0.1;
  /// Log-normal spread of each column's compliance and decay, drawn per
  /// fuselage, so U1 and U2 differ.
  double compliance_jitter = 0.2;
  double decay_jitter = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Pair `stream` of the family defined by params.seed. Deviations are a
/// truncated Fourier series in the section angle, tapered to zero at the
/// fixture (zero inside it) and scaled to peak at deviation_scale. B = diag(1/n_meas).
AssemblyProblem gen_fuselage_pair(const FuselageGenParams& params, std::uint64_t stream = 0);

struct MetricsReport {
  double rmsg = 0.0;  // (1/n) sqrt(delta' delta), inches
  double mg = 0.0;  // max over points of sqrt(dY^2 + dZ^2), inches
  double mf1 = 0.0;  // max |F1|, pounds
  double mf2 = 0.0;
};

MetricsReport metrics(std::span<const double> delta, std::span<const double> f1, std::span<const double> f2,
                      std::size_t n_meas);
MetricsReport metrics(const ControlSolution& solution, std::size_t n_meas);

/// Each fuselage pulled toward its design shape on its own: lasso on
/// ||psi_i + U_i F_i||_2 by coordinate descent with the penalty bisected for
/// budget/2 actuators, then a least-squares refit on that support.
/// `config.max_iters` caps the coordinate-descent sweeps per solve.
ControlSolution baseline_l2(const AssemblyProblem& assembly, std::size_t budget, const AdmmConfig& config);

struct MetricComparison {
  Vector improvements;  // baseline - proposed, per pair
  TTestResult test;
};

struct ComparisonReport {
  std::size_t n_pairs = 0;
  MetricComparison mg;
  MetricComparison rmsg;
};

ComparisonReport compare(std::span<const MetricsReport> proposed, std::span<const MetricsReport> baseline);

struct TheoryCheckConfig {
  double sigma = 1.0;
  double alpha = 3.0;
  std::size_t sparsity = 5;
  std::vector<std::size_t> n_grid{100};
  std::size_t p = 200;
  std::size_t trials = 500;
  std::uint64_t seed = 0;

  void validate() const;
};

/// n x p design with localized columns: entry (i, j) is a random sign times
/// exp(-|i - c_j| / 2) with centres c_j spread over the rows, and each
/// column scaled to Euclidean norm sqrt(n). max column l1 / sqrt(n) stays
/// bounded as n grows.
Matrix theory_design(std::size_t n, std::size_t p, std::mt19937_64& rng);

/// S-sparse coefficients with random support, signs and magnitudes in [1, 2).
Vector sparse_truth(std::size_t p, std::size_t sparsity, std::mt19937_64& rng);

/// sigma sqrt(alpha log p / n)
double lambda0_for(double sigma, double alpha, std::size_t n, std::size_t p);

/// 1 - (2n/p) p^(-(alpha - 2)/2), clipped at 0.
double feasibility_bound(std::size_t n, std::size_t p, double alpha);

struct FeasibilityPoint {
  std::size_t n = 0;
  std::size_t p = 0;
  std::size_t trials = 0;
  std::size_t feasible = 0;
  double rate = 0.0;
  double bound = 0.0;
};

/// Share of trials in which the true coefficients satisfy
/// (1/sqrt(n)) ||Y - X beta*||_inf <= lambda0, for each n in the grid.
std::vector<FeasibilityPoint> monte_carlo_feasibility(const TheoryCheckConfig& cfg);

struct ScalingPoint {
  std::size_t n = 0;
  std::size_t solved = 0;
  /// Trials whose residual bound admitted no coefficients; left out of the
  /// averages.
  std::size_t infeasible = 0;
  double estimation_mean = 0.0;  // ||beta_hat - beta*||_2
  double estimation_se = 0.0;
  double prediction_mean = 0.0;  // (1/sqrt(n)) ||X (beta_hat - beta*)||_2
  double prediction_se = 0.0;
  /// Smallest (1/n) |X v|^2 / |v|^2 over random directions of the cone
  /// |v_Sc|_1 <= |v_S|_1, averaged over trials. Diagnostic only.
  double restricted_eigen_min = 0.0;
};

struct SlopeEstimate {
  double slope = 0.0;
  double stderr_ = 0.0;
  double ci_low = 0.0;  // 95%
  double ci_high = 0.0;
};

struct ScalingReport {
  std::vector<ScalingPoint> points;
  /// Absent when some mean error is zero or no trial was solvable.
  std::optional<SlopeEstimate> estimation_slope;
  std::optional<SlopeEstimate> prediction_slope;
};

/// Solves the constrained l1 problem with lambda0 on every trial and fits
/// log mean error against log n. Needs at least 4 distinct sample sizes with
/// max >= 8 min.
ScalingReport error_scaling_study(const TheoryCheckConfig& cfg);

/// Random-cone estimate behind ScalingPoint::restricted_eigen_min.
double restricted_eigen_diagnostic(const Matrix& x, std::size_t sparsity, std::size_t directions,
                                   std::mt19937_64& rng);

struct StudyConfig {
  FuselageGenParams gen;
  std::size_t pairs = 50;
  std::size_t budget = 18;
  double scale_ln = 1e7;
  AdmmConfig admm;
  double zero_tol = 1e-6;
};

struct PairOutcome {
  std::size_t pair_id = 0;
  ControlSolution proposed;
  ControlSolution baseline;
  MetricsReport proposed_metrics;
  MetricsReport baseline_metrics;
};

struct StudyResult {
  std::vector<PairOutcome> pairs;
  ComparisonReport comparison;
  bool all_converged = true;
};

/// Called after each pair completes.
using StudyProgress = std::function<void(const PairOutcome&)>;

StudyResult run_study(const StudyConfig& cfg, const StudyProgress& progress = {});

/// Writes pairs.csv, summary.json and boxplot.csv (long format: pair_id,
/// method, metric, value) into `dir`, each atomically.
void write_study(const std::filesystem::path& dir, const StudyConfig& cfg, const StudyResult& result);

}  // namespace shapectl
