#pragma once

// Student-t tail, one-sample t-test, and a least-squares line fit.

#include <cstddef>
#include <span>

namespace shapectl {

/// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
double incomplete_beta(double a, double b, double x);

/// P(T > t) for Student-t with `dof` degrees of freedom.
double student_t_sf(double t, double dof);

/// Two-sided quantile q with P(|T| <= q) = level.
double student_t_two_sided_quantile(double level, double dof);

double mean(std::span<const double> x);
/// Sample standard deviation (n - 1 denominator); 0 for fewer than 2 points.
double sample_std(std::span<const double> x);

struct TTestResult {
  std::size_t n = 0;
  double mean = 0.0;
  double std = 0.0;
  double t_statistic = 0.0;
  double p_value = 0.5;  // right tail
  /// Zero sample variance: t is +-inf (or 0 for a zero mean) and p is forced
  /// to 0, 1, or 0.5 accordingly.
  bool degenerate_variance = false;
};

/// Right-tailed one-sample t-test of mean(x) > 0. Needs at least 2 points.
TTestResult t_test_right_tailed(std::span<const double> x);

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  /// Standard error of the slope when each y_i carries standard error se_i
  /// (zero when no errors are supplied).
  double slope_stderr = 0.0;
};

/// Least-squares fit of y on x; `y_stderr` is optional (empty or same
/// length). Needs at least 2 distinct x values.
LineFit fit_line(std::span<const double> x, std::span<const double> y, std::span<const double> y_stderr = {});

}  // namespace shapectl
