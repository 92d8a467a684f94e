#include "shapectl/stats.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace shapectl {

namespace {

// Modified Lentz evaluation of the incomplete-beta continued fraction.
double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 500;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  return h;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) throw std::invalid_argument("incomplete_beta: a and b must be positive");
  if (!(x >= 0.0 && x <= 1.0)) throw std::invalid_argument("incomplete_beta: x must lie in [0, 1]");
  if (x == 0.0 || x == 1.0) return x;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_sf(double t, double dof) {
  if (!(dof > 0.0)) throw std::invalid_argument("student_t_sf: dof must be positive");
  if (std::isnan(t)) throw std::invalid_argument("student_t_sf: t is NaN");
  if (std::isinf(t)) return t > 0 ? 0.0 : 1.0;
  const double x = dof / (dof + t * t);
  const double tail = 0.5 * incomplete_beta(0.5 * dof, 0.5, x);
  return t >= 0.0 ? tail : 1.0 - tail;
}

double student_t_two_sided_quantile(double level, double dof) {
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("quantile: level must lie in (0, 1)");
  const double target = 0.5 * (1.0 - level);
  double lo = 0.0;
  double hi = 1.0;
  while (student_t_sf(hi, dof) > target) hi *= 2.0;
  for (int it = 0; it < 200 && hi - lo > 1e-14 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (student_t_sf(mid, dof) > target) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

double mean(std::span<const double> x) {
  if (x.empty()) throw std::invalid_argument("mean: empty sample");
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

double sample_std(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  const double m = mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(x.size() - 1));
}

TTestResult t_test_right_tailed(std::span<const double> x) {
  if (x.size() < 2) throw std::invalid_argument("t-test: need at least 2 observations");
  TTestResult r;
  r.n = x.size();
  r.mean = mean(x);
  r.std = sample_std(x);
  const double n = static_cast<double>(r.n);
  if (r.std == 0.0) {
    r.degenerate_variance = true;
    if (r.mean > 0.0) {
      r.t_statistic = std::numeric_limits<double>::infinity();
      r.p_value = 0.0;
    } else if (r.mean < 0.0) {
      r.t_statistic = -std::numeric_limits<double>::infinity();
      r.p_value = 1.0;
    } else {
      r.t_statistic = 0.0;
      r.p_value = 0.5;
    }
    return r;
  }
  r.t_statistic = r.mean / (r.std / std::sqrt(n));
  r.p_value = student_t_sf(r.t_statistic, n - 1.0);
  return r;
}

LineFit fit_line(std::span<const double> x, std::span<const double> y, std::span<const double> y_stderr) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("fit_line: need matching samples, n >= 2");
  if (!y_stderr.empty() && y_stderr.size() != x.size()) throw std::invalid_argument("fit_line: stderr length mismatch");
  const double mx = mean(x);
  const double my = mean(y);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("fit_line: x values are all equal");
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  if (!y_stderr.empty()) {
    double var = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) var += (x[i] - mx) * (x[i] - mx) * y_stderr[i] * y_stderr[i];
    f.slope_stderr = std::sqrt(var) / sxx;
  }
  return f;
}

}  // namespace shapectl
