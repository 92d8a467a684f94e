#include "shapectl/prox.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace shapectl {

namespace detail {

void soft_threshold_into(std::span<const double> v, double t, std::span<double> out) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double a = std::abs(v[i]) - t;
    out[i] = a > 0.0 ? std::copysign(a, v[i]) : 0.0;
  }
}

double project_l1_ball_into(std::span<const double> v, double radius, std::span<double> out,
                            std::vector<double>& scratch) {
  double total = 0.0;
  for (double x : v) total += std::abs(x);
  if (total <= radius) {
    std::copy(v.begin(), v.end(), out.begin());
    return 0.0;
  }
  // (total - radius)/n never exceeds the true threshold, so anything at or
  // below it is inactive and can be dropped up front.
  const double lower = (total - radius) / static_cast<double>(v.size());
  scratch.clear();
  for (double x : v)
    if (std::abs(x) > lower) scratch.push_back(std::abs(x));

  // Michelot's filtering: the running threshold only grows, and entries at
  // or below it never return to the active set.
  double theta = lower;
  for (;;) {
    double partial = 0.0;
    for (double x : scratch) partial += x;
    theta = (partial - radius) / static_cast<double>(scratch.size());
    std::size_t kept = 0;
    for (double x : scratch)
      if (x > theta) scratch[kept++] = x;
    if (kept == scratch.size()) break;
    scratch.resize(kept);
  }
  soft_threshold_into(v, theta, out);
  return theta;
}

void prox_linf_into(std::span<const double> v, double t, std::span<double> out,
                    std::vector<double>& scratch) {
  // Moreau: prox_{t||.||inf}(v) = v - t P_{B1}(v / t) = v - P_{B_t}(v)
  project_l1_ball_into(v, t, out, scratch);
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] - out[i];
}

}  // namespace detail

Vector soft_threshold(std::span<const double> v, double t) {
  if (!(t >= 0.0)) throw std::invalid_argument("soft_threshold: threshold must be nonnegative");
  Vector out(v.size());
  detail::soft_threshold_into(v, t, out);
  return out;
}

double l1_ball_residual(std::span<const double> v, double lambda, double radius) {
  double s = 0.0;
  for (double x : v) s += std::max(std::abs(x) - lambda, 0.0);
  return s - radius;
}

L1BallProjectionResult project_l1_ball(std::span<const double> v, double radius, L1ProjectionMethod method) {
  if (!(radius > 0.0)) throw std::invalid_argument("project_l1_ball: radius must be positive");
  L1BallProjectionResult res;
  res.projected.resize(v.size());
  if (method == L1ProjectionMethod::exact) {
    std::vector<double> scratch;
    res.lambda_star = detail::project_l1_ball_into(v, radius, res.projected, scratch);
    return res;
  }

  if (l1_ball_residual(v, 0.0, radius) <= 0.0) {
    std::copy(v.begin(), v.end(), res.projected.begin());
    return res;
  }
  double lo = 0.0;
  double hi = 0.0;
  for (double x : v) hi = std::max(hi, std::abs(x));
  for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (l1_ball_residual(v, mid, radius) > 0.0) lo = mid;
    else hi = mid;
  }
  res.lambda_star = 0.5 * (lo + hi);
  detail::soft_threshold_into(v, res.lambda_star, res.projected);
  return res;
}

Vector prox_linf(std::span<const double> v, double t) {
  if (!(t > 0.0)) throw std::invalid_argument("prox_linf: scale must be positive");
  Vector out(v.size());
  std::vector<double> scratch;
  detail::prox_linf_into(v, t, out, scratch);
  return out;
}

Vector prox_affine(std::span<const double> z, const Matrix& e, const SpdFactorization& ee_t,
                   std::span<const double> b) {
  if (e.rows() != b.size() || e.cols() != z.size() || ee_t.dimension() != e.rows())
    throw std::invalid_argument("prox_affine: dimension mismatch");
  Vector r = matvec(e, z);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] -= b[i];
  ee_t.solve_in_place(r);
  const Vector correction = matvec_transposed(e, r);
  Vector out(z.begin(), z.end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= correction[i];
  return out;
}

}  // namespace shapectl
