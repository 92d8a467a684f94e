#include "shapectl/admm.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>

#include "shapectl/prox.hpp"

namespace shapectl {

void AdmmConfig::validate() const {
  if (!(rho > 0.0) || !std::isfinite(rho)) throw std::invalid_argument("AdmmConfig: rho must be positive");
  if (!(abs_tol > 0.0)) throw std::invalid_argument("AdmmConfig: abs_tol must be positive");
  if (!(rel_tol > 0.0)) throw std::invalid_argument("AdmmConfig: rel_tol must be positive");
  if (max_iters < 1) throw std::invalid_argument("AdmmConfig: max_iters must be at least 1");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("AdmmConfig: lambda must be nonnegative");
}

namespace {

SpdFactorization factor_coef_gram(const Matrix& a) {
  Matrix g = gram_cols(a);
  for (std::size_t i = 0; i < g.rows(); ++i) g(i, i) += 1.0;
  return SpdFactorization::factorize(g);
}

// Four-lane blocks; the compiler maps them onto whatever SIMD width the
// target has, or scalar code without one.
typedef double Lanes __attribute__((vector_size(32)));
constexpr std::size_t kLanes = 4;

inline Lanes load_lanes(const double* p) {
  Lanes v;
  std::memcpy(&v, p, sizeof v);
  return v;
}

inline void store_lanes(double* p, Lanes v) { std::memcpy(p, &v, sizeof v); }

// t[j] += <column j, d> with at holding the columns contiguously (m x n).
void add_transposed_product(const double* at, const double* d, double* t, std::size_t n, std::size_t m) {
  constexpr std::size_t kCols = 6;
  std::size_t jb = 0;
  for (; jb + kCols <= m; jb += kCols) {
    Lanes acc[kCols] = {};
    std::size_t i = 0;
    for (; i + kLanes <= n; i += kLanes) {
      const Lanes dv = load_lanes(d + i);
      for (std::size_t q = 0; q < kCols; ++q) acc[q] += load_lanes(at + (jb + q) * n + i) * dv;
    }
    for (std::size_t q = 0; q < kCols; ++q) {
      const double* c = at + (jb + q) * n;
      double s = (acc[q][0] + acc[q][1]) + (acc[q][2] + acc[q][3]);
      for (std::size_t k = i; k < n; ++k) s += c[k] * d[k];
      t[jb + q] += s;
    }
  }
  for (; jb < m; ++jb) t[jb] += detail::dot_unchecked(at + jb * n, d, n);
}

// z[i] += sum_j column_j[i] t[j], in row blocks that stay in registers.
void add_product(const double* at, const double* t, double* z, std::size_t n, std::size_t m) {
  constexpr std::size_t kBlocks = 8;
  std::size_t ib = 0;
  for (; ib + kBlocks * kLanes <= n; ib += kBlocks * kLanes) {
    Lanes acc[kBlocks] = {};
    for (std::size_t j = 0; j < m; ++j) {
      const double tj = t[j];
      const double* c = at + j * n + ib;
      for (std::size_t b = 0; b < kBlocks; ++b) acc[b] += load_lanes(c + b * kLanes) * tj;
    }
    for (std::size_t b = 0; b < kBlocks; ++b)
      store_lanes(z + ib + b * kLanes, load_lanes(z + ib + b * kLanes) + acc[b]);
  }
  for (std::size_t j = 0; j < m; ++j) {
    const double tj = t[j];
    const double* c = at + j * n;
    for (std::size_t i = ib; i < n; ++i) z[i] += c[i] * tj;
  }
}

}  // namespace

SplitProblem::SplitProblem(Matrix a, Vector b)
    : a_(std::move(a)), a_t_(a_.transpose()), b_(std::move(b)), coef_gram_(factor_coef_gram(a_)) {
  if (a_.rows() != b_.size()) throw std::invalid_argument("SplitProblem: A rows must match b length");
  if (a_.cols() == 0 || a_.rows() == 0) throw std::invalid_argument("SplitProblem: empty A");
  if (!all_finite(b_)) throw std::invalid_argument("SplitProblem: b must be finite");
}

SplitProblem SplitProblem::from_regression(const Matrix& x, std::span<const double> y) {
  return SplitProblem(x.scaled(-1.0), Vector(y.begin(), y.end()));
}

Matrix SplitProblem::e() const {
  Matrix e(n_resid(), dimension());
  for (std::size_t i = 0; i < n_resid(); ++i) {
    e(i, i) = 1.0;
    const auto r = a_.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) e(i, n_resid() + j) = -r[j];
  }
  return e;
}

SplitProblem SplitProblem::restrict_columns(std::span<const std::size_t> columns) const {
  return SplitProblem(select_columns(a_, columns), b_);
}

void SplitProblem::project(std::span<const double> w, std::span<double> out) const {
  const std::size_t n = n_resid();
  const std::size_t m = n_coef();
  // The z1 block holds w1 - b until t is known.
  double* z1 = out.data();
  for (std::size_t i = 0; i < n; ++i) z1[i] = w[i] - b_[i];
  double* t = out.data() + n;
  std::copy(w.begin() + n, w.end(), t);
  const double* at = a_t_.data().data();
  add_transposed_product(at, z1, t, n, m);
  coef_gram_.solve_in_place(out.subspan(n, m));
  std::copy(b_.begin(), b_.end(), z1);
  add_product(at, t, z1, n, m);
}

double SplitProblem::max_residual(std::span<const double> beta) const {
  double worst = 0.0;
  for (std::size_t i = 0; i < n_resid(); ++i)
    worst = std::max(worst, std::abs(b_[i] + detail::dot_unchecked(a_.row(i).data(), beta.data(), n_coef())));
  return worst;
}

std::pair<double, double> residual_tolerances(const AdmmState& state, const AdmmConfig& config) {
  const double root_m = std::sqrt(static_cast<double>(state.n_coef));
  const double zn = state.z.empty() ? 0.0 : norm(state.z, NormKind::l2);
  const double yn = state.y.empty() ? 0.0 : norm(state.y, NormKind::l2);
  const double un = state.u.empty() ? 0.0 : norm(state.u, NormKind::l2);
  const double e1 = root_m * config.abs_tol + config.rel_tol * std::max(zn, yn);
  const double e2 = root_m * config.abs_tol + config.rel_tol * config.rho * un;
  return {e1, e2};
}

namespace {

constexpr std::size_t kCheckpointStride = 64;

double penalized_objective(const SplitProblem& p, std::span<const double> beta, double lambda) {
  return p.max_residual(beta) + (lambda > 0.0 ? lambda * norm(beta, NormKind::l1) : 0.0);
}

// Shared iteration; `coef_prox` maps z2 - u2 to the new y2 in place.
template <typename CoefProx>
AdmmResult run_admm(const SplitProblem& p, const AdmmConfig& config, double lambda, CoefProx coef_prox,
                    const IterationObserver& observer) {
  config.validate();
  const std::size_t n = p.n_resid();
  const std::size_t m = p.n_coef();
  const std::size_t dim = n + m;

  AdmmState st;
  st.y.assign(dim, 0.0);
  st.z.assign(dim, 0.0);
  st.u.assign(dim, 0.0);
  st.n_coef = m;

  Vector v(dim), w(dim), z_prev(dim);
  std::vector<double> scratch;
  scratch.reserve(n);

  AdmmResult res;
  res.residual_history.reserve(std::min<std::size_t>(config.max_iters, 4096));
  Vector best(m, 0.0);
  double best_obj = penalized_objective(p, best, lambda);
  const double t = 1.0 / config.rho;

  for (std::size_t k = 1; k <= config.max_iters; ++k) {
    for (std::size_t i = 0; i < dim; ++i) v[i] = st.z[i] - st.u[i];
    detail::prox_linf_into(std::span<const double>(v).first(n), t, std::span<double>(st.y).first(n), scratch);
    coef_prox(std::span<const double>(v).subspan(n), std::span<double>(st.y).subspan(n));

    for (std::size_t i = 0; i < dim; ++i) w[i] = st.y[i] + st.u[i];
    z_prev.swap(st.z);
    p.project(w, st.z);

    double r2 = 0.0, s2 = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
      const double r = st.y[i] - st.z[i];
      st.u[i] += r;
      r2 += r * r;
      const double d = st.z[i] - z_prev[i];
      s2 += d * d;
    }
    st.iter = k;
    const double r_norm = std::sqrt(r2);
    const double s_norm = config.rho * std::sqrt(s2);
    if (!std::isfinite(r_norm) || !std::isfinite(s_norm))
      throw NumericalError("admm: non-finite iterate at iteration " + std::to_string(k), k);

    const auto [e1, e2] = residual_tolerances(st, config);
    res.residual_history.push_back({r_norm, s_norm});
    if (observer) observer(IterationInfo{st, r_norm, s_norm, e1, e2});

    res.iters_used = k;
    res.primal_residual = r_norm;
    res.dual_residual = s_norm;
    res.eps_primal = e1;
    res.eps_dual = e2;
    if (r_norm <= e1 && s_norm <= e2) {
      res.converged = true;
      break;
    }
    if (k % kCheckpointStride == 0) {
      const auto y2 = std::span<const double>(st.y).subspan(n);
      const double obj = penalized_objective(p, y2, lambda);
      if (obj < best_obj) {
        best_obj = obj;
        best.assign(y2.begin(), y2.end());
      }
    }
  }

  const auto y2 = std::span<const double>(st.y).subspan(n);
  const double final_obj = penalized_objective(p, y2, lambda);
  if (res.converged || final_obj <= best_obj) {
    res.solution.assign(y2.begin(), y2.end());
    res.objective = final_obj;
  } else {
    res.solution = std::move(best);
    res.objective = best_obj;
  }
  return res;
}

}  // namespace

AdmmResult solve_penalized(const SplitProblem& problem, const AdmmConfig& config, const IterationObserver& observer) {
  const double threshold = config.lambda / config.rho;
  return run_admm(
      problem, config, config.lambda,
      [threshold](std::span<const double> in, std::span<double> out) { detail::soft_threshold_into(in, threshold, out); },
      observer);
}

AdmmResult solve_refit(const SplitProblem& problem, std::span<const std::size_t> support, const AdmmConfig& config,
                       const IterationObserver& observer) {
  if (support.empty()) throw std::invalid_argument("solve_refit: empty support");
  for (std::size_t idx : support)
    if (idx >= problem.n_coef()) throw std::invalid_argument("solve_refit: support index out of range");
  const SplitProblem restricted = problem.restrict_columns(support);
  AdmmResult res = run_admm(
      restricted, config, 0.0,
      [](std::span<const double> in, std::span<double> out) { std::copy(in.begin(), in.end(), out.begin()); },
      observer);
  Vector full(problem.n_coef(), 0.0);
  for (std::size_t k = 0; k < support.size(); ++k) full[support[k]] = res.solution[k];
  res.solution = std::move(full);
  return res;
}

}  // namespace shapectl
