#include "shapectl/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace shapectl::oracle {

namespace {

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

// Dense simplex tableau. Row r < m holds B^-1 [A | b]; the last row holds
// the reduced costs with the negated objective in the rhs slot.
class Tableau {
 public:
  Tableau(std::size_t rows, std::size_t cols) : m_(rows), n_(cols), t_((rows + 1) * (cols + 1), 0.0) {}

  double& at(std::size_t r, std::size_t c) { return t_[r * (n_ + 1) + c]; }
  double at(std::size_t r, std::size_t c) const { return t_[r * (n_ + 1) + c]; }
  double& rhs(std::size_t r) { return at(r, n_); }
  double& cost(std::size_t c) { return at(m_, c); }

  void pivot(std::size_t pr, std::size_t pc) {
    const std::size_t w = n_ + 1;
    double* prow = &t_[pr * w];
    const double inv = 1.0 / prow[pc];
    for (std::size_t c = 0; c < w; ++c) prow[c] *= inv;
    prow[pc] = 1.0;
    for (std::size_t r = 0; r <= m_; ++r) {
      if (r == pr) continue;
      double* row = &t_[r * w];
      const double f = row[pc];
      if (f == 0.0) continue;
      for (std::size_t c = 0; c < w; ++c) row[c] -= f * prow[c];
      row[pc] = 0.0;
    }
  }

  std::size_t rows() const { return m_; }
  std::size_t cols() const { return n_; }

 private:
  std::size_t m_;
  std::size_t n_;
  std::vector<double> t_;
};

enum class PhaseOutcome { optimal, unbounded };

// Bland's rule over columns with allowed[c] set.
PhaseOutcome run_phase(Tableau& tab, std::vector<std::size_t>& basis, const std::vector<char>& allowed, double tol,
                       std::size_t& pivots) {
  const std::size_t m = tab.rows();
  const std::size_t n = tab.cols();
  for (;;) {
    std::size_t enter = n;
    for (std::size_t c = 0; c < n; ++c)
      if (allowed[c] && tab.cost(c) < -tol) {
        enter = c;
        break;
      }
    if (enter == n) return PhaseOutcome::optimal;
    std::size_t leave = m;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < m; ++r) {
      const double a = tab.at(r, enter);
      if (a <= tol) continue;
      const double ratio = tab.rhs(r) / a;
      const double slack = 1e-12 * std::max(1.0, std::abs(best));
      if (leave == m || ratio < best - slack || (ratio <= best + slack && basis[r] < basis[leave])) {
        best = ratio;
        leave = r;
      }
    }
    if (leave == m) return PhaseOutcome::unbounded;
    tab.pivot(leave, enter);
    basis[leave] = enter;
    ++pivots;
  }
}

}  // namespace

void LpStandardForm::validate() const {
  require(a.rows() == b.size(), "LpStandardForm: a rows must match b");
  require(a.cols() == c.size(), "LpStandardForm: a cols must match c");
  require(all_finite(b) && all_finite(c), "LpStandardForm: non-finite data");
}

LpSolution simplex(const LpStandardForm& lp, double tol) {
  lp.validate();
  const std::size_t m = lp.a.rows();
  const std::size_t n = lp.a.cols();

  std::vector<double> sign(m, 1.0);
  for (std::size_t i = 0; i < m; ++i)
    if (lp.b[i] < 0.0) sign[i] = -1.0;

  // Reuse unit columns as the starting basis; add artificials elsewhere.
  std::vector<std::size_t> basis(m, n);
  std::vector<char> row_covered(m, 0);
  for (std::size_t j = 0; j < n; ++j) {
    std::size_t hit = m;
    bool unit = true;
    for (std::size_t i = 0; i < m && unit; ++i) {
      const double v = sign[i] * lp.a(i, j);
      if (v == 0.0) continue;
      if (v == 1.0 && hit == m) hit = i;
      else unit = false;
    }
    if (unit && hit < m && !row_covered[hit]) {
      row_covered[hit] = 1;
      basis[hit] = j;
    }
  }
  std::vector<std::size_t> art_row;
  for (std::size_t i = 0; i < m; ++i)
    if (!row_covered[i]) art_row.push_back(i);
  const std::size_t total = n + art_row.size();

  Tableau tab(m, total);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) tab.at(i, j) = sign[i] * lp.a(i, j);
    tab.rhs(i) = sign[i] * lp.b[i];
  }
  for (std::size_t k = 0; k < art_row.size(); ++k) {
    tab.at(art_row[k], n + k) = 1.0;
    basis[art_row[k]] = n + k;
  }

  const std::vector<std::size_t> start_col = basis;

  LpSolution sol;
  std::vector<char> allowed(total, 1);
  if (!art_row.empty()) {
    for (std::size_t c = 0; c <= total; ++c) tab.at(m, c) = 0.0;
    for (std::size_t r : art_row)
      for (std::size_t c = 0; c <= total; ++c)
        if (c < n || c == total) tab.at(m, c) -= tab.at(r, c);
    run_phase(tab, basis, allowed, tol, sol.pivots);
    double scale = 1.0;
    for (double v : lp.b) scale = std::max(scale, std::abs(v));
    if (-tab.at(m, total) > 1e-9 * scale) {
      sol.status = LpStatus::infeasible;
      return sol;
    }
    // Pivot zero-level artificials out where a structural column allows it.
    for (std::size_t r = 0; r < m; ++r) {
      if (basis[r] < n) continue;
      for (std::size_t c = 0; c < n; ++c)
        if (std::abs(tab.at(r, c)) > tol) {
          tab.pivot(r, c);
          basis[r] = c;
          ++sol.pivots;
          break;
        }
    }
    for (std::size_t c = n; c < total; ++c) allowed[c] = 0;
  }

  for (std::size_t c = 0; c <= total; ++c) tab.at(m, c) = c < n ? lp.c[c] : 0.0;
  for (std::size_t r = 0; r < m; ++r) {
    const std::size_t j = basis[r];
    const double cb = j < n ? lp.c[j] : 0.0;
    if (cb == 0.0) continue;
    for (std::size_t c = 0; c <= total; ++c) tab.at(m, c) -= cb * tab.at(r, c);
  }
  if (run_phase(tab, basis, allowed, tol, sol.pivots) == PhaseOutcome::unbounded) {
    sol.status = LpStatus::unbounded;
    return sol;
  }

  sol.status = LpStatus::optimal;
  sol.x.assign(n, 0.0);
  for (std::size_t r = 0; r < m; ++r)
    if (basis[r] < n) sol.x[basis[r]] = std::max(0.0, tab.rhs(r));
  sol.objective = dot(lp.c, sol.x);
  sol.min_reduced_cost = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < n; ++c) sol.min_reduced_cost = std::min(sol.min_reduced_cost, tab.cost(c));
  if (n == 0) sol.min_reduced_cost = 0.0;

  // Each row started on a unit (or artificial) column k, so its multiplier
  // is y_i = c_k - rc_k in the sign-adjusted system.
  sol.duals.assign(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t k = start_col[i];
    const double ck = k < n ? lp.c[k] : 0.0;
    sol.duals[i] = sign[i] * (ck - tab.cost(k));
  }

  const Vector ax = matvec(lp.a, sol.x);
  for (std::size_t i = 0; i < m; ++i) sol.max_violation = std::max(sol.max_violation, std::abs(ax[i] - lp.b[i]));
  return sol;
}

Vector lp_solve_constrained(const Matrix& x, std::span<const double> y, double lambda0) {
  const std::size_t n = x.rows();
  const std::size_t p = x.cols();
  require(y.size() == n, "lp_solve_constrained: X rows must match Y");
  require(lambda0 > 0.0, "lp_solve_constrained: lambda0 must be positive");
  const double r = std::sqrt(static_cast<double>(n)) * lambda0;

  // columns: beta+ (p), beta- (p), g (p), slacks (2p + 2n)
  const std::size_t rows = 2 * p + 2 * n;
  const std::size_t cols = 3 * p + rows;
  LpStandardForm lp{Vector(cols, 0.0), Matrix(rows, cols), Vector(rows, 0.0)};
  for (std::size_t j = 0; j < p; ++j) lp.c[2 * p + j] = 1.0;
  for (std::size_t j = 0; j < p; ++j) {
    lp.a(j, j) = 1.0;
    lp.a(j, p + j) = -1.0;
    lp.a(j, 2 * p + j) = -1.0;
    lp.a(p + j, j) = -1.0;
    lp.a(p + j, p + j) = 1.0;
    lp.a(p + j, 2 * p + j) = -1.0;
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      lp.a(2 * p + i, j) = x(i, j);
      lp.a(2 * p + i, p + j) = -x(i, j);
      lp.a(2 * p + n + i, j) = -x(i, j);
      lp.a(2 * p + n + i, p + j) = x(i, j);
    }
    lp.b[2 * p + i] = y[i] + r;
    lp.b[2 * p + n + i] = r - y[i];
  }
  for (std::size_t k = 0; k < rows; ++k) lp.a(k, 3 * p + k) = 1.0;

  const LpSolution sol = simplex(lp);
  if (sol.status == LpStatus::infeasible) {
    std::ostringstream msg;
    msg << "lp_solve_constrained: residual bound sqrt(n)*lambda0 = " << r << " is below the minimax residual";
    throw InfeasibleError(msg.str());
  }
  if (sol.status == LpStatus::unbounded) throw std::logic_error("lp_solve_constrained: unbounded l1 objective");
  Vector beta(p);
  for (std::size_t j = 0; j < p; ++j) beta[j] = sol.x[j] - sol.x[p + j];
  return beta;
}

Vector lp_solve_constrained_dual(const Matrix& x, std::span<const double> y, double lambda0) {
  const std::size_t n = x.rows();
  const std::size_t p = x.cols();
  require(y.size() == n, "lp_solve_constrained_dual: X rows must match Y");
  require(lambda0 > 0.0, "lp_solve_constrained_dual: lambda0 must be positive");
  const double r = std::sqrt(static_cast<double>(n)) * lambda0;

  // Primal: min 1'v, G v <= h, v = [beta+; beta-] >= 0,
  //   G = [X, -X; -X, X], h = [Y + r; r - Y].
  // Dual: min h'w, -G'w + s = 1, w, s >= 0. The primal v equals the reduced
  // costs of s at the dual optimum.
  const std::size_t rows = 2 * p;
  const std::size_t cols = 2 * n + rows;
  LpStandardForm lp{Vector(cols, 0.0), Matrix(rows, cols), Vector(rows, 1.0)};
  for (std::size_t i = 0; i < n; ++i) {
    lp.c[i] = y[i] + r;
    lp.c[n + i] = r - y[i];
    for (std::size_t j = 0; j < p; ++j) {
      // column of G' for w_i is row i of G
      lp.a(j, i) = -x(i, j);
      lp.a(p + j, i) = x(i, j);
      lp.a(j, n + i) = x(i, j);
      lp.a(p + j, n + i) = -x(i, j);
    }
  }
  for (std::size_t k = 0; k < rows; ++k) lp.a(k, 2 * n + k) = 1.0;

  const LpSolution sol = simplex(lp);
  if (sol.status == LpStatus::unbounded) {
    std::ostringstream msg;
    msg << "lp_solve_constrained_dual: residual bound sqrt(n)*lambda0 = " << r << " is below the minimax residual";
    throw InfeasibleError(msg.str());
  }
  if (sol.status != LpStatus::optimal) throw std::logic_error("lp_solve_constrained_dual: dual infeasible");
  // reduced cost of slack k is c_k - y_k = -y_k
  Vector beta(p);
  for (std::size_t j = 0; j < p; ++j) beta[j] = (-sol.duals[j]) - (-sol.duals[p + j]);
  return beta;
}

MinimaxSolution lp_solve_minimax(const Matrix& a, std::span<const double> b, double lambda) {
  const std::size_t n = a.rows();
  const std::size_t m = a.cols();
  require(b.size() == n, "lp_solve_minimax: a rows must match b");
  require(lambda >= 0.0, "lp_solve_minimax: lambda must be nonnegative");
  // columns: beta+ (m), beta- (m), t, slacks (2n)
  const std::size_t rows = 2 * n;
  const std::size_t cols = 2 * m + 1 + rows;
  LpStandardForm lp{Vector(cols, 0.0), Matrix(rows, cols), Vector(rows, 0.0)};
  for (std::size_t j = 0; j < 2 * m; ++j) lp.c[j] = lambda;
  lp.c[2 * m] = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      lp.a(i, j) = a(i, j);
      lp.a(i, m + j) = -a(i, j);
      lp.a(n + i, j) = -a(i, j);
      lp.a(n + i, m + j) = a(i, j);
    }
    lp.a(i, 2 * m) = -1.0;
    lp.a(n + i, 2 * m) = -1.0;
    lp.b[i] = -b[i];
    lp.b[n + i] = b[i];
  }
  for (std::size_t k = 0; k < rows; ++k) lp.a(k, 2 * m + 1 + k) = 1.0;
  const LpSolution sol = simplex(lp);
  if (sol.status != LpStatus::optimal) throw std::logic_error("lp_solve_minimax: simplex did not reach an optimum");
  MinimaxSolution out{Vector(m), 0.0};
  for (std::size_t j = 0; j < m; ++j) out.beta[j] = sol.x[j] - sol.x[m + j];
  const Vector ab = matvec(a, out.beta);
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, std::abs(ab[i] + b[i]));
  out.objective = worst + lambda * norm(out.beta, NormKind::l1);
  return out;
}

namespace {

double penalized_linf(const Matrix& x, std::span<const double> y, std::span<const double> beta, double lambda,
                      std::size_t* argmax, double* resid_sign) {
  double worst = -1.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const double r = y[i] - dot(x.row(i), beta);
    if (std::abs(r) > worst) {
      worst = std::abs(r);
      if (argmax) *argmax = i;
      if (resid_sign) *resid_sign = r >= 0.0 ? 1.0 : -1.0;
    }
  }
  double l1 = 0.0;
  for (double v : beta) l1 += std::abs(v);
  return worst + lambda * l1;
}

}  // namespace

SubgradientResult subgradient_solve(const Matrix& x, std::span<const double> y, double lambda, std::size_t iters) {
  require(iters >= 1, "subgradient_solve: iters must be at least 1");
  require(x.rows() == y.size(), "subgradient_solve: X rows must match Y");
  require(lambda >= 0.0, "subgradient_solve: lambda must be nonnegative");
  const std::size_t p = x.cols();
  Vector beta(p, 0.0);
  Vector g(p);
  std::size_t imax = 0;
  double sgn = 1.0;
  double f = penalized_linf(x, y, beta, lambda, &imax, &sgn);
  SubgradientResult best{beta, f, 0.0};

  auto subgradient = [&](std::span<const double> b) {
    for (std::size_t j = 0; j < p; ++j) {
      const double s = b[j] > 0.0 ? 1.0 : (b[j] < 0.0 ? -1.0 : 0.0);
      g[j] = -sgn * x(imax, j) + lambda * s;
    }
    return norm(g, NormKind::l2);
  };

  const double g0 = subgradient(beta);
  if (g0 == 0.0) return best;
  constexpr std::size_t kStages = 40;
  const std::size_t per_stage = std::max<std::size_t>(1, iters / kStages);
  double step = f / g0;
  std::size_t done = 0;
  double stage_start = best.objective;
  while (done < iters) {
    beta = best.beta;
    f = penalized_linf(x, y, beta, lambda, &imax, &sgn);
    stage_start = best.objective;
    for (std::size_t k = 0; k < per_stage && done < iters; ++k, ++done) {
      const double gn = subgradient(beta);
      if (gn == 0.0) break;
      for (std::size_t j = 0; j < p; ++j) beta[j] -= step * g[j] / gn;
      f = penalized_linf(x, y, beta, lambda, &imax, &sgn);
      if (f < best.objective) {
        best.objective = f;
        best.beta = beta;
      }
    }
    step *= 0.5;
  }
  best.gap_estimate = stage_start - best.objective;
  return best;
}

Vector grid_minimize(const GridObjective& f, std::span<const double> center, double half_width, double grid_step) {
  const std::size_t dim = center.size();
  require(dim >= 1 && dim <= 3, "grid_minimize: dimension must be 1, 2 or 3");
  require(grid_step > 0.0, "grid_minimize: grid_step must be positive");
  Vector c(center.begin(), center.end());
  if (!(half_width > 0.0)) return c;
  constexpr int kPoints = 41;  // per axis, odd so the center is on the grid
  double w = half_width;
  Vector trial(dim);
  for (;;) {
    const double h = 2.0 * w / (kPoints - 1);
    std::size_t total = 1;
    for (std::size_t d = 0; d < dim; ++d) total *= kPoints;
    double best = std::numeric_limits<double>::infinity();
    Vector arg = c;
    for (std::size_t k = 0; k < total; ++k) {
      std::size_t rem = k;
      for (std::size_t d = 0; d < dim; ++d) {
        trial[d] = c[d] - w + h * static_cast<double>(rem % kPoints);
        rem /= kPoints;
      }
      const double v = f(trial);
      if (v < best) {
        best = v;
        arg = trial;
      }
    }
    c = arg;
    if (h <= grid_step) return c;
    w = 4.0 * h;
  }
}

Vector brute_force_prox_check(std::span<const double> v, double t, double grid_step) {
  require(v.size() >= 1 && v.size() <= 3, "brute_force_prox_check: dimension must be 1, 2 or 3");
  require(t > 0.0, "brute_force_prox_check: t must be positive");
  const double vmax = norm(v, NormKind::linf);
  const Vector origin(v.size(), 0.0);
  if (vmax == 0.0) return origin;
  auto obj = [&](std::span<const double> u) {
    double inf = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
      inf = std::max(inf, std::abs(u[i]));
      sq += (u[i] - v[i]) * (u[i] - v[i]);
    }
    return t * inf + 0.5 * sq;
  };
  return grid_minimize(obj, origin, 1.5 * vmax, grid_step);
}

Vector project_l1_ball_enumerate(std::span<const double> v, double radius) {
  const std::size_t d = v.size();
  require(d >= 1 && d <= 4, "project_l1_ball_enumerate: dimension must be 1..4");
  require(radius > 0.0, "project_l1_ball_enumerate: radius must be positive");
  if (norm(v, NormKind::l1) <= radius) return Vector(v.begin(), v.end());
  Vector best;
  double best_dist = std::numeric_limits<double>::infinity();
  Vector cand(d);
  // each coordinate: 0 off the support, 1 positive, 2 negative
  std::size_t patterns = 1;
  for (std::size_t i = 0; i < d; ++i) patterns *= 3;
  for (std::size_t code = 1; code < patterns; ++code) {
    std::size_t rem = code;
    double s_dot_v = 0.0;
    std::size_t count = 0;
    std::vector<int> s(d, 0);
    for (std::size_t i = 0; i < d; ++i) {
      const int digit = static_cast<int>(rem % 3);
      rem /= 3;
      s[i] = digit == 0 ? 0 : (digit == 1 ? 1 : -1);
      if (s[i] != 0) {
        s_dot_v += s[i] * v[i];
        ++count;
      }
    }
    // projection of v onto the face {s'x = radius, x_i = 0 off support}
    const double mu = (s_dot_v - radius) / static_cast<double>(count);
    bool ok = true;
    for (std::size_t i = 0; i < d && ok; ++i) {
      cand[i] = s[i] == 0 ? 0.0 : v[i] - mu * s[i];
      if (s[i] != 0 && cand[i] * s[i] < 0.0) ok = false;
    }
    if (!ok) continue;
    double dist = 0.0;
    for (std::size_t i = 0; i < d; ++i) dist += (cand[i] - v[i]) * (cand[i] - v[i]);
    if (dist < best_dist) {
      best_dist = dist;
      best = cand;
    }
  }
  return best;
}

Matrix null_space_basis(const Matrix& e, double tol) {
  const std::size_t m = e.rows();
  const std::size_t n = e.cols();
  Matrix r = e;
  std::vector<std::size_t> pivot_cols;
  std::size_t row = 0;
  for (std::size_t col = 0; col < n && row < m; ++col) {
    std::size_t arg = row;
    for (std::size_t i = row + 1; i < m; ++i)
      if (std::abs(r(i, col)) > std::abs(r(arg, col))) arg = i;
    if (std::abs(r(arg, col)) <= tol) continue;
    for (std::size_t j = 0; j < n; ++j) std::swap(r(row, j), r(arg, j));
    const double inv = 1.0 / r(row, col);
    for (std::size_t j = 0; j < n; ++j) r(row, j) *= inv;
    for (std::size_t i = 0; i < m; ++i) {
      if (i == row) continue;
      const double f = r(i, col);
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) r(i, j) -= f * r(row, j);
    }
    pivot_cols.push_back(col);
    ++row;
  }
  std::vector<char> is_pivot(n, 0);
  for (std::size_t c : pivot_cols) is_pivot[c] = 1;
  std::vector<Vector> basis;
  for (std::size_t free = 0; free < n; ++free) {
    if (is_pivot[free]) continue;
    Vector v(n, 0.0);
    v[free] = 1.0;
    for (std::size_t k = 0; k < pivot_cols.size(); ++k) v[pivot_cols[k]] = -r(k, free);
    for (const Vector& q : basis) {
      const double proj = dot(q, v);
      for (std::size_t j = 0; j < n; ++j) v[j] -= proj * q[j];
    }
    const double len = norm(v, NormKind::l2);
    for (double& x : v) x /= len;
    basis.push_back(std::move(v));
  }
  Matrix out(n, basis.size());
  for (std::size_t k = 0; k < basis.size(); ++k)
    for (std::size_t j = 0; j < n; ++j) out(j, k) = basis[k][j];
  return out;
}

double student_t_sf_quadrature(double t, double dof) {
  require(dof > 0.0, "student_t_sf_quadrature: dof must be positive");
  const double log_norm =
      std::lgamma(0.5 * (dof + 1.0)) - std::lgamma(0.5 * dof) - 0.5 * std::log(dof * std::numbers::pi);
  auto density = [&](double x) { return std::exp(log_norm - 0.5 * (dof + 1.0) * std::log1p(x * x / dof)); };
  const double a = std::abs(t);
  constexpr std::size_t kIntervals = 200000;
  const double h = a / kIntervals;
  double sum = density(0.0) + density(a);
  for (std::size_t k = 1; k < kIntervals; ++k) sum += (k % 2 == 1 ? 4.0 : 2.0) * density(k * h);
  const double tail = 0.5 - sum * h / 3.0;
  return t >= 0.0 ? tail : 1.0 - tail;
}

}  // namespace shapectl::oracle
