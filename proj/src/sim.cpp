#include "shapectl/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "shapectl/oracle.hpp"
#include "shapectl/prox.hpp"

namespace shapectl {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

std::mt19937_64 stream_from(std::initializer_list<std::uint64_t> keys) {
  std::vector<std::uint32_t> words;
  for (std::uint64_t k : keys) {
    words.push_back(static_cast<std::uint32_t>(k));
    words.push_back(static_cast<std::uint32_t>(k >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  return std::mt19937_64(seq);
}

double wrapped_distance(double a, double b) {
  const double two_pi = 2.0 * std::numbers::pi;
  double d = std::fmod(std::abs(a - b), two_pi);
  return d > std::numbers::pi ? two_pi - d : d;
}

}  // namespace

std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t index) { return stream_from({seed, index}); }

void FuselageGenParams::validate() const {
  require(m_feasible >= 1 && n_meas >= m_feasible, "gen: need n_meas >= m_feasible >= 1");
  require(deviation_scale >= 0.0 && std::isfinite(deviation_scale), "gen: deviation_scale must be nonnegative");
  require(radius > 0.0 && std::isfinite(radius), "gen: radius must be positive");
  require(fourier_modes >= 1, "gen: fourier_modes must be at least 1");
  require(decay_rate > 0.0 && std::isfinite(decay_rate), "gen: decay_rate must be positive");
  require(fixture_fraction >= 0.0 && fixture_fraction < 1.0, "gen: fixture_fraction must lie in [0, 1)");
  require(compliance > 0.0 && std::isfinite(compliance), "gen: compliance must be positive");
  require(tangential_ratio >= 0.0 && compliance_jitter >= 0.0 && decay_jitter >= 0.0,
          "gen: ratios and jitters must be nonnegative");
  require(std::isfinite(arc_start_deg) && std::isfinite(arc_end_deg) && std::isfinite(fixture_center_deg),
          "gen: angles must be finite");
}

AssemblyProblem gen_fuselage_pair(const FuselageGenParams& params, std::uint64_t stream) {
  params.validate();
  const std::size_t n = params.n_meas;
  const std::size_t m = params.m_feasible;
  const double deg = std::numbers::pi / 180.0;
  std::mt19937_64 rng = make_stream(params.seed, stream);
  std::normal_distribution<double> normal;

  Vector theta(n);
  Vector envelope(n, 1.0);
  std::vector<char> fixed(n, 0);
  const double fix_half = params.fixture_fraction * std::numbers::pi;
  for (std::size_t i = 0; i < n; ++i) {
    theta[i] = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n);
    if (fix_half > 0.0) {
      const double d = wrapped_distance(theta[i], params.fixture_center_deg * deg);
      const double out = std::max(0.0, d - fix_half) / fix_half;
      envelope[i] = 1.0 - std::exp(-out * out);
      fixed[i] = d < fix_half;
    }
  }
  Vector actuator(m);
  for (std::size_t j = 0; j < m; ++j) {
    const double t = m == 1 ? 0.0 : static_cast<double>(j) / static_cast<double>(m - 1);
    actuator[j] = (params.arc_start_deg + t * (params.arc_end_deg - params.arc_start_deg)) * deg;
  }

  // Tapered Fourier series scaled to unit peak.
  auto series = [&] {
    Vector s(n, 0.0);
    for (std::size_t k = 1; k <= params.fourier_modes; ++k) {
      const double a = normal(rng);
      const double b = normal(rng);
      const double kd = static_cast<double>(k);
      for (std::size_t i = 0; i < n; ++i) s[i] += (a * std::cos(kd * theta[i]) + b * std::sin(kd * theta[i])) / kd;
    }
    double peak = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      s[i] *= envelope[i];
      peak = std::max(peak, std::abs(s[i]));
    }
    if (peak > 0.0)
      for (double& v : s) v /= peak;
    return s;
  };
  auto deviation = [&] {
    const Vector r = series();
    const Vector t = series();
    const double ar = params.deviation_scale;
    const double at = params.tangential_ratio * params.deviation_scale;
    Vector psi(2 * n);
    for (std::size_t i = 0; i < n; ++i) {
      const double c = std::cos(theta[i]);
      const double s = std::sin(theta[i]);
      psi[i] = ar * r[i] * c - at * t[i] * s;
      psi[n + i] = ar * r[i] * s + at * t[i] * c;
    }
    return psi;
  };
  auto displacement = [&] {
    Vector decay(m);
    Vector amp(m);
    for (std::size_t j = 0; j < m; ++j) decay[j] = params.decay_rate * std::exp(params.decay_jitter * normal(rng));
    for (std::size_t j = 0; j < m; ++j) amp[j] = params.compliance * std::exp(params.compliance_jitter * normal(rng));
    Matrix u(2 * n, m);
    for (std::size_t i = 0; i < n; ++i) {
      const double damp = fixed[i] ? 1e-6 : 1.0;
      for (std::size_t j = 0; j < m; ++j) {
        const double arc = params.radius * wrapped_distance(theta[i], actuator[j]);
        const double k = damp * amp[j] * std::exp(-decay[j] * arc);
        u(i, j) = k * std::cos(theta[i]);
        u(n + i, j) = k * std::sin(theta[i]);
      }
    }
    return u;
  };

  AssemblyProblem a;
  a.psi1 = deviation();
  a.psi2 = deviation();
  a.u1 = displacement();
  a.u2 = displacement();
  a.b = Matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) a.b(i, i) = 1.0 / static_cast<double>(n);
  return a;
}

MetricsReport metrics(std::span<const double> delta, std::span<const double> f1, std::span<const double> f2,
                      std::size_t n_meas) {
  require(n_meas > 0 && delta.size() == 2 * n_meas, "metrics: delta must have 2*n_meas entries");
  MetricsReport r;
  double ss = 0.0;
  double worst = 0.0;
  for (std::size_t i = 0; i < n_meas; ++i) {
    const double dy = delta[i];
    const double dz = delta[n_meas + i];
    ss += dy * dy + dz * dz;
    worst = std::max(worst, dy * dy + dz * dz);
  }
  r.rmsg = std::sqrt(ss) / static_cast<double>(n_meas);
  r.mg = std::sqrt(worst);
  r.mf1 = f1.empty() ? 0.0 : norm(f1, NormKind::linf);
  r.mf2 = f2.empty() ? 0.0 : norm(f2, NormKind::linf);
  return r;
}

MetricsReport metrics(const ControlSolution& solution, std::size_t n_meas) {
  return metrics(solution.delta, solution.f1, solution.f2, n_meas);
}

namespace {

struct LassoFit {
  Vector f;
  std::vector<std::size_t> support;
  std::size_t sweeps = 0;
  bool converged = true;
};

// Coordinate descent on 0.5 ||psi + U F||^2 + mu ||F||_1, columns of U
// stored as rows of `ut`.
class LassoCd {
 public:
  LassoCd(const Matrix& u, std::span<const double> psi, std::size_t max_sweeps)
      : ut_(u.transpose()), psi_(psi.begin(), psi.end()), max_sweeps_(max_sweeps), col_sq_(u.cols()) {
    for (std::size_t j = 0; j < ut_.rows(); ++j) col_sq_[j] = dot(ut_.row(j), ut_.row(j));
    psi_norm_ = norm(psi_, NormKind::l2);
  }

  /// max_j |U_j' psi|; any mu at or above it gives F = 0.
  double mu_max() const {
    double best = 0.0;
    for (std::size_t j = 0; j < ut_.rows(); ++j) best = std::max(best, std::abs(dot(ut_.row(j), psi_)));
    return best;
  }

  /// Updates `f` in place (warm start). Returns sweeps used and whether the
  /// largest scaled coordinate move fell below the tolerance.
  std::pair<std::size_t, bool> solve(double mu, Vector& f) const {
    const std::size_t m = ut_.rows();
    Vector r = psi_;
    for (std::size_t j = 0; j < m; ++j)
      if (f[j] != 0.0) axpy(f[j], ut_.row(j), r);
    const double tol = 1e-12 * std::max(psi_norm_, 1e-300);
    for (std::size_t sweep = 1; sweep <= max_sweeps_; ++sweep) {
      double moved = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        if (col_sq_[j] == 0.0) continue;
        const double g = dot(ut_.row(j), r);
        const double z = f[j] - g / col_sq_[j];
        const double t = mu / col_sq_[j];
        const double next = z > t ? z - t : (z < -t ? z + t : 0.0);
        const double step = next - f[j];
        if (step != 0.0) {
          axpy(step, ut_.row(j), r);
          f[j] = next;
          moved = std::max(moved, std::abs(step) * std::sqrt(col_sq_[j]));
        }
      }
      if (moved <= tol) return {sweep, true};
    }
    return {max_sweeps_, false};
  }

  /// Least squares on the support: U_S' U_S F_S = -U_S' psi.
  Vector refit(std::span<const std::size_t> support) const {
    const std::size_t k = support.size();
    Matrix g(k, k);
    Vector rhs(k);
    for (std::size_t a = 0; a < k; ++a) {
      rhs[a] = -dot(ut_.row(support[a]), psi_);
      for (std::size_t b = 0; b <= a; ++b) g(a, b) = g(b, a) = dot(ut_.row(support[a]), ut_.row(support[b]));
    }
    return SpdFactorization::factorize(g).solve(rhs);
  }

  std::size_t cols() const { return ut_.rows(); }

 private:
  static void axpy(double a, std::span<const double> x, Vector& y) {
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
  }

  Matrix ut_;
  Vector psi_;
  std::size_t max_sweeps_;
  Vector col_sq_;
  double psi_norm_ = 0.0;
};

LassoFit design_shape_fit(const Matrix& u, std::span<const double> psi, std::size_t k, std::size_t max_sweeps) {
  const std::size_t m = u.cols();
  LassoFit fit;
  fit.f.assign(m, 0.0);
  LassoCd cd(u, psi, max_sweeps);
  if (k >= m) {
    for (std::size_t j = 0; j < m; ++j) fit.support.push_back(j);
  } else {
    const double upper = cd.mu_max();
    if (upper == 0.0) return fit;
    Vector warm(m, 0.0);
    double lo = 0.0;
    double hi = upper;
    double kept_mu = upper;
    while (hi - lo > 1e-10 * upper) {
      const double mid = 0.5 * (lo + hi);
      const auto [sweeps, ok] = cd.solve(mid, warm);
      fit.sweeps += sweeps;
      fit.converged = fit.converged && ok;
      std::vector<std::size_t> supp;
      for (std::size_t j = 0; j < m; ++j)
        if (warm[j] != 0.0) supp.push_back(j);
      if (supp.size() <= k) {
        hi = mid;
        if (supp.size() > fit.support.size() || (supp.size() == fit.support.size() && mid < kept_mu)) {
          fit.support = std::move(supp);
          kept_mu = mid;
        }
        if (fit.support.size() == k) break;
      } else {
        lo = mid;
      }
    }
  }
  if (fit.support.empty()) return fit;
  const Vector fs = cd.refit(fit.support);
  for (std::size_t a = 0; a < fit.support.size(); ++a) fit.f[fit.support[a]] = fs[a];
  return fit;
}

}  // namespace

ControlSolution baseline_l2(const AssemblyProblem& assembly, std::size_t budget, const AdmmConfig& config) {
  assembly.validate();
  config.validate();
  require(budget >= 2 && budget % 2 == 0, "baseline_l2: budget must be even and at least 2");
  const std::size_t k = budget / 2;
  const LassoFit a = design_shape_fit(assembly.u1, assembly.psi1, k, config.max_iters);
  const LassoFit b = design_shape_fit(assembly.u2, assembly.psi2, k, config.max_iters);

  ControlSolution sol;
  sol.f1 = a.f;
  sol.f2 = b.f;
  sol.support1 = a.support;
  sol.support2 = b.support;
  sol.empty_support = a.support.empty() && b.support.empty();
  sol.budget_covers_all = k >= assembly.m1() && k >= assembly.m2();
  sol.selection.iters = a.sweeps + b.sweeps;
  sol.selection.converged = a.converged && b.converged;
  sol.refit.converged = true;
  sol.delta = compute_delta(assembly, sol.f1, sol.f2);
  return sol;
}

ComparisonReport compare(std::span<const MetricsReport> proposed, std::span<const MetricsReport> baseline) {
  require(proposed.size() == baseline.size(), "compare: lists must have equal length");
  require(proposed.size() >= 2, "compare: need at least 2 pairs");
  ComparisonReport rep;
  rep.n_pairs = proposed.size();
  for (std::size_t i = 0; i < rep.n_pairs; ++i) {
    rep.mg.improvements.push_back(baseline[i].mg - proposed[i].mg);
    rep.rmsg.improvements.push_back(baseline[i].rmsg - proposed[i].rmsg);
  }
  rep.mg.test = t_test_right_tailed(rep.mg.improvements);
  rep.rmsg.test = t_test_right_tailed(rep.rmsg.improvements);
  return rep;
}

void TheoryCheckConfig::validate() const {
  require(sigma >= 0.0 && std::isfinite(sigma), "theory: sigma must be nonnegative");
  require(alpha > 2.0 && std::isfinite(alpha), "theory: alpha must exceed 2");
  require(p >= 2, "theory: p must be at least 2");
  require(sparsity <= p, "theory: sparsity must not exceed p");
  require(trials >= 1, "theory: trials must be at least 1");
  require(!n_grid.empty(), "theory: n_grid must not be empty");
  for (std::size_t n : n_grid) require(n >= 1, "theory: sample sizes must be positive");
}

Matrix theory_design(std::size_t n, std::size_t p, std::mt19937_64& rng) {
  require(n >= 1 && p >= 1, "theory_design: empty design");
  std::bernoulli_distribution coin;
  const double tau = 2.0;
  Matrix x(n, p);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j) {
      const double centre = (static_cast<double>(j) + 0.5) * static_cast<double>(n) / static_cast<double>(p);
      x(i, j) = (coin(rng) ? 1.0 : -1.0) * std::exp(-std::abs(static_cast<double>(i) - centre) / tau);
    }
  const double target = std::sqrt(static_cast<double>(n));
  for (std::size_t j = 0; j < p; ++j) {
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) ss += x(i, j) * x(i, j);
    const double f = target / std::sqrt(ss);
    for (std::size_t i = 0; i < n; ++i) x(i, j) *= f;
  }
  return x;
}

Vector sparse_truth(std::size_t p, std::size_t sparsity, std::mt19937_64& rng) {
  require(sparsity <= p, "sparse_truth: sparsity exceeds p");
  std::vector<std::size_t> idx(p);
  for (std::size_t j = 0; j < p; ++j) idx[j] = j;
  // partial Fisher-Yates
  for (std::size_t k = 0; k < sparsity; ++k) {
    std::uniform_int_distribution<std::size_t> pick(k, p - 1);
    std::swap(idx[k], idx[pick(rng)]);
  }
  std::bernoulli_distribution coin;
  std::uniform_real_distribution<double> mag(1.0, 2.0);
  Vector beta(p, 0.0);
  for (std::size_t k = 0; k < sparsity; ++k) {
    const double s = coin(rng) ? 1.0 : -1.0;
    beta[idx[k]] = s * mag(rng);
  }
  return beta;
}

double lambda0_for(double sigma, double alpha, std::size_t n, std::size_t p) {
  return sigma * std::sqrt(alpha * std::log(static_cast<double>(p)) / static_cast<double>(n));
}

double feasibility_bound(std::size_t n, std::size_t p, double alpha) {
  const double pd = static_cast<double>(p);
  return std::max(0.0, 1.0 - 2.0 * static_cast<double>(n) / pd * std::pow(pd, -(alpha - 2.0) / 2.0));
}

namespace {

struct Trial {
  Matrix x;
  Vector truth;
  Vector y;
};

Trial draw_trial(const TheoryCheckConfig& cfg, std::size_t n, std::uint64_t grid_index, std::uint64_t trial) {
  std::mt19937_64 rng = stream_from({cfg.seed, grid_index, trial});
  Trial t{theory_design(n, cfg.p, rng), sparse_truth(cfg.p, cfg.sparsity, rng), {}};
  t.y = matvec(t.x, t.truth);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (double& v : t.y) v += cfg.sigma * noise(rng);
  return t;
}

}  // namespace

std::vector<FeasibilityPoint> monte_carlo_feasibility(const TheoryCheckConfig& cfg) {
  cfg.validate();
  std::vector<FeasibilityPoint> out;
  for (std::size_t g = 0; g < cfg.n_grid.size(); ++g) {
    const std::size_t n = cfg.n_grid[g];
    FeasibilityPoint pt{n, cfg.p, cfg.trials, 0, 0.0, feasibility_bound(n, cfg.p, cfg.alpha)};
    const double lambda0 = lambda0_for(cfg.sigma, cfg.alpha, n, cfg.p);
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    for (std::size_t t = 0; t < cfg.trials; ++t) {
      const Trial tr = draw_trial(cfg, n, g, t);
      const Vector fit = matvec(tr.x, tr.truth);
      double worst = 0.0;
      for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, std::abs(tr.y[i] - fit[i]));
      if (scale * worst <= lambda0) ++pt.feasible;
    }
    pt.rate = static_cast<double>(pt.feasible) / static_cast<double>(cfg.trials);
    out.push_back(pt);
  }
  return out;
}

double restricted_eigen_diagnostic(const Matrix& x, std::size_t sparsity, std::size_t directions,
                                   std::mt19937_64& rng) {
  const std::size_t n = x.rows();
  const std::size_t p = x.cols();
  require(sparsity >= 1 && sparsity <= p, "restricted_eigen_diagnostic: sparsity must lie in [1, p]");
  require(directions >= 1, "restricted_eigen_diagnostic: need at least one direction");
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unit;
  double best = std::numeric_limits<double>::infinity();
  Vector v(p);
  for (std::size_t d = 0; d < directions; ++d) {
    std::vector<std::size_t> idx(p);
    for (std::size_t j = 0; j < p; ++j) idx[j] = j;
    for (std::size_t k = 0; k < sparsity; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, p - 1);
      std::swap(idx[k], idx[pick(rng)]);
    }
    double on = 0.0;
    for (std::size_t k = 0; k < sparsity; ++k) {
      v[idx[k]] = normal(rng);
      on += std::abs(v[idx[k]]);
    }
    double off = 0.0;
    for (std::size_t k = sparsity; k < p; ++k) {
      v[idx[k]] = normal(rng);
      off += std::abs(v[idx[k]]);
    }
    // scale the off-support part to a random share of the on-support l1 mass
    const double f = off > 0.0 ? unit(rng) * on / off : 0.0;
    for (std::size_t k = sparsity; k < p; ++k) v[idx[k]] *= f;
    const Vector xv = matvec(x, v);
    const double ratio = dot(xv, xv) / (static_cast<double>(n) * dot(v, v));
    best = std::min(best, ratio);
  }
  return best;
}

ScalingReport error_scaling_study(const TheoryCheckConfig& cfg) {
  cfg.validate();
  require(cfg.sigma > 0.0, "error_scaling_study: sigma must be positive");
  std::vector<std::size_t> distinct = cfg.n_grid;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  require(distinct.size() >= 4 && distinct.back() >= 8 * distinct.front(),
          "error_scaling_study: need at least 4 distinct sample sizes with max >= 8 min");

  ScalingReport rep;
  for (std::size_t g = 0; g < cfg.n_grid.size(); ++g) {
    const std::size_t n = cfg.n_grid[g];
    const double lambda0 = lambda0_for(cfg.sigma, cfg.alpha, n, cfg.p);
    ScalingPoint pt;
    pt.n = n;
    Vector est;
    Vector pred;
    double re_sum = 0.0;
    for (std::size_t t = 0; t < cfg.trials; ++t) {
      const Trial tr = draw_trial(cfg, n, g, t);
      if (cfg.sparsity > 0) {
        std::mt19937_64 re_rng = stream_from({cfg.seed, g, t, 1});
        re_sum += restricted_eigen_diagnostic(tr.x, cfg.sparsity, 64, re_rng);
      }
      Vector beta;
      try {
        beta = oracle::lp_solve_constrained_dual(tr.x, tr.y, lambda0);
      } catch (const oracle::InfeasibleError&) {
        ++pt.infeasible;
        continue;
      }
      Vector diff(cfg.p);
      for (std::size_t j = 0; j < cfg.p; ++j) diff[j] = beta[j] - tr.truth[j];
      est.push_back(norm(diff, NormKind::l2));
      pred.push_back(norm(matvec(tr.x, diff), NormKind::l2) / std::sqrt(static_cast<double>(n)));
    }
    pt.solved = est.size();
    if (cfg.sparsity > 0) pt.restricted_eigen_min = re_sum / static_cast<double>(cfg.trials);
    if (!est.empty()) {
      const double root = std::sqrt(static_cast<double>(est.size()));
      pt.estimation_mean = mean(est);
      pt.estimation_se = sample_std(est) / root;
      pt.prediction_mean = mean(pred);
      pt.prediction_se = sample_std(pred) / root;
    }
    rep.points.push_back(pt);
  }

  auto fit = [&](auto mean_of, auto se_of) -> std::optional<SlopeEstimate> {
    Vector lx;
    Vector ly;
    Vector ls;
    for (const ScalingPoint& pt : rep.points) {
      const double m = mean_of(pt);
      if (pt.solved == 0 || !(m > 0.0)) return std::nullopt;
      lx.push_back(std::log(static_cast<double>(pt.n)));
      ly.push_back(std::log(m));
      ls.push_back(se_of(pt) / m);
    }
    const LineFit lf = fit_line(lx, ly, ls);
    return SlopeEstimate{lf.slope, lf.slope_stderr, lf.slope - 1.96 * lf.slope_stderr,
                         lf.slope + 1.96 * lf.slope_stderr};
  };
  rep.estimation_slope = fit([](const ScalingPoint& p) { return p.estimation_mean; },
                             [](const ScalingPoint& p) { return p.estimation_se; });
  rep.prediction_slope = fit([](const ScalingPoint& p) { return p.prediction_mean; },
                             [](const ScalingPoint& p) { return p.prediction_se; });
  return rep;
}

StudyResult run_study(const StudyConfig& cfg, const StudyProgress& progress) {
  cfg.gen.validate();
  cfg.admm.validate();
  require(cfg.pairs >= 2, "study: need at least 2 pairs");
  StudyResult res;
  std::vector<MetricsReport> prop;
  std::vector<MetricsReport> base;
  for (std::size_t k = 0; k < cfg.pairs; ++k) {
    AssemblyProblem a = gen_fuselage_pair(cfg.gen, k);
    a.scale_ln = cfg.scale_ln;
    PairOutcome out;
    out.pair_id = k;
    out.proposed = solve_pair(a, cfg.budget, cfg.admm, cfg.zero_tol);
    out.baseline = baseline_l2(a, cfg.budget, cfg.admm);
    out.proposed_metrics = metrics(out.proposed, a.n_meas());
    out.baseline_metrics = metrics(out.baseline, a.n_meas());
    res.all_converged = res.all_converged && out.proposed.converged() && out.baseline.converged();
    prop.push_back(out.proposed_metrics);
    base.push_back(out.baseline_metrics);
    if (progress) progress(out);
    res.pairs.push_back(std::move(out));
  }
  res.comparison = compare(prop, base);
  return res;
}

namespace {

nlohmann::json test_json(const MetricComparison& c) {
  return {{"mean", c.test.mean},
          {"std", c.test.std},
          {"t_statistic", c.test.t_statistic},
          {"p_value", c.test.p_value},
          {"degenerate_variance", c.test.degenerate_variance}};
}

}  // namespace

void write_study(const std::filesystem::path& dir, const StudyConfig& cfg, const StudyResult& result) {
  std::filesystem::create_directories(dir);
  write_file_atomic(dir / "pairs.csv", [&](std::ostream& out) {
    out << "pair_id,rmsg_prop,mg_prop,mf1_prop,mf2_prop,rmsg_base,mg_base,mf1_base,mf2_base,"
           "support_prop,lambda_prop,iters_select,iters_refit,converged\n";
    for (const PairOutcome& p : result.pairs) {
      const MetricsReport& a = p.proposed_metrics;
      const MetricsReport& b = p.baseline_metrics;
      out << p.pair_id << ',' << format_double(a.rmsg) << ',' << format_double(a.mg) << ',' << format_double(a.mf1)
          << ',' << format_double(a.mf2) << ',' << format_double(b.rmsg) << ',' << format_double(b.mg) << ','
          << format_double(b.mf1) << ',' << format_double(b.mf2) << ','
          << p.proposed.support1.size() + p.proposed.support2.size() << ','
          << format_double(p.proposed.lambda_used) << ',' << p.proposed.selection.iters << ','
          << p.proposed.refit.iters << ',' << (p.proposed.converged() && p.baseline.converged() ? 1 : 0) << '\n';
    }
  });
  write_file_atomic(dir / "boxplot.csv", [&](std::ostream& out) {
    out << "pair_id,method,metric,value\n";
    auto rows = [&](std::size_t id, const char* method, const MetricsReport& m) {
      out << id << ',' << method << ",rmsg," << format_double(m.rmsg) << '\n';
      out << id << ',' << method << ",mg," << format_double(m.mg) << '\n';
      out << id << ',' << method << ",mf1," << format_double(m.mf1) << '\n';
      out << id << ',' << method << ",mf2," << format_double(m.mf2) << '\n';
    };
    for (const PairOutcome& p : result.pairs) {
      rows(p.pair_id, "proposed", p.proposed_metrics);
      rows(p.pair_id, "baseline", p.baseline_metrics);
    }
  });

  auto method_means = [&](bool proposed) {
    Vector rmsg, mg, mf1, mf2;
    for (const PairOutcome& p : result.pairs) {
      const MetricsReport& m = proposed ? p.proposed_metrics : p.baseline_metrics;
      rmsg.push_back(m.rmsg);
      mg.push_back(m.mg);
      mf1.push_back(m.mf1);
      mf2.push_back(m.mf2);
    }
    return nlohmann::json{{"rmsg", {{"mean", mean(rmsg)}, {"std", sample_std(rmsg)}}},
                          {"mg", {{"mean", mean(mg)}, {"std", sample_std(mg)}}},
                          {"mf1", {{"mean", mean(mf1)}, {"std", sample_std(mf1)}}},
                          {"mf2", {{"mean", mean(mf2)}, {"std", sample_std(mf2)}}}};
  };
  const nlohmann::json summary = {
      {"format_version", 1},
      {"n_pairs", result.comparison.n_pairs},
      {"seed", cfg.gen.seed},
      {"budget", cfg.budget},
      {"scale_ln", cfg.scale_ln},
      {"admm",
       {{"rho", cfg.admm.rho},
        {"abs_tol", cfg.admm.abs_tol},
        {"rel_tol", cfg.admm.rel_tol},
        {"max_iters", cfg.admm.max_iters}}},
      {"all_converged", result.all_converged},
      {"proposed", method_means(true)},
      {"baseline", method_means(false)},
      {"improvement", {{"mg", test_json(result.comparison.mg)}, {"rmsg", test_json(result.comparison.rmsg)}}}};
  write_file_atomic(dir / "summary.json", [&](std::ostream& out) { out << summary.dump(2) << '\n'; });
}

}  // namespace shapectl
