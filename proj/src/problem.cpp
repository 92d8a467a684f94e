#include "shapectl/problem.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

namespace shapectl {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

void AssemblyProblem::validate() const {
  const std::size_t n = n_meas();
  require(n > 0 && b.cols() == n, "assembly: B must be square and nonempty");
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) require(b(i, i) >= 0.0, "assembly: B must have nonnegative diagonal");
      else require(b(i, j) == 0.0, "assembly: B must be diagonal");
    }
  require(u1.rows() == 2 * n && u2.rows() == 2 * n, "assembly: U1 and U2 need 2*n_meas rows");
  require(m1() > 0 && m2() > 0, "assembly: U1 and U2 need at least one column");
  require(psi1.size() == 2 * n && psi2.size() == 2 * n, "assembly: psi vectors need 2*n_meas entries");
  require(all_finite(psi1) && all_finite(psi2), "assembly: psi must be finite");
  require(scale_ln > 0.0 && std::isfinite(scale_ln), "assembly: L_N must be positive");
}

RegressionProblem build_regression(const AssemblyProblem& assembly) {
  assembly.validate();
  const std::size_t n = assembly.n_meas();
  const std::size_t m1 = assembly.m1();
  const std::size_t m2 = assembly.m2();
  const double ln = assembly.scale_ln;
  RegressionProblem reg{Matrix(2 * n, m1 + m2), Vector(2 * n)};
  for (std::size_t r = 0; r < 2 * n; ++r) {
    const double w = assembly.b(r % n, r % n) * ln;
    for (std::size_t j = 0; j < m1; ++j) reg.x(r, j) = w * assembly.u1(r, j);
    for (std::size_t j = 0; j < m2; ++j) reg.x(r, m1 + j) = -w * assembly.u2(r, j);
    reg.y[r] = w * (assembly.psi2[r] - assembly.psi1[r]);
  }
  return reg;
}

double lambda_upper_bound(const Matrix& x) {
  const double ub = matrix_max_abs(x);
  require(ub > 0.0, "lambda_upper_bound: X is zero");
  return ub;
}

std::size_t count_nonzeros(std::span<const double> beta, double zero_tol) {
  return support_of(beta, zero_tol).size();
}

std::vector<std::size_t> support_of(std::span<const double> beta, double zero_tol) {
  require(zero_tol > 0.0, "count_nonzeros: zero_tol must be positive");
  std::vector<std::size_t> idx;
  if (beta.empty()) return idx;
  const double cut = zero_tol * std::max(1.0, norm(beta, NormKind::linf));
  for (std::size_t i = 0; i < beta.size(); ++i)
    if (std::abs(beta[i]) > cut) idx.push_back(i);
  return idx;
}

SolveSummary summarize(const AdmmResult& result) {
  return {result.iters_used, result.converged, result.primal_residual, result.dual_residual, result.objective};
}

SelectionResult select_actuators(const RegressionProblem& problem, std::size_t budget, const AdmmConfig& config,
                                 double zero_tol, const PipelineObserver& observer) {
  require(budget >= 1, "select_actuators: budget must be at least 1");
  require(problem.x.rows() == problem.y.size(), "select_actuators: X rows must match Y length");
  config.validate();
  const std::size_t p = problem.p();
  SelectionResult sel;
  if (budget >= p) {
    sel.support.resize(p);
    for (std::size_t i = 0; i < p; ++i) sel.support[i] = i;
    sel.budget_covers_all = true;
    return sel;
  }

  const double upper = lambda_upper_bound(problem.x);
  const SplitProblem split = SplitProblem::from_regression(problem.x, problem.y);
  // Above the bound the solution is zero, so the empty support is the
  // starting candidate.
  sel.lambda_used = upper;
  bool have_probe = false;
  double lo = 0.0;
  double hi = upper;
  while (hi - lo > 1e-10 * upper) {
    const double mid = 0.5 * (lo + hi);
    AdmmConfig cfg = config;
    cfg.lambda = mid;
    IterationObserver obs;
    if (observer) obs = [&](const IterationInfo& info) { observer("select", mid, info); };
    const AdmmResult res = solve_penalized(split, cfg, obs);
    std::vector<std::size_t> supp = support_of(res.solution, zero_tol);
    const std::size_t k = supp.size();
    sel.trace.push_back({mid, k, res.iters_used, res.converged});
    if (k <= budget) {
      hi = mid;
      if (!have_probe || k > sel.support.size() || (k == sel.support.size() && mid < sel.lambda_used)) {
        sel.support = std::move(supp);
        sel.lambda_used = mid;
        sel.solve = summarize(res);
        have_probe = true;
      }
      if (k == budget) break;
    } else {
      lo = mid;
    }
  }
  return sel;
}

bool ControlSolution::converged() const noexcept {
  const bool sel_ok = selection.converged || budget_covers_all || selection.iters == 0;
  const bool refit_ok = refit.converged || empty_support;
  return sel_ok && refit_ok;
}

Vector compute_delta(const AssemblyProblem& assembly, std::span<const double> f1, std::span<const double> f2) {
  require(f1.size() == assembly.m1() && f2.size() == assembly.m2(), "compute_delta: force length mismatch");
  const Vector a = matvec(assembly.u1, f1);
  const Vector c = matvec(assembly.u2, f2);
  Vector delta(assembly.psi1.size());
  for (std::size_t i = 0; i < delta.size(); ++i) delta[i] = assembly.psi2[i] + c[i] - assembly.psi1[i] - a[i];
  return delta;
}

ControlSolution solve_pair(const AssemblyProblem& assembly, std::size_t budget, const AdmmConfig& config,
                           double zero_tol, const PipelineObserver& observer) {
  const RegressionProblem reg = build_regression(assembly);
  const std::size_t m1 = assembly.m1();
  require(budget >= 1 && budget <= reg.p(), "solve_pair: budget must lie in [1, m1 + m2]");

  ControlSolution sol;
  sol.f1.assign(m1, 0.0);
  sol.f2.assign(assembly.m2(), 0.0);

  const SelectionResult sel = select_actuators(reg, budget, config, zero_tol, observer);
  sol.lambda_used = sel.budget_covers_all ? 0.0 : sel.lambda_used;
  sol.selection = sel.solve;
  sol.trace = sel.trace;
  sol.budget_covers_all = sel.budget_covers_all;

  if (sel.support.empty()) {
    sol.empty_support = true;
  } else {
    const SplitProblem split = SplitProblem::from_regression(reg.x, reg.y);
    IterationObserver obs;
    if (observer) obs = [&](const IterationInfo& info) { observer("refit", 0.0, info); };
    const AdmmResult refit = solve_refit(split, sel.support, config, obs);
    sol.refit = summarize(refit);
    for (std::size_t idx : sel.support) {
      if (idx < m1) {
        sol.support1.push_back(idx);
        sol.f1[idx] = refit.solution[idx];
      } else {
        sol.support2.push_back(idx - m1);
        sol.f2[idx - m1] = refit.solution[idx];
      }
    }
  }
  sol.delta = compute_delta(assembly, sol.f1, sol.f2);
  return sol;
}

namespace {

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
}

}  // namespace

AssemblyProblem load_assembly(const std::filesystem::path& dir, BundleConfig* config_out) {
  const nlohmann::json j = read_json(dir / "config.json");
  BundleConfig cfg;
  try {
    cfg.n_meas = j.at("n_meas").get<std::size_t>();
    cfg.m1 = j.at("m1").get<std::size_t>();
    cfg.m2 = j.at("m2").get<std::size_t>();
    cfg.scale_ln = j.at("scale_ln").get<double>();
    cfg.budget = j.value("budget", cfg.budget);
    if (j.contains("admm")) {
      const auto& a = j.at("admm");
      cfg.admm.rho = a.value("rho", cfg.admm.rho);
      cfg.admm.abs_tol = a.value("abs_tol", cfg.admm.abs_tol);
      cfg.admm.rel_tol = a.value("rel_tol", cfg.admm.rel_tol);
      cfg.admm.max_iters = a.value("max_iters", cfg.admm.max_iters);
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("config.json: " + std::string(e.what()));
  }
  cfg.admm.validate();

  AssemblyProblem a;
  a.b = load_matrix_csv(dir / "B.csv");
  a.u1 = load_matrix_csv(dir / "U1.csv");
  a.u2 = load_matrix_csv(dir / "U2.csv");
  a.psi1 = load_vector_csv(dir / "psi1.csv");
  a.psi2 = load_vector_csv(dir / "psi2.csv");
  a.scale_ln = cfg.scale_ln;
  a.validate();
  require(a.n_meas() == cfg.n_meas && a.m1() == cfg.m1 && a.m2() == cfg.m2,
          "config.json: dimensions disagree with the CSV files");
  if (config_out) *config_out = cfg;
  return a;
}

void save_assembly(const std::filesystem::path& dir, const AssemblyProblem& assembly) {
  save_csv(dir / "B.csv", assembly.b);
  save_csv(dir / "U1.csv", assembly.u1);
  save_csv(dir / "U2.csv", assembly.u2);
  save_csv(dir / "psi1.csv", assembly.psi1);
  save_csv(dir / "psi2.csv", assembly.psi2);
}

}  // namespace shapectl
