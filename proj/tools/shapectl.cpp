// shapectl: generate synthetic assemblies, solve them, run the paired study
// against the l2 baseline, and run the Monte-Carlo estimator checks.
//
// Exit codes: 0 success, 1 artifacts written but some solve did not
// converge, 2 invalid input or I/O failure, 3 solver divergence.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <limits>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "shapectl/admm.hpp"
#include "shapectl/numerics.hpp"
#include "shapectl/problem.hpp"
#include "shapectl/sim.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace shapectl;

namespace {

constexpr int kExitNotConverged = 1;
constexpr int kExitInput = 2;
constexpr int kExitDiverged = 3;

void add_admm_flags(CLI::App* cmd, AdmmConfig& cfg) {
  cmd->add_option("--rho", cfg.rho, "ADMM penalty parameter")->capture_default_str();
  cmd->add_option("--abs-tol", cfg.abs_tol, "absolute tolerance e3")->capture_default_str();
  cmd->add_option("--rel-tol", cfg.rel_tol, "relative tolerance e4")->capture_default_str();
  cmd->add_option("--max-iters", cfg.max_iters, "iteration cap per ADMM solve")->capture_default_str();
}

void add_gen_flags(CLI::App* cmd, FuselageGenParams& g) {
  cmd->add_option("--n-meas", g.n_meas, "measurement points per fuselage")->capture_default_str();
  cmd->add_option("--m-feasible", g.m_feasible, "feasible actuators per fuselage")->capture_default_str();
  cmd->add_option("--radius", g.radius, "section radius, inches")->capture_default_str();
  cmd->add_option("--deviation-scale", g.deviation_scale, "peak radial deviation, inches")->capture_default_str();
  cmd->add_option("--fourier-modes", g.fourier_modes, "terms in the deviation series")->capture_default_str();
  cmd->add_option("--arc-start", g.arc_start_deg, "first actuator angle, degrees")->capture_default_str();
  cmd->add_option("--arc-end", g.arc_end_deg, "last actuator angle, degrees")->capture_default_str();
  cmd->add_option("--decay-rate", g.decay_rate, "influence decay per inch of arc")->capture_default_str();
  cmd->add_option("--fixture-fraction", g.fixture_fraction, "share of the section held by the fixture")
      ->capture_default_str();
  cmd->add_option("--compliance", g.compliance, "displacement per pound at the actuator, inches")
      ->capture_default_str();
  cmd->add_option("--seed", g.seed, "random seed")->capture_default_str();
}

json admm_json(const AdmmConfig& c) {
  return {{"rho", c.rho}, {"abs_tol", c.abs_tol}, {"rel_tol", c.rel_tol}, {"max_iters", c.max_iters}};
}

json gen_json(const FuselageGenParams& g) {
  return {{"n_meas", g.n_meas},
          {"m_feasible", g.m_feasible},
          {"radius", g.radius},
          {"deviation_scale", g.deviation_scale},
          {"fourier_modes", g.fourier_modes},
          {"arc_start_deg", g.arc_start_deg},
          {"arc_end_deg", g.arc_end_deg},
          {"decay_rate", g.decay_rate},
          {"fixture_fraction", g.fixture_fraction},
          {"fixture_center_deg", g.fixture_center_deg},
          {"compliance", g.compliance},
          {"tangential_ratio", g.tangential_ratio},
          {"compliance_jitter", g.compliance_jitter},
          {"decay_jitter", g.decay_jitter},
          {"seed", g.seed}};
}

json summary_json(const SolveSummary& s) {
  return {{"iters", s.iters},
          {"converged", s.converged},
          {"primal_residual", s.primal_residual},
          {"dual_residual", s.dual_residual},
          {"objective", s.objective}};
}

json metrics_json(const MetricsReport& m) {
  return {{"rmsg", m.rmsg}, {"mg", m.mg}, {"mf1", m.mf1}, {"mf2", m.mf2}};
}

json solution_json(const ControlSolution& s, std::size_t n_meas) {
  json probes = json::array();
  for (const SelectionProbe& p : s.trace)
    probes.push_back({{"lambda", p.lambda}, {"nonzeros", p.nonzeros}, {"iters", p.iters}, {"converged", p.converged}});
  return {{"f1", s.f1},
          {"f2", s.f2},
          {"support1", s.support1},
          {"support2", s.support2},
          {"lambda_used", s.lambda_used},
          {"metrics", metrics_json(metrics(s, n_meas))},
          {"selection", summary_json(s.selection)},
          {"refit", summary_json(s.refit)},
          {"probes", probes},
          {"empty_support", s.empty_support},
          {"budget_covers_all", s.budget_covers_all},
          {"converged", s.converged()}};
}

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_file_atomic(path, [&](std::ostream& out) { out << j.dump(2) << '\n'; });
}

// --- gen ---

struct GenOptions {
  FuselageGenParams gen;
  std::uint64_t stream = 0;
  double scale_ln = 1e7;
  std::size_t budget = 18;
  AdmmConfig admm;
  fs::path out;
};

int cmd_gen(const GenOptions& o) {
  o.gen.validate();
  o.admm.validate();
  AssemblyProblem a = gen_fuselage_pair(o.gen, o.stream);
  a.scale_ln = o.scale_ln;
  a.validate();
  fs::create_directories(o.out);
  save_assembly(o.out, a);
  const json config = {{"n_meas", a.n_meas()},   {"m1", a.m1()},         {"m2", a.m2()},
                       {"scale_ln", a.scale_ln}, {"budget", o.budget}, {"admm", admm_json(o.admm)}};
  write_json(o.out / "config.json", config);
  const json manifest = {{"format_version", 1},
                         {"command", "gen"},
                         {"seed", o.gen.seed},
                         {"pair_index", o.stream},
                         {"params", gen_json(o.gen)},
                         {"scale_ln", o.scale_ln},
                         {"files", {"B.csv", "U1.csv", "U2.csv", "psi1.csv", "psi2.csv", "config.json"}}};
  write_json(o.out / "manifest.json", manifest);
  return 0;
}

// --- solve ---

struct SolveOptions {
  fs::path in;
  fs::path out;
  fs::path trace;
  std::size_t budget = 18;
  AdmmConfig admm;
  double scale_ln = 1e7;
  double zero_tol = 1e-6;
  bool with_baseline = false;
};

struct TraceRow {
  std::string_view stage;
  double lambda;
  std::size_t iter;
  double r, s, e1, e2;
  double objective;  // ||z1||_inf + lambda ||z2||_1
};

int cmd_solve(SolveOptions o, const CLI::App& cmd) {
  BundleConfig bundle;
  AssemblyProblem a = load_assembly(o.in, &bundle);
  // Flags given on the command line override the bundle's config.json.
  if (cmd.count("--budget") == 0) o.budget = bundle.budget;
  if (cmd.count("--scale-ln") == 0) o.scale_ln = bundle.scale_ln;
  if (cmd.count("--rho") == 0) o.admm.rho = bundle.admm.rho;
  if (cmd.count("--abs-tol") == 0) o.admm.abs_tol = bundle.admm.abs_tol;
  if (cmd.count("--rel-tol") == 0) o.admm.rel_tol = bundle.admm.rel_tol;
  if (cmd.count("--max-iters") == 0) o.admm.max_iters = bundle.admm.max_iters;
  o.admm.validate();
  a.scale_ln = o.scale_ln;
  a.validate();

  std::vector<TraceRow> rows;
  PipelineObserver observer;
  if (!o.trace.empty())
    observer = [&](std::string_view stage, double lambda, const IterationInfo& info) {
      const std::span<const double> z(info.state.z);
      const std::size_t n_resid = z.size() - info.state.n_coef;
      const double obj = norm(z.first(n_resid), NormKind::linf) +
                         (info.state.n_coef > 0 ? lambda * norm(z.subspan(n_resid), NormKind::l1) : 0.0);
      rows.push_back(
          {stage, lambda, info.state.iter, info.r_norm, info.s_norm, info.eps_primal, info.eps_dual, obj});
    };
  const ControlSolution sol = solve_pair(a, o.budget, o.admm, o.zero_tol, observer);
  json out = {{"format_version", 1}, {"budget", o.budget}, {"scale_ln", o.scale_ln}, {"admm", admm_json(o.admm)}};
  out["proposed"] = solution_json(sol, a.n_meas());
  bool converged = sol.converged();
  if (o.with_baseline) {
    const ControlSolution base = baseline_l2(a, o.budget, o.admm);
    out["baseline"] = solution_json(base, a.n_meas());
    converged = converged && base.converged();
  }
  write_json(o.out, out);
  if (!o.trace.empty()) {
    write_file_atomic(o.trace, [&](std::ostream& f) {
      f << "stage,lambda,iter,r_norm,s_norm,eps_primal,eps_dual,objective\n";
      for (const TraceRow& r : rows)
        f << r.stage << ',' << format_double(r.lambda) << ',' << r.iter << ',' << format_double(r.r) << ','
          << format_double(r.s) << ',' << format_double(r.e1) << ',' << format_double(r.e2) << ','
          << format_double(r.objective) << '\n';
    });
  }
  if (!converged) {
    std::cerr << "shapectl solve: a solve stopped at the iteration cap without converging\n";
    return kExitNotConverged;
  }
  return 0;
}

// --- study ---

struct StudyOptions {
  StudyConfig study;
  fs::path out;
  bool quiet = false;
};

int cmd_study(const StudyOptions& o) {
  const auto start = std::chrono::steady_clock::now();
  StudyProgress progress;
  if (!o.quiet)
    progress = [&](const PairOutcome& p) {
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      std::fprintf(stderr, "pair %zu/%zu  mg %.4g vs %.4g  rmsg %.4g vs %.4g  %.1fs\n", p.pair_id + 1,
                   o.study.pairs, p.proposed_metrics.mg, p.baseline_metrics.mg, p.proposed_metrics.rmsg,
                   p.baseline_metrics.rmsg, secs);
    };
  const StudyResult res = run_study(o.study, progress);
  write_study(o.out, o.study, res);
  const json manifest = {{"format_version", 1},
                         {"command", "study"},
                         {"seed", o.study.gen.seed},
                         {"pairs", o.study.pairs},
                         {"budget", o.study.budget},
                         {"scale_ln", o.study.scale_ln},
                         {"params", gen_json(o.study.gen)},
                         {"admm", admm_json(o.study.admm)},
                         {"files", {"pairs.csv", "summary.json", "boxplot.csv"}}};
  write_json(o.out / "manifest.json", manifest);
  if (!res.all_converged) {
    std::cerr << "shapectl study: some solves stopped at the iteration cap without converging\n";
    return kExitNotConverged;
  }
  return 0;
}

// --- theory ---

struct TheoryOptions {
  std::string check = "all";
  TheoryCheckConfig feas{1.0, 3.0, 5, {100}, 200, 500, 0};
  TheoryCheckConfig scaling{0.1, 4.0, 5, {128, 256, 512, 1024}, 64, 50, 0};
  std::uint64_t seed = 0;
  fs::path out;
};

json config_json(const TheoryCheckConfig& c) {
  return {{"sigma", c.sigma}, {"alpha", c.alpha}, {"sparsity", c.sparsity}, {"n_grid", c.n_grid},
          {"p", c.p},         {"trials", c.trials}, {"seed", c.seed}};
}

json slope_json(const std::optional<SlopeEstimate>& s) {
  if (!s) return nullptr;
  return {{"slope", s->slope}, {"stderr", s->stderr_}, {"ci95", {s->ci_low, s->ci_high}}};
}

int cmd_theory(TheoryOptions o) {
  o.feas.seed = o.seed;
  o.scaling.seed = o.seed;
  json out = {{"format_version", 1}};
  if (o.check == "all" || o.check == "feasibility") {
    o.feas.validate();
    json pts = json::array();
    for (const FeasibilityPoint& p : monte_carlo_feasibility(o.feas))
      pts.push_back({{"n", p.n},
                     {"p", p.p},
                     {"trials", p.trials},
                     {"feasible", p.feasible},
                     {"rate", p.rate},
                     {"bound", p.bound}});
    out["feasibility"] = {{"config", config_json(o.feas)}, {"points", pts}};
  }
  if (o.check == "all" || o.check == "scaling") {
    o.scaling.validate();
    const ScalingReport rep = error_scaling_study(o.scaling);
    json pts = json::array();
    for (const ScalingPoint& p : rep.points)
      pts.push_back({{"n", p.n},
                     {"solved", p.solved},
                     {"infeasible", p.infeasible},
                     {"estimation_mean", p.estimation_mean},
                     {"estimation_se", p.estimation_se},
                     {"prediction_mean", p.prediction_mean},
                     {"prediction_se", p.prediction_se},
                     {"restricted_eigen_min", p.restricted_eigen_min}});
    out["scaling"] = {{"config", config_json(o.scaling)},
                      {"points", pts},
                      {"estimation_slope", slope_json(rep.estimation_slope)},
                      {"prediction_slope", slope_json(rep.prediction_slope)}};
  }
  write_json(o.out, out);
  return 0;
}

// --- bench ---

struct BenchOptions {
  FuselageGenParams gen;
  AdmmConfig admm;
  double lambda_fraction = 1e-3;
  std::size_t iters = 5000;
};

int cmd_bench(BenchOptions o) {
  const AssemblyProblem a = gen_fuselage_pair(o.gen, 0);
  const RegressionProblem reg = build_regression(a);
  const SplitProblem split = SplitProblem::from_regression(reg.x, reg.y);
  AdmmConfig cfg = o.admm;
  cfg.lambda = o.lambda_fraction * lambda_upper_bound(reg.x);
  cfg.max_iters = o.iters;
  // Tolerances no iterate can meet, so every requested iteration runs.
  cfg.abs_tol = std::numeric_limits<double>::min();
  cfg.rel_tol = std::numeric_limits<double>::min();
  const auto start = std::chrono::steady_clock::now();
  const AdmmResult res = solve_penalized(split, cfg);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const json out = {{"n_resid", split.n_resid()},
                    {"n_coef", split.n_coef()},
                    {"iters", res.iters_used},
                    {"seconds", secs},
                    {"us_per_iter", 1e6 * secs / static_cast<double>(res.iters_used)}};
  std::cout << out.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse actuator placement and force control for fuselage assembly"};
  app.require_subcommand(1);

  GenOptions gen;
  CLI::App* gen_cmd = app.add_subcommand("gen", "write a synthetic assembly bundle");
  add_gen_flags(gen_cmd, gen.gen);
  gen_cmd->add_option("--pair-index", gen.stream, "pair within the seed's family")->capture_default_str();
  gen_cmd->add_option("--scale-ln", gen.scale_ln, "scaling constant L_N stored in config.json")
      ->capture_default_str();
  gen_cmd->add_option("--budget", gen.budget, "actuator budget M stored in config.json")->capture_default_str();
  add_admm_flags(gen_cmd, gen.admm);
  gen_cmd->add_option("--out", gen.out, "output directory")->required();

  SolveOptions solve;
  CLI::App* solve_cmd = app.add_subcommand("solve", "select actuators and forces for one bundle");
  solve_cmd->add_option("--in", solve.in, "bundle directory")->required();
  solve_cmd->add_option("--out", solve.out, "solution JSON path")->required();
  solve_cmd->add_option("--trace", solve.trace, "per-iteration residual CSV path");
  solve_cmd->add_option("--budget", solve.budget, "actuator budget M (default: config.json)");
  solve_cmd->add_option("--scale-ln", solve.scale_ln, "scaling constant L_N (default: config.json)");
  solve_cmd->add_option("--zero-tol", solve.zero_tol, "relative cutoff for counting nonzeros")
      ->capture_default_str();
  solve_cmd->add_flag("--with-baseline", solve.with_baseline, "also solve the l2 design-shape baseline");
  add_admm_flags(solve_cmd, solve.admm);

  StudyOptions study;
  CLI::App* study_cmd = app.add_subcommand("study", "paired comparison against the l2 baseline");
  add_gen_flags(study_cmd, study.study.gen);
  study_cmd->add_option("--pairs", study.study.pairs, "number of fuselage pairs")->capture_default_str();
  study_cmd->add_option("--budget", study.study.budget, "actuator budget M")->capture_default_str();
  study_cmd->add_option("--scale-ln", study.study.scale_ln, "scaling constant L_N")->capture_default_str();
  study_cmd->add_option("--zero-tol", study.study.zero_tol, "relative cutoff for counting nonzeros")
      ->capture_default_str();
  add_admm_flags(study_cmd, study.study.admm);
  study_cmd->add_option("--out", study.out, "output directory")->required();
  study_cmd->add_flag("--quiet", study.quiet, "no per-pair progress on stderr");

  TheoryOptions theory;
  CLI::App* theory_cmd = app.add_subcommand("theory", "Monte-Carlo feasibility and error-scaling checks");
  theory_cmd->add_option("--check", theory.check, "feasibility, scaling or all")
      ->check(CLI::IsMember({"all", "feasibility", "scaling"}))
      ->capture_default_str();
  theory_cmd->add_option("--seed", theory.seed, "random seed")->capture_default_str();
  theory_cmd->add_option("--feas-sigma", theory.feas.sigma, "noise scale")->capture_default_str();
  theory_cmd->add_option("--feas-alpha", theory.feas.alpha, "constant in lambda0 (> 2)")->capture_default_str();
  theory_cmd->add_option("--feas-p", theory.feas.p, "number of coefficients")->capture_default_str();
  theory_cmd->add_option("--feas-sparsity", theory.feas.sparsity, "nonzero coefficients")->capture_default_str();
  theory_cmd->add_option("--feas-n", theory.feas.n_grid, "sample sizes")->capture_default_str();
  theory_cmd->add_option("--feas-trials", theory.feas.trials, "trials per sample size")->capture_default_str();
  theory_cmd->add_option("--scaling-sigma", theory.scaling.sigma, "noise scale")->capture_default_str();
  theory_cmd->add_option("--scaling-alpha", theory.scaling.alpha, "constant in lambda0 (> 2)")
      ->capture_default_str();
  theory_cmd->add_option("--scaling-p", theory.scaling.p, "number of coefficients")->capture_default_str();
  theory_cmd->add_option("--scaling-sparsity", theory.scaling.sparsity, "nonzero coefficients")
      ->capture_default_str();
  theory_cmd->add_option("--scaling-n", theory.scaling.n_grid, "sample sizes")->capture_default_str();
  theory_cmd->add_option("--scaling-trials", theory.scaling.trials, "trials per sample size")
      ->capture_default_str();
  theory_cmd->add_option("--out", theory.out, "report JSON path")->required();

  BenchOptions bench;
  CLI::App* bench_cmd = app.add_subcommand("bench", "time ADMM iterations on a synthetic pair");
  add_gen_flags(bench_cmd, bench.gen);
  add_admm_flags(bench_cmd, bench.admm);
  bench_cmd->add_option("--lambda-fraction", bench.lambda_fraction, "lambda as a fraction of max |X_ij|")
      ->capture_default_str();
  bench_cmd->add_option("--iters", bench.iters, "iterations to time")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInput;
  }

  try {
    if (*gen_cmd) return cmd_gen(gen);
    if (*solve_cmd) return cmd_solve(solve, *solve_cmd);
    if (*study_cmd) {
      study.study.gen.validate();
      study.study.admm.validate();
      return cmd_study(study);
    }
    if (*theory_cmd) return cmd_theory(theory);
    if (*bench_cmd) return cmd_bench(bench);
  } catch (const NumericalError& e) {
    std::cerr << "shapectl: " << e.what() << '\n';
    return kExitDiverged;
  } catch (const std::exception& e) {
    std::cerr << "shapectl: " << e.what() << '\n';
    return kExitInput;
  }
  return 0;
}
