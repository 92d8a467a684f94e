#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include <json.hpp>

#include "shapectl/numerics.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(SHAPECTL_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

const std::string kSmall = "--n-meas 24 --m-feasible 6";

}  // namespace

TEST_CASE("gen writes a reproducible bundle") {
  TempDir tmp("shapectl_cli_gen");
  const fs::path a = tmp.path / "a";
  const fs::path b = tmp.path / "b";
  REQUIRE(run("gen " + kSmall + " --seed 3 --budget 4 --out " + a.string()) == 0);
  REQUIRE(run("gen " + kSmall + " --seed 3 --budget 4 --out " + b.string()) == 0);
  for (const char* f : {"B.csv", "U1.csv", "U2.csv", "psi1.csv", "psi2.csv", "config.json", "manifest.json"}) {
    REQUIRE(fs::exists(a / f));
    CHECK(slurp(a / f) == slurp(b / f));
  }
  const json cfg = read_json(a / "config.json");
  CHECK(cfg.at("n_meas") == 24);
  CHECK(cfg.at("budget") == 4);
  CHECK(read_json(a / "manifest.json").at("seed") == 3);

  const fs::path c = tmp.path / "c";
  REQUIRE(run("gen " + kSmall + " --seed 4 --budget 4 --out " + c.string()) == 0);
  CHECK(slurp(a / "psi1.csv") != slurp(c / "psi1.csv"));
}

TEST_CASE("solve reports forces and a trace") {
  TempDir tmp("shapectl_cli_solve");
  const fs::path bundle = tmp.path / "bundle";
  REQUIRE(run("gen " + kSmall + " --seed 5 --budget 4 --out " + bundle.string()) == 0);
  const fs::path out = tmp.path / "solution.json";
  const fs::path trace = tmp.path / "trace.csv";
  const int code = run("solve --in " + bundle.string() + " --out " + out.string() + " --trace " + trace.string() +
                       " --with-baseline");
  CHECK((code == 0 || code == 1));
  const json sol = read_json(out);
  CHECK(sol.at("budget") == 4);
  const json& prop = sol.at("proposed");
  CHECK(prop.at("f1").size() == 6);
  CHECK(prop.at("support1").size() + prop.at("support2").size() <= 4);
  if (code == 0) CHECK(prop.at("converged").get<bool>());
  CHECK(sol.contains("baseline"));

  std::ifstream tr(trace);
  std::string header;
  std::getline(tr, header);
  CHECK(header == "stage,lambda,iter,r_norm,s_norm,eps_primal,eps_dual,objective");
  std::size_t rows = 0;
  bool saw_select = false, saw_refit = false;
  for (std::string line; std::getline(tr, line); ++rows) {
    saw_select = saw_select || line.rfind("select,", 0) == 0;
    saw_refit = saw_refit || line.rfind("refit,", 0) == 0;
  }
  CHECK(rows > 0);
  CHECK(saw_select);
  CHECK(saw_refit == !prop.at("empty_support").get<bool>());
}

TEST_CASE("solve on a zero-deviation bundle applies no force") {
  TempDir tmp("shapectl_cli_zero");
  const fs::path bundle = tmp.path / "bundle";
  REQUIRE(run("gen " + kSmall + " --deviation-scale 0 --budget 4 --out " + bundle.string()) == 0);
  const fs::path out = tmp.path / "solution.json";
  REQUIRE(run("solve --in " + bundle.string() + " --out " + out.string()) == 0);
  const json prop = read_json(out).at("proposed");
  for (double f : prop.at("f1").get<std::vector<double>>()) CHECK(f == 0.0);
  for (double f : prop.at("f2").get<std::vector<double>>()) CHECK(f == 0.0);
  CHECK(prop.at("metrics").at("mg") == 0.0);
}

TEST_CASE("study output is reproducible") {
  TempDir tmp("shapectl_cli_study");
  const std::string common = "study " + kSmall + " --pairs 2 --budget 4 --quiet --seed 7 --out ";
  const int a = run(common + (tmp.path / "a").string());
  const int b = run(common + (tmp.path / "b").string());
  CHECK((a == 0 || a == 1));
  CHECK(a == b);
  for (const char* f : {"pairs.csv", "boxplot.csv", "summary.json", "manifest.json"})
    CHECK(slurp(tmp.path / "a" / f) == slurp(tmp.path / "b" / f));
}

TEST_CASE("theory feasibility without noise") {
  TempDir tmp("shapectl_cli_theory");
  const fs::path out = tmp.path / "theory.json";
  REQUIRE(run("theory --check feasibility --feas-sigma 0 --feas-trials 20 --feas-n 30 --feas-p 40 --out " +
              out.string()) == 0);
  const json rep = read_json(out);
  CHECK_FALSE(rep.contains("scaling"));
  const json& pt = rep.at("feasibility").at("points").at(0);
  CHECK(pt.at("rate") == 1.0);
  CHECK(pt.at("trials") == 20);
}

TEST_CASE("exit codes for bad input and divergence") {
  TempDir tmp("shapectl_cli_errors");
  CHECK(run("") == 2);
  CHECK(run("gen") == 2);
  CHECK(run("solve --in " + (tmp.path / "missing").string() + " --out " + (tmp.path / "x.json").string()) == 2);
  CHECK(run("gen --n-meas 3 --m-feasible 6 --out " + (tmp.path / "g").string()) == 2);
  CHECK(run("theory --check feasibility --feas-alpha 1.5 --out " + (tmp.path / "t.json").string()) == 2);
  CHECK(run("theory --check scaling --scaling-n 100 --out " + (tmp.path / "t.json").string()) == 2);

  const fs::path bundle = tmp.path / "broken";
  REQUIRE(run("gen " + kSmall + " --out " + bundle.string()) == 0);
  {
    std::ofstream cfg(bundle / "config.json");
    cfg << "{\"n_meas\": 24";
  }
  CHECK(run("solve --in " + bundle.string() + " --out " + (tmp.path / "x.json").string()) == 2);

  // Deviations near the overflow limit make the squared residual norm
  // infinite on the first iteration.
  const fs::path huge = tmp.path / "huge";
  fs::create_directories(huge);
  shapectl::save_csv(huge / "B.csv", shapectl::Matrix::identity(1));
  shapectl::save_csv(huge / "U1.csv", shapectl::Matrix(2, 1, 1.0));
  shapectl::save_csv(huge / "U2.csv", shapectl::Matrix(2, 1, 0.5));
  shapectl::save_csv(huge / "psi1.csv", shapectl::Vector{-1e307, 1e307});
  shapectl::save_csv(huge / "psi2.csv", shapectl::Vector{1e307, -1e307});
  {
    std::ofstream cfg(huge / "config.json");
    cfg << R"({"n_meas": 1, "m1": 1, "m2": 1, "scale_ln": 1.0, "budget": 1})";
  }
  CHECK(run("solve --in " + huge.string() + " --out " + (tmp.path / "h.json").string()) == 3);
}
