#include <doctest.h>

#include "shapectl/oracle.hpp"
#include "shapectl/prox.hpp"
#include "test_util.hpp"

using namespace shapectl;
using shapectl::testing::max_abs_diff;
using shapectl::testing::random_matrix;
using shapectl::testing::random_vector;

TEST_CASE("soft_threshold") {
  CHECK(soft_threshold(Vector{2, -0.5, 1.5}, 1.0) == Vector{1, 0, 0.5});
  const Vector v{0.3, -7, 0};
  CHECK(soft_threshold(v, 0.0) == v);
  CHECK(soft_threshold(Vector{3, -3}, 5) == Vector{0, 0});
  CHECK_THROWS_AS(soft_threshold(v, -1e-3), std::invalid_argument);
}

TEST_CASE("soft_threshold minimizes t|u|_1 + 0.5|u - v|^2 on a grid") {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> thr(0.0, 1.5);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t dim = 1 + trial % 2;
    const Vector v = random_vector(rng, dim);
    const double t = thr(rng);
    const auto f = [&](std::span<const double> u) {
      double s = 0.0;
      for (std::size_t i = 0; i < dim; ++i) s += t * std::abs(u[i]) + 0.5 * (u[i] - v[i]) * (u[i] - v[i]);
      return s;
    };
    const Vector grid = oracle::grid_minimize(f, v, 1.5 * norm(v, NormKind::linf) + 1e-3, 1e-5);
    CHECK(max_abs_diff(soft_threshold(v, t), grid) < 1e-4);
  }
}

TEST_CASE("project_l1_ball examples") {
  auto r = project_l1_ball(Vector{3, 0}, 1.0);
  CHECK(r.projected == Vector{1, 0});
  CHECK(r.lambda_star == doctest::Approx(2.0));

  r = project_l1_ball(Vector{0.3, -0.2}, 1.0);
  CHECK(r.projected == Vector{0.3, -0.2});
  CHECK(r.lambda_star == 0.0);

  // 2 (0.6 - l) = 1 gives l = 0.1; the grid scan below confirms the root.
  r = project_l1_ball(Vector{0.6, 0.6}, 1.0);
  CHECK(max_abs_diff(r.projected, Vector{0.5, 0.5}) < 1e-15);
  CHECK(r.lambda_star == doctest::Approx(0.1).epsilon(1e-12));
  double best = 0.0;
  double best_gap = 1e300;
  for (int k = 0; k <= 60000; ++k) {
    const double lam = 0.6 * k / 60000.0;
    const double gap = std::abs(l1_ball_residual(Vector{0.6, 0.6}, lam, 1.0));
    if (gap < best_gap) {
      best_gap = gap;
      best = lam;
    }
  }
  CHECK(best == doctest::Approx(0.1).epsilon(1e-4));

  CHECK_THROWS_AS(project_l1_ball(Vector{1, 2}, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(project_l1_ball(Vector{1, 2}, -1.0), std::invalid_argument);
}

TEST_CASE("project_l1_ball agrees with enumeration and bisection") {
  std::mt19937_64 rng(43);
  std::uniform_real_distribution<double> rad(0.05, 3.0);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t dim = 1 + trial % 4;
    const Vector v = random_vector(rng, dim, 1.5);
    const double radius = rad(rng);
    const auto exact = project_l1_ball(v, radius);
    CHECK(norm(exact.projected, NormKind::l1) <= radius + 1e-9);
    CHECK(max_abs_diff(exact.projected, oracle::project_l1_ball_enumerate(v, radius)) < 1e-8);
    const auto bis = project_l1_ball(v, radius, L1ProjectionMethod::bisection);
    CHECK(max_abs_diff(exact.projected, bis.projected) < 1e-8);
  }
}

TEST_CASE("l1 ball residual is non-increasing in the threshold") {
  std::mt19937_64 rng(47);
  for (int trial = 0; trial < 50; ++trial) {
    const Vector v = random_vector(rng, 8);
    double prev = l1_ball_residual(v, 0.0, 1.0);
    for (int k = 1; k <= 100; ++k) {
      const double cur = l1_ball_residual(v, 0.03 * k, 1.0);
      CHECK(cur <= prev);
      prev = cur;
    }
  }
}

TEST_CASE("project_l1_ball with tied magnitudes") {
  const auto r = project_l1_ball(Vector{1, -1, 1, -1}, 2.0);
  CHECK(max_abs_diff(r.projected, Vector{0.5, -0.5, 0.5, -0.5}) < 1e-15);
  CHECK(r.lambda_star == doctest::Approx(0.5));
}

TEST_CASE("prox_linf") {
  CHECK(prox_linf(Vector{0.2, -0.3}, 1.0) == Vector{0.0, 0.0});
  CHECK(max_abs_diff(prox_linf(Vector{3, 0}, 1.0), Vector{2, 0}) < 1e-15);
  const Vector grid = oracle::brute_force_prox_check(Vector{3, 0}, 1.0, 1e-5);
  CHECK(max_abs_diff(grid, Vector{2, 0}) < 1e-4);
  CHECK_THROWS_AS(prox_linf(Vector{1}, 0.0), std::invalid_argument);
}

TEST_CASE("Moreau decomposition at unit scale") {
  std::mt19937_64 rng(53);
  for (int trial = 0; trial < 200; ++trial) {
    const Vector v = random_vector(rng, 1 + trial % 9, 2.0);
    const Vector p = prox_linf(v, 1.0);
    const Vector q = project_l1_ball(v, 1.0).projected;
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(std::abs(p[i] + q[i] - v[i]) <= 1e-12);
  }
}

TEST_CASE("prox operators are nonexpansive") {
  std::mt19937_64 rng(59);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t dim = 1 + trial % 7;
    const Vector x = random_vector(rng, dim, 2.0);
    const Vector y = random_vector(rng, dim, 2.0);
    auto dist = [](const Vector& a, const Vector& b) {
      double s = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
      return std::sqrt(s);
    };
    const double d = dist(x, y);
    CHECK(dist(soft_threshold(x, 0.4), soft_threshold(y, 0.4)) <= d + 1e-12);
    CHECK(dist(prox_linf(x, 0.7), prox_linf(y, 0.7)) <= d + 1e-12);
    CHECK(dist(project_l1_ball(x, 1.2).projected, project_l1_ball(y, 1.2).projected) <= d + 1e-12);
  }
}

TEST_CASE("prox_affine") {
  SUBCASE("identity constraint") {
    const Matrix e = Matrix::identity(2);
    const auto f = SpdFactorization::factorize(gram_rows(e));
    CHECK(max_abs_diff(prox_affine(Vector{7, -3}, e, f, Vector{1, 2}), Vector{1, 2}) < 1e-15);
  }
  SUBCASE("feasible point is fixed") {
    const Matrix e = Matrix::from_rows({{1, 1, 0}, {0, 1, -1}});
    const Vector z{1, 2, 3};
    const Vector b = matvec(e, z);
    const auto f = SpdFactorization::factorize(gram_rows(e));
    CHECK(max_abs_diff(prox_affine(z, e, f, b), z) < 1e-14);
  }
  SUBCASE("random instance is feasible and orthogonal to the null space") {
    std::mt19937_64 rng(61);
    for (int trial = 0; trial < 20; ++trial) {
      const Matrix e = random_matrix(rng, 3, 7);
      const Vector b = matvec(e, random_vector(rng, 7));
      const Vector z = random_vector(rng, 7, 3.0);
      const auto f = SpdFactorization::factorize(gram_rows(e));
      const Vector x = prox_affine(z, e, f, b);
      CHECK(max_abs_diff(matvec(e, x), b) < 1e-8);
      const Matrix null = oracle::null_space_basis(e);
      REQUIRE(null.cols() == 4);
      Vector diff(7);
      for (std::size_t i = 0; i < 7; ++i) diff[i] = z[i] - x[i];
      for (std::size_t k = 0; k < null.cols(); ++k) {
        double ip = 0.0;
        for (std::size_t i = 0; i < 7; ++i) ip += diff[i] * null(i, k);
        CHECK(std::abs(ip) < 1e-10);
      }
    }
  }
  SUBCASE("dimension mismatch") {
    const Matrix e = Matrix::identity(2);
    const auto f = SpdFactorization::factorize(e);
    CHECK_THROWS_AS(prox_affine(Vector{1, 2, 3}, e, f, Vector{1, 2}), std::invalid_argument);
    CHECK_THROWS_AS(prox_affine(Vector{1, 2}, e, f, Vector{1}), std::invalid_argument);
  }
}
