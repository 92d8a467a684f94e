#pragma once

// Closed-form proximal operators used by the splitting solver.
//
//   soft_threshold   prox of t*||.||_1
//   project_l1_ball  Euclidean projection onto {x : ||x||_1 <= r}
//   prox_linf        prox of t*||.||_inf, via Moreau: v - P_{||.||_1 <= t}(v)
//   prox_affine      projection onto {x : E x = b}

#include <span>

#include "shapectl/numerics.hpp"

namespace shapectl {

struct L1BallProjectionResult {
  Vector projected;
  /// Threshold with ||S_lambda*(v)||_1 = radius; zero when v is inside the ball.
  double lambda_star = 0.0;
};

enum class L1ProjectionMethod {
  exact,      // exact threshold by iterative filtering
  bisection,  // root of phi(lambda) = ||S_lambda(v)||_1 - radius
};

Vector soft_threshold(std::span<const double> v, double t);

L1BallProjectionResult project_l1_ball(std::span<const double> v, double radius,
                                       L1ProjectionMethod method = L1ProjectionMethod::exact);

/// ||S_lambda(v)||_1 - radius; non-increasing in lambda.
double l1_ball_residual(std::span<const double> v, double lambda, double radius);

Vector prox_linf(std::span<const double> v, double t);

/// Projects z onto {x : E x = b} given a factorization of E E'.
Vector prox_affine(std::span<const double> z, const Matrix& e, const SpdFactorization& ee_t,
                   std::span<const double> b);

namespace detail {

// Allocation-free kernels for the solver's inner loop. `scratch` is resized as
// needed. Returns lambda_star.
double project_l1_ball_into(std::span<const double> v, double radius, std::span<double> out,
                            std::vector<double>& scratch);
void prox_linf_into(std::span<const double> v, double t, std::span<double> out,
                    std::vector<double>& scratch);
void soft_threshold_into(std::span<const double> v, double t, std::span<double> out);

}  // namespace detail

}  // namespace shapectl
