#pragma once

// Reference solvers for cross-checking: a dense two-phase simplex with the
// LP recasts, a subgradient method, grid minimization, and enumeration.
// They are slow and meant for small instances.

#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "shapectl/numerics.hpp"

namespace shapectl::oracle {

class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// minimize c'x  subject to  a x = b, x >= 0
struct LpStandardForm {
  Vector c;
  Matrix a;
  Vector b;

  void validate() const;
};

enum class LpStatus { optimal, infeasible, unbounded };

struct LpSolution {
  LpStatus status = LpStatus::infeasible;
  Vector x;
  double objective = 0.0;
  /// Smallest reduced cost at termination (>= -tol at an optimum).
  double min_reduced_cost = 0.0;
  /// max |a x - b| and max(0, -x_i).
  double max_violation = 0.0;
  /// Simplex multipliers y with reduced costs c - a'y.
  Vector duals;
  std::size_t pivots = 0;
};

/// Dense tableau, Bland's rule, phase 1 on artificial variables.
LpSolution simplex(const LpStandardForm& lp, double tol = 1e-9);

/// minimize ||beta||_1  subject to  ||Y - X beta||_inf <= sqrt(n) lambda0,
/// through the auxiliary-bound recast with -g <= beta <= g. Throws
/// InfeasibleError when no beta satisfies the residual bound.
Vector lp_solve_constrained(const Matrix& x, std::span<const double> y, double lambda0);

/// Same problem solved from its dual, which has 2p rows and a feasible
/// origin. Suited to n much larger than p.
Vector lp_solve_constrained_dual(const Matrix& x, std::span<const double> y, double lambda0);

struct MinimaxSolution {
  Vector beta;
  double objective;  // ||a beta + b||_inf + lambda ||beta||_1
};

/// minimize ||a beta + b||_inf + lambda ||beta||_1 by simplex.
MinimaxSolution lp_solve_minimax(const Matrix& a, std::span<const double> b, double lambda = 0.0);

struct SubgradientResult {
  Vector beta;
  double objective;
  /// Largest objective decrease seen over the final stage; a rough gap
  /// estimate, not a certificate.
  double gap_estimate;
};

/// Subgradient descent on ||Y - X beta||_inf + lambda ||beta||_1 from zero.
/// Steps decay geometrically by stage and each stage restarts from the best
/// iterate so far.
SubgradientResult subgradient_solve(const Matrix& x, std::span<const double> y, double lambda, std::size_t iters);

using GridObjective = std::function<double(std::span<const double>)>;

/// Nested grid search: an exhaustive grid on the box, then repeated zooms
/// around the best point until the spacing reaches `grid_step`. Valid for
/// strongly convex objectives. dim <= 3.
Vector grid_minimize(const GridObjective& f, std::span<const double> center, double half_width, double grid_step);

/// Grid minimizer of t ||u||_inf + 0.5 ||u - v||^2 over the box
/// [-1.5 ||v||_inf, 1.5 ||v||_inf]^dim. dim <= 3.
Vector brute_force_prox_check(std::span<const double> v, double t, double grid_step);

/// Euclidean projection onto {||x||_1 <= radius} by enumerating every
/// support and sign pattern. dim <= 4.
Vector project_l1_ball_enumerate(std::span<const double> v, double radius);

/// Orthonormal basis (as columns) of the null space of e, via reduced row
/// echelon form with partial pivoting.
Matrix null_space_basis(const Matrix& e, double tol = 1e-10);

/// P(T > t) for Student-t by composite Simpson integration of the density.
double student_t_sf_quadrature(double t, double dof);

}  // namespace shapectl::oracle
