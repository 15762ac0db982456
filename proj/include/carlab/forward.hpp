#pragma once

/// \file forward.hpp
/// \brief Implicit Euler stepping of dt y + Laplacian^2 y + sum p_beta d^beta y = R f
///        with y = Laplacian y = 0 on the boundary.

#include <Eigen/SparseLU>
#include <memory>
#include <vector>

#include "carlab/field.hpp"
#include "carlab/geometry.hpp"
#include "carlab/operators.hpp"

namespace carlab {

/// Right-hand side R(x,t) f(x). R holds every time level of the grid.
struct SourceModel {
  SpaceTimeField R;
  Vec f;
  double r0 = 0.0;

  /// R constant in time.
  static SourceModel separable(const Grid& grid, const Vec& R_space, const Vec& f, double r0);

  /// Throws naming the first nodes where |R(x, t_m)| < r0.
  void check_positivity(const Grid& grid, int level) const;

  Vec forcing(int level) const { return R.level(level).cwiseProduct(f); }
};

/// Time level nearest to t.
int nearest_level(const Grid& grid, double t);

/// Owns the factorisation of I + dt K for one grid and coefficient set.
class ForwardSolver {
public:
  ForwardSolver(const Grid& grid, const CoefficientSet& coeffs);

  const Grid& grid() const { return grid_; }
  const SpMat& spatial() const { return K_; }

  /// One implicit step: solves (I + dt K) y_next = y + dt * interior(load).
  Vec step(const Vec& y, const Vec& load) const;

  /// Full trajectory over all levels; loads(m) is the source at level m
  /// (level 0 ignored). Pass an empty field for zero forcing.
  SpaceTimeField solve(const Vec& y_init, const SpaceTimeField& loads) const;

  /// Transpose of the zero-initial-data map load -> trajectory. Given
  /// sensitivities w (levels 1..Nt, dual to y), returns p with
  /// <w, y> = sum_m dt <interior(load^m), p^m>.
  SpaceTimeField solve_transpose(const SpaceTimeField& w) const;

private:
  Vec solve_system(const Vec& rhs) const;
  Vec solve_system_transpose(const Vec& rhs) const;

  Grid grid_;
  SpMat K_;
  SpMat A_;
  Vec interior_;
  std::shared_ptr<Eigen::SparseLU<SpMat>> lu_;
};

/// Convenience wrapper: validates the source at level 0 and y_init's trace.
SpaceTimeField solve_forward(const Grid& grid, const CoefficientSet& coeffs,
                             const SourceModel& source, const Vec& y_init);

/// exp(-(k pi)^4 t) prod_a sin(k pi (x_a - lo_a) / L_a) scaled to the box.
SpaceTimeField modal_solution(const Grid& grid, int k);

/// Largest |y| and |Laplacian y| (odd reflection) on boundary nodes over all levels.
double navier_trace_residual(const Grid& grid, const SpaceTimeField& y);

enum class RefinementAxis { Space, Time };

struct ConvergenceRow {
  int nodes = 0;
  int Nt = 0;
  double h = 0.0;
  double dt = 0.0;
  double error = 0.0;      ///< L^2 error at t = T
  double rel_error = 0.0;  ///< relative to the exact L^2 norm at t = T
};

struct ConvergenceTable {
  RefinementAxis axis = RefinementAxis::Space;
  std::vector<ConvergenceRow> rows;
  /// Observed order between consecutive rows.
  std::vector<double> orders;
  std::vector<double> ratios;
};

/// Compares solve_forward against the first spatial mode on each grid. The
/// grids must refine a single parameter (h or dt); at least three.
ConvergenceTable manufactured_convergence(const std::vector<Grid>& grids, int k = 1);

}  // namespace carlab
