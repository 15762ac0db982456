#pragma once

/// \file carleman.hpp
/// \brief Empirical evaluation of the weighted estimate
///
///   int (s^6 phi^6 |y|^2 + s^4 phi^4 |grad y|^2 + s^2 phi^2 |grad grad y|^2
///        + s phi |grad Lap y|^2 + (s phi)^{-1} (|dt y|^2 + |Hess y|^2)) e^{2 s alpha}
///     <= C ( int |P y|^2 e^{2 s alpha} + ||y||^2_{L^2(omega x window)} )
///
/// and of the time-shift and collapse arguments built on it. All weighted
/// sums are accumulated in log space.

#include <vector>

#include "carlab/field.hpp"
#include "carlab/operators.hpp"
#include "carlab/weights.hpp"

namespace carlab {

/// Returns log(sum_i exp(v_i)) without overflow; -inf for an empty or all -inf input.
double log_sum_exp(const std::vector<double>& v);

/// log(exp(a) + exp(b)).
double log_add(double a, double b);

struct CarlemanSides {
  double lhs = 0.0;
  double rhs_pde = 0.0;
  double rhs_obs = 0.0;
  /// Natural logs of the weighted sums (-inf for exact zeros).
  double log_lhs = 0.0;
  double log_rhs_pde = 0.0;

  /// log(lhs / (rhs_pde + rhs_obs)); NaN when both sides vanish.
  double log_ratio() const;
  double ratio() const;
};

/// Pointwise ingredients of the estimate on the levels [m0, m1], independent of s.
struct CarlemanIntegrands {
  int m0 = 0;
  int m1 = 0;
  Vec space_weights;
  Vec pde_space_weights;
  Vec time_weights;
  /// Rows are nodes, columns are levels m0..m1.
  Eigen::MatrixXd y2, grad2, hess2, grad_lap2, low2, Py2;
  double obs = 0.0;
};

/// Margin counts excluded cells at each end of the window (at least 1: the
/// endpoint levels where h is infinite).
CarlemanIntegrands carleman_integrands(const Grid& grid, const SpaceTimeField& y,
                                       const CoefficientSet& coeffs, const WeightParams& params,
                                       const Mask& omega, int margin = 1);

CarlemanSides carleman_sides(const CarlemanIntegrands& in, const Grid& grid,
                             const WeightParams& params);

/// y must hold every level of the grid and satisfy y = Lap y = 0 on the boundary.
CarlemanSides carleman_sides(const Grid& grid, const SpaceTimeField& y, const CoefficientSet& coeffs,
                             const WeightParams& params, const Mask& omega, int margin = 1);

struct RatioSweep {
  std::vector<double> s_values;
  /// C_emp per suite member (rows) and s (columns); NaN where both sides vanish.
  Eigen::MatrixXd ratios;
  std::vector<double> max_per_s;
  /// First index i with max_{j >= i} C(s_j) <= growth_tol * C(s_i); -1 if none.
  int knee = -1;
  double s0 = 0.0;
  int points_above_knee = 0;
  double max_beyond_knee = 0.0;
  double growth_tol = 1.2;

  bool bounded(int min_points = 5) const {
    return knee >= 0 && points_above_knee >= min_points;
  }
};

RatioSweep ratio_sweep(const Grid& grid, const std::vector<SpaceTimeField>& suite,
                       const CoefficientSet& coeffs, const WeightParams& params, const Mask& omega,
                       const std::vector<double>& s_values, int margin = 1, double growth_tol = 1.2);

/// Geometric sequence lo, lo*q, ... up to hi (inclusive within rounding).
std::vector<double> geometric_range(double lo, double hi, double factor);

/// Fields with y = Lap y = 0 on the boundary: separable sine series with
/// smooth random time profiles and decaying modal solutions. Deterministic in seed.
std::vector<SpaceTimeField> carleman_suite(const Grid& grid, int members, unsigned long long seed);

/// Same structure with spatial profiles sin^6 bumps supported in `support`,
/// so the fields vanish identically outside it (e.g. on omega).
std::vector<SpaceTimeField> carleman_suite_supported(const Grid& grid, const Box& support,
                                                     int members, unsigned long long seed);

/// The three integrals share the factor exp(-log_shift), the peak of e^{2 s alpha(., theta)}.
struct EnergyShift {
  double log_shift = 0.0;
  /// int |z(x, theta)|^2 e^{2 s alpha(x, theta)} dx
  double lhs_point = 0.0;
  /// int int (|z| |dt z| + s phi^2 |z|^2) e^{2 s alpha}
  double rhs_int = 0.0;
  /// int_{theta - t1}^{theta} int (2 z dt z + 2 s (dt alpha) |z|^2) e^{2 s alpha}
  double ftc_integral = 0.0;
  double identity_rel_error = 0.0;
  double ratio() const { return lhs_point / rhs_int; }
};

/// z over all grid levels; params carry t0 = theta and tau = t1, and theta
/// must be a grid level.
EnergyShift check_energy_shift(const Grid& grid, const SpaceTimeField& z, const WeightParams& params);

struct CollapseRow {
  double s = 0.0;
  double integral = 0.0;
};

struct CollapseTable {
  double C0 = 0.0;
  double window = 0.0;
  std::vector<CollapseRow> rows;
  bool strictly_decreasing = false;
  double last_over_first = 0.0;
};

/// I(s) = int_{theta - t1}^{theta + t1} exp(-C0 s (h(t) - h(theta))) dt with
/// C0 = 2 (exp(2 lambda max d) - exp(lambda max d)).
CollapseTable check_lebesgue_collapse(const WeightParams& params, const std::vector<double>& s_values);

/// The same integral for an explicit C0 and half-width t1.
double collapse_integral(double C0, double t1, double s);

}  // namespace carlab
