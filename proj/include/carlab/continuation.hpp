#pragma once

/// \file continuation.hpp
/// \brief Lateral Cauchy problem: recover u with dt u + Lap^2 u + sum p d^beta u = 0
///        on Omega0 x (eps, T - eps) from d_nu^j u on Gamma x (0, T), j = 0..3.
///
/// Discrete Cauchy data are the values on the four node layers next to Gamma;
/// the traces g_j are the coefficients of the cubic through them, so traces
/// and layers determine each other exactly.

#include <array>
#include <optional>
#include <vector>

#include "carlab/field.hpp"
#include "carlab/geometry.hpp"
#include "carlab/operators.hpp"
#include "carlab/weights.hpp"

namespace carlab {

/// Gamma nodes on the physical grid ordered along the face (corners excluded in 2D).
std::vector<int> gamma_nodes(const Grid& grid, const Face& gamma);

/// The node `layer` steps inward from Gamma node k.
int layer_node(const Grid& grid, const Face& gamma, int k, int layer);

struct CauchyTrace {
  Face gamma;
  std::vector<int> nodes;
  /// g[j]: rows are Gamma nodes, columns are time levels 0..Nt.
  std::array<Eigen::MatrixXd, 4> g;

  /// Traces of u from its four inward layers.
  static CauchyTrace from_field(const Grid& grid, const Face& gamma, const SpaceTimeField& u);

  /// Values on layer j (0..3) reproduced from the traces.
  Eigen::MatrixXd layer(const Grid& grid, int j) const;

  /// D = sum_j ||g_j||_surrogate + ||g_0||_{H^1(0,T; L^2(Gamma))}.
  double data_size(const Grid& grid) const;

  CauchyTrace operator-(const CauchyTrace& other) const;
};

/// i.i.d. Gaussian perturbation of every g_j, scaled so that the perturbation
/// alone has data size target_D. Deterministic in seed.
CauchyTrace add_trace_noise(const CauchyTrace& trace, const Grid& grid, double target_D,
                            unsigned long long seed);

/// u_tilde = sum_j g_j(x_Gamma, t) (-r)^j / j! * cutoff(r) with r the inward
/// distance to Gamma. The cut-off is 1 for r <= 3.5 h and 0 for r >= width.
SpaceTimeField extend_cauchy(const CauchyTrace& trace, const Grid& grid, double width);

/// Largest |g_j| of v over Gamma and all levels.
double max_trace(const Grid& grid, const Face& gamma, const SpaceTimeField& v);

/// Zero extension of v (physical grid) to the padded grid. Throws reporting the
/// largest trace when it exceeds tol.
SpaceTimeField zero_extend(const SpaceTimeField& v, const Grid& grid, const ExtendedDomain& ext,
                           double tol);

/// Everything the reconstruction needs that does not depend on the data.
struct ContinuationProblem {
  Grid grid;
  CoefficientSet coeffs;
  Face gamma;
  ExtendedDomain ext;
  /// Omega0 on the physical grid.
  Mask omega0;
  DistanceFunction d;
  LambdaSelection lambda;
  double epsilon = 0.0;
  double tau = 0.0;
};

/// Pads across Gamma, builds d on the padded box (maximum in the pad's control
/// region, placed to lift d on Omega0) and selects lambda. tau <= 0 means eps / 2.
/// Throws when eps <= tau.
ContinuationProblem make_continuation_problem(const Grid& grid, const CoefficientSet& coeffs,
                                              const Face& gamma, double pad, const Box& omega0,
                                              double epsilon, double tau,
                                              const LambdaSweepOptions& sweep = {});

/// Minimises sum_rows q |P v - F|^2 + reg ||v||^2_{L^2} with row weights
/// q = quadrature * dt * exp(2 s (alpha - alpha_ref)), alpha_ref the largest alpha
/// among the window's rows, so that every weight is at most the plain quadrature.
struct QrOptions {
  double s = 5e-3;
  double reg = 1e4;
  /// Support width of the Cauchy extension's cut-off (inward distance).
  double extension_width = 0.25;
};

struct QrWindow {
  double t0 = 0.0;
  int m_first = 0;  ///< first unknown level (window start)
  int m_last = 0;
  int q_first = 0;  ///< levels assigned to this window in the assembled field
  int q_last = 0;
  double weighted_residual = 0.0;
  SpaceTimeField u;  ///< reconstruction on [m_first, m_last], physical grid
};

struct QrResult {
  /// u_rec on the physical grid; levels [m_lo, m_hi] cover [eps, T - eps].
  SpaceTimeField u;
  int m_lo = 0;
  int m_hi = 0;
  std::vector<QrWindow> windows;
};

/// t0 covering of (eps, T - eps) by quarter windows (t0 - tau/4, t0 + tau/4).
std::vector<double> window_centres(double T, double epsilon, double tau);

/// Carleman-weighted quasi-reversibility on each window, assembled over the covering.
QrResult qr_continue(const ContinuationProblem& prob, const CauchyTrace& trace, const QrOptions& opts);

/// Single window centred at t0; every level of the window is reported.
QrWindow qr_window(const ContinuationProblem& prob, const CauchyTrace& trace, double t0,
                   const QrOptions& opts);

struct CoveringCheck {
  /// Largest L^2(Omega0 x overlap) difference between consecutive windows.
  double disagreement = 0.0;
  /// Largest single-window error against the truth on the same overlaps.
  double single_error = 0.0;
  int overlaps = 0;
  /// Every overlap satisfies disagreement <= 2 * single-window error.
  bool consistent = false;
};

/// Compares consecutive windows on the overlap of their central halves.
CoveringCheck covering_check(const ContinuationProblem& prob, const QrResult& res,
                             const SpaceTimeField& u_true);

/// J(w) = sum_{|beta| <= 2} |d^beta w| + |grad Lap w| + |Lap^2 w| + |dt w|;
/// returns ||J(w)||_{L^2(region x (t_m0, t_m1))}.
double j_norm(const Grid& grid, const SpaceTimeField& w, const Mask& region, int m0, int m1);

/// ||w||_{L^2(region x (t_m0, t_m1))}.
double spacetime_l2(const Grid& grid, const SpaceTimeField& w, const Mask& region, int m0, int m1);

struct StabilityBudget {
  double M = 0.0;
  double delta0 = 0.0;
  double C_balance = 0.0;
  double kappa = 0.0;
};

/// kappa = delta0 / (C + delta0).
StabilityBudget make_budget(double M, double delta0, double C_balance);

struct Balance {
  double s_star = 0.0;
  /// M <= D: the bound is linear in D and no balancing is needed.
  bool case2 = false;
};

/// s_star = 2 / (c + delta0) log(M / D). Throws when D <= 0.
Balance balance_s(double D, double M, double c, double delta0);

/// ||J(u_rec - u)||^2 on Omega0 x (t0 - tau/4, t0 + tau/4) for every noise
/// level (rows) and s (columns), from single windows centred at t0 = T/2.
struct TwoTermSweep {
  double t0 = 0.0;
  double M = 0.0;
  double delta0 = 0.0;
  std::vector<double> levels;
  std::vector<double> D;
  std::vector<double> s_values;
  Eigen::MatrixXd measured;
};

/// reg_rule as in noise_sweep. One seed per level.
TwoTermSweep two_term_sweep(const ContinuationProblem& prob, const SpaceTimeField& u_true,
                            const std::vector<double>& levels, const std::vector<double>& s_values,
                            unsigned long long seed, const QrOptions& opts, bool reg_rule = true);

struct TwoTermRow {
  double D = 0.0;
  double s_star = 0.0;
  double s_knee = 0.0;  ///< argmin over s of the fitted bound
  bool case2 = false;
};

struct TwoTermTable {
  double M = 0.0;
  double delta0 = 0.0;
  /// Prefactor: the smallest C0 >= 1 with measured <= C0 (D^2 + M^2) at s = 0.
  double C0 = 1.0;
  /// Smallest c with measured <= C0 (e^{cs} D^2 + e^{-s delta0} M^2) on every
  /// cell, floored at a small positive value.
  double c_fit = 0.0;
  bool holds = false;
  std::vector<TwoTermRow> rows;
  /// max over Case-1 rows of max(s_star / s_knee, s_knee / s_star).
  double worst_knee_ratio = 0.0;
};

/// measured: rows follow D, columns follow s_values.
TwoTermTable two_term_bound_check(const std::vector<double>& D, const Eigen::MatrixXd& measured,
                                  double M, double delta0, const std::vector<double>& s_values);

struct HolderFit {
  double kappa_hat = 0.0;
  double C_hat = 0.0;
  double r2 = 0.0;
  double decades = 0.0;
};

/// Least squares of log err against log D. Needs at least 5 levels over 3 decades.
HolderFit holder_fit(const std::vector<double>& D, const std::vector<double>& err);

struct NoiseSweepRow {
  double level = 0.0;  ///< target D relative to the clean data size
  double D = 0.0;
  double error = 0.0;  ///< median over seeds of ||u_rec - u||_{L^2(Omega0 x (eps, T-eps))}
  double j_error = 0.0;  ///< median of ||J(u_rec - u)||^2
  std::vector<double> per_seed;
};

struct NoiseSweep {
  double M = 0.0;
  double D_clean = 0.0;
  double u_norm = 0.0;
  std::vector<NoiseSweepRow> rows;
  bool monotone = false;
};

/// Reconstructs from noisy traces of u_true at each level and seed. With
/// reg_rule, the relative regularisation is reg * (D / D_clean).
NoiseSweep noise_sweep(const ContinuationProblem& prob, const SpaceTimeField& u_true,
                       const std::vector<double>& levels, int seeds, unsigned long long seed,
                       const QrOptions& opts, bool reg_rule = true);

}  // namespace carlab
