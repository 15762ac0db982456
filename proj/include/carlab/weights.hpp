#pragma once

/// \file weights.hpp
/// \brief Carleman weights built from an explicit bump d(x):
///
///   h(t)     = ((t - (t0 - tau)) (t0 + tau - t))^{-1/2}
///   alpha    = h(t) (exp(lambda d(x)) - exp(2 lambda max d))
///   phi      = h(t) exp(lambda d(x))
///
/// plus the level thresholds delta_1, delta(N) and the cut-off chi that
/// ramps in the scalar alpha between delta(N_lo) and delta(N_mid).

#include <array>
#include <cmath>
#include <optional>
#include <vector>

#include "carlab/field.hpp"
#include "carlab/geometry.hpp"

namespace carlab {

/// Explicit weight function d on the working box: a product over axes of
/// (x - a)(b - x) exp(kappa (x - c)), normalised to max d = 1, with its only
/// critical point at the placement c inside omega.
struct DistanceFunction {
  Vec d;
  std::vector<double> placement;
  std::vector<double> kappa;
  double d_max = 0.0;
  double d_min = 0.0;
  double norm = 1.0;

  /// Analytic gradient of d at a node.
  std::array<double, kMaxDim> gradient(const Grid& grid, int k) const;
};

struct DistanceOptions {
  /// Force the maximum to sit here instead of searching omega.
  std::optional<std::vector<double>> placement;
  /// Gradient magnitudes below this (relative to max d / diameter) count as zero.
  double gradient_tol = 1e-8;
};

/// Builds d on the working grid. The bump maximum is placed at the omega node
/// that maximises min d over closure(omega0) (or at the omega node nearest
/// the centre of omega when there is no omega0). Throws if |grad d| vanishes
/// at a node outside omega; corners of the box are exempt since d vanishes
/// on both faces there.
DistanceFunction build_distance_fn(const Grid& grid, const SubdomainMasks& masks,
                                   const DistanceOptions& opts = {});

/// min of d over closure(omega0), normalised by max d.
double omega0_floor(const Grid& grid, const SubdomainMasks& masks, const DistanceFunction& d);

class WeightParams {
public:
  WeightParams(const Grid& grid, const DistanceFunction& d, double lambda, double s, double t0,
               double tau);

  double lambda() const { return lambda_; }
  double s() const { return s_; }
  double t0() const { return t0_; }
  double tau() const { return tau_; }
  const Vec& d() const { return d_; }
  double d_max() const { return d_max_; }
  double d_min() const { return d_min_; }
  /// exp(2 lambda max d)
  double big_e() const { return big_e_; }

  WeightParams with_s(double s) const;
  WeightParams with_lambda(double lambda) const;
  WeightParams with_t0(double t0) const;

  /// True when t lies strictly inside (t0 - tau, t0 + tau).
  bool inside(double t) const;
  double h(double t) const;
  double dh(double t) const;
  double alpha(int k, double t) const;
  double phi(int k, double t) const;
  double log_phi(int k, double t) const { return std::log(h(t)) + lambda_ * d_(k); }
  double dt_alpha(int k, double t) const;

  /// Global time levels strictly inside the window, skipping `margin - 1`
  /// further levels at each end.
  std::pair<int, int> interior_levels(const Grid& grid, int margin = 1) const;

private:
  Vec d_;
  double d_max_ = 0.0;
  double d_min_ = 0.0;
  double lambda_ = 0.0;
  double s_ = 0.0;
  double t0_ = 0.0;
  double tau_ = 0.0;
  double big_e_ = 0.0;
  double T_ = 0.0;
};

struct WeightSample {
  double alpha = 0.0;
  double phi = 0.0;
  double h = 0.0;
};

/// Weights at node k and time t; t must lie strictly inside the window.
WeightSample eval_weights(const WeightParams& params, int k, double t);

/// The weight used with an extra exp(2 lambda max d) factor:
/// alpha_tilde = exp(2 lambda max d) alpha.
double alpha_tilde(const WeightParams& params, int k, double t);

struct LevelThresholds {
  double delta1 = 0.0;
  std::array<int, 3> N{2, 3, 4};
  std::array<double, 3> deltaN{};
  double delta0 = 0.0;
  double delta_floor = 0.0;
  double lambda = 0.0;
  double tau = 0.0;

  bool ordered() const {
    return delta1 < deltaN[0] && deltaN[0] < deltaN[1] && deltaN[1] < deltaN[2];
  }
};

/// delta(N) for a single N.
double delta_of_N(double lambda, double d_max, double delta_floor, double tau, int N);

LevelThresholds compute_thresholds(double lambda, double d_max, double delta_floor, double tau,
                                   std::array<int, 3> N = {2, 3, 4});

/// Thresholds for the given weights and masks (delta_floor from omega0).
LevelThresholds compute_thresholds(const WeightParams& params, const Grid& grid,
                                   const SubdomainMasks& masks, const DistanceFunction& d,
                                   std::array<int, 3> N = {2, 3, 4});

struct LambdaSweepOptions {
  double lambda_min = 1.0;
  double lambda_cap = 64.0;
  /// Ceiling on max |d_t alpha| / phi^2 over the grid.
  double dt_alpha_ceiling = 1e12;
  std::array<int, 3> N{2, 3, 4};
};

struct LambdaSelection {
  double lambda = 0.0;
  LevelThresholds thresholds;
  double dt_alpha_constant = 0.0;
  std::vector<double> tried;
};

/// Smallest lambda in {lambda_min * 2^k <= lambda_cap} with ordered thresholds
/// and the d_t alpha constant below the ceiling. Throws with the per-lambda
/// diagnostics if none qualifies.
LambdaSelection select_lambda(const Grid& grid, const SubdomainMasks& masks,
                              const DistanceFunction& d, double t0, double tau,
                              const LambdaSweepOptions& opts);

/// C^4 ramp on [0,1]: 0 at 0, 1 at 1, S(1-x) = 1 - S(x).
double smooth_ramp(double x);
/// k-th derivative of the ramp, 0 <= k <= 4.
double smooth_ramp_derivative(double x, int k);

/// chi as a function of alpha: 0 for alpha <= lo, 1 for alpha >= hi.
struct Cutoff {
  double lo = 0.0;
  double hi = 0.0;

  double value(double alpha) const;
  /// d^k chi / d alpha^k
  double derivative(double alpha, int k) const;
};

Cutoff make_cutoff(const LevelThresholds& th);

/// chi on the levels of the window [t0 - tau, t0 + tau]; endpoint levels
/// (alpha = -inf) get chi = 0.
SpaceTimeField build_cutoff(const WeightParams& params, const LevelThresholds& th,
                            const Grid& grid);

struct WeightBoundsReport {
  std::vector<double> s_values;
  /// max over the grid of s^7 phi^7 exp(2 s alpha), per s
  std::vector<double> max_s7phi7;
  /// max over the grid of |d_t alpha| / phi^2
  double dt_alpha_constant = 0.0;
  /// the same ratio at t = t0 (exactly zero on a symmetric window)
  double dt_alpha_at_midpoint = 0.0;
  bool midpoint_on_grid = false;
};

WeightBoundsReport check_weight_bounds(const WeightParams& params, const Grid& grid,
                                       const std::vector<double>& s_values);

}  // namespace carlab
