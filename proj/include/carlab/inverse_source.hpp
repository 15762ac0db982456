#pragma once

/// \file inverse_source.hpp
/// \brief Recovering the spatial factor f in dt y + Lap^2 y + sum p d^beta y = R(x,t) f(x)
///        from y on omega x (theta - t1, theta + t1) and y(., theta).

#include <random>
#include <string>
#include <vector>

#include "carlab/field.hpp"
#include "carlab/forward.hpp"
#include "carlab/operators.hpp"

namespace carlab {

/// Observation window and the recorded data. omega_part holds every node of
/// levels [m0, m1] and is zero off omega.
struct ObservationData {
  Mask omega;
  double theta = 0.0;
  double t1 = 0.0;
  int m0 = 0;
  int m1 = 0;
  int m_theta = 0;
  double noise_level = 0.0;
  SpaceTimeField omega_part;
  Vec theta_part;

  void validate(const Grid& grid) const;
};

/// Window [m0, m1] and theta level; requires 0 < theta - t1 < theta + t1 < T.
ObservationData observation_layout(const Grid& grid, const Mask& omega, double theta, double t1);

/// Samples y into the layout. With noise_level > 0, adds i.i.d. Gaussian noise
/// rescaled so that its data norm is noise_level times that of the clean data.
ObservationData observe(const Grid& grid, const SpaceTimeField& y, const ObservationData& layout,
                        double noise_level = 0.0, unsigned long long seed = 0);

/// f = (z(theta) + Lap^2 a + sum p d^beta a) / R(theta) with a = y(theta) and z
/// the central difference of y at theta. Throws naming the nodes where
/// |R(x, theta)| < r0.
Vec direct_formula_reconstruct(const Grid& grid, const SpaceTimeField& y, const CoefficientSet& coeffs,
                               const SourceModel& source, double theta);

/// The linear map f -> (y on omega x window, y(theta)) with y(0) = 0, its
/// transpose, and the data inner product (H^1 in time on omega plus H^4 at theta).
class ObservationOperator {
public:
  ObservationOperator(const Grid& grid, const CoefficientSet& coeffs, const SpaceTimeField& R,
                      const ObservationData& layout);

  const Grid& grid() const { return solver_.grid(); }
  const ObservationData& layout() const { return layout_; }

  /// Data layout with blocks filled by A f.
  ObservationData apply(const Vec& f) const;
  /// Euclidean transpose: <A f, d> = f . transpose(d) with the plain dot product
  /// over the stored data entries.
  Vec transpose(const ObservationData& d) const;

  /// Data-norm Gram operator W applied to d (same layout).
  ObservationData gram(const ObservationData& d) const;
  double data_inner(const ObservationData& a, const ObservationData& b) const;
  double data_norm(const ObservationData& d) const;

  /// L^2(Omega) mass (quadrature weights), zero on boundary nodes.
  const Vec& mass() const { return mass_; }
  /// Adjoint in the weighted pair: <A f, g>_data = <f, adjoint(g)>_{L^2}.
  Vec adjoint(const ObservationData& g) const;

private:
  ForwardSolver solver_;
  SpaceTimeField R_;
  ObservationData layout_;
  Vec omega_weights_;
  Vec time_weights_;
  Vec h4_weights_;
  std::vector<SpMat> h4_derivs_;
  Vec mass_;
  Vec interior_;
};

double dot(const ObservationData& a, const ObservationData& b);

struct TikhonovOptions {
  double reg = 1e-8;
  double tol = 1e-10;
  int max_iter = 2000;
};

struct TikhonovResult {
  Vec f;
  int iterations = 0;
  double relative_residual = 0.0;
  std::vector<std::string> warnings;
};

/// Minimises ||A f - obs||^2_data + reg ||f||^2_{L^2} by conjugate gradients on
/// the normal equations (one forward and one transposed solve per iteration).
/// Throws if the iteration stagnates.
TikhonovResult tikhonov_reconstruct(const ObservationOperator& A, const ObservationData& obs,
                                    const TikhonovOptions& opts);

/// Random f = sum_{k <= cap} c_k prod sin(k pi x) with c_k ~ N(0,1)/k;
/// identical coefficients on every grid for a given seed and cap.
Vec random_fourier_source(const Grid& grid, int mode_cap, std::mt19937_64& rng);

struct LipschitzRow {
  int member = 0;
  double f_norm = 0.0;
  double data_norm = 0.0;
  double ratio = 0.0;
};

struct LipschitzTable {
  std::vector<LipschitzRow> rows;
  double max_ratio = 0.0;
  double median_ratio = 0.0;
  int skipped = 0;
};

/// rho = ||f||_{L^2} / (||y||_{H^1(window; L^2(omega))} + ||y(theta)||_{H^4}).
double lipschitz_ratio(const ObservationOperator& A, const Vec& f);

/// n_samples random draws (mode cap min(mode_cap, nodes/4)); zero draws are skipped.
LipschitzTable lipschitz_ensemble(int n_samples, const ObservationOperator& A, int mode_cap,
                                  unsigned long long seed);

}  // namespace carlab
