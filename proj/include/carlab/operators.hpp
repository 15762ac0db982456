#pragma once

/// \file operators.hpp
/// \brief Finite-difference derivatives, the Navier biharmonic, the operator
///        P = d/dt + Laplacian^2 + lower order terms, and discrete Sobolev norms.
///
/// All stencils are second-order accurate. Interior nodes use centred
/// stencils; nodes too close to the boundary use one-sided stencils with
/// order + 2 points.

#include <Eigen/SparseCore>
#include <span>
#include <utility>
#include <vector>

#include "carlab/field.hpp"
#include "carlab/geometry.hpp"

namespace carlab {

using SpMat = Eigen::SparseMatrix<double>;

struct MultiIndex {
  std::array<int, kMaxDim> order{0, 0};

  int total() const { return order[0] + order[1]; }
  bool operator==(const MultiIndex&) const = default;
};

/// All multi-indices of total order <= max_order, ordered by total order.
std::vector<MultiIndex> multi_indices_up_to(int dim, int max_order);

/// Finite-difference weights for the derivative of order m at 0 given the
/// stencil offsets (Fornberg's recursion).
std::vector<double> fd_weights(int m, std::span<const double> offsets);

SpMat derivative_matrix_1d(int n, double h, int order);

/// Matrix of the mixed derivative; supports per-axis orders up to 4.
SpMat derivative_matrix(const Grid& grid, const MultiIndex& beta);

/// Apply the derivative of multi-index beta, |beta| <= 3.
Vec apply_derivative(const Grid& grid, const Vec& field, const MultiIndex& beta);

/// Five-point (three-point in 1D) Laplacian on interior nodes; boundary rows
/// are zero, which is the Navier condition Laplacian(y) = 0 on the boundary.
SpMat dirichlet_laplacian(const Grid& grid);

/// Laplacian^2 as the Dirichlet Laplacian applied twice (odd reflection).
SpMat biharmonic_navier_matrix(const Grid& grid);

/// Rejects fields with a nonzero boundary trace.
Vec apply_biharmonic_navier(const Grid& grid, const Vec& field);

/// Lower-order coefficients p_beta, |beta| <= 2, with uniform bound M0.
class CoefficientSet {
public:
  CoefficientSet() = default;
  CoefficientSet(const Grid& grid, std::vector<std::pair<MultiIndex, Vec>> terms, double M0);

  /// Constant coefficients; M0 defaults to the largest magnitude.
  static CoefficientSet constant(const Grid& grid,
                                 const std::vector<std::pair<MultiIndex, double>>& terms,
                                 double M0 = -1.0);

  const std::vector<std::pair<MultiIndex, Vec>>& terms() const { return terms_; }
  double bound() const { return M0_; }
  bool empty() const { return terms_.empty(); }

  /// Same coefficients on a grid sharing the node layout (e.g. a time-rescaled grid).
  CoefficientSet scaled(double factor) const;

private:
  std::vector<std::pair<MultiIndex, Vec>> terms_;
  double M0_ = 0.0;
};

/// Sum_beta diag(p_beta) D_beta restricted to interior rows.
SpMat lower_order_matrix(const Grid& grid, const CoefficientSet& coeffs);

/// Spatial part of P: Laplacian^2 + lower order terms, zero boundary rows.
SpMat spatial_operator(const Grid& grid, const CoefficientSet& coeffs);

/// dt_y + Laplacian^2 y + sum p_beta d^beta y, nodewise.
Vec apply_P(const Grid& grid, const Vec& y, const Vec& dt_y, const CoefficientSet& coeffs);

/// Trapezoidal weights restricted to a mask: along each axis a node gets
/// h/2 for each neighbour that is also in the mask.
Vec quadrature_weights(const Grid& grid, const Mask& region);

/// Trapezoidal weights over time levels [m0, m1].
Vec time_weights(double dt, int m0, int m1);

/// Discrete H^k(region) norm, 0 <= k <= 4.
double sobolev_norm(const Grid& grid, const Vec& field, int k, const Mask& region);

/// L^2(t_m0, t_m1; H^k(region)).
double l2_time_sobolev_norm(const Grid& grid, const SpaceTimeField& f, int k, const Mask& region,
                            int m0, int m1);

/// H^1(t_m0, t_m1; L^2(region)) with difference quotients in time.
double h1_time_l2_norm(const Grid& grid, const SpaceTimeField& f, const Mask& region, int m0,
                       int m1);

/// Surrogate of ||g||_{L^2(0,T; H^{7/2-j}(Gamma))}: integer order ceil(7/2-j)
/// tangential norm along Gamma. In 1D Gamma is a point and this is the
/// L^2(0,T) norm of the point values.
/// values: one row per Gamma node (ordered along the face), one column per level.
double trace_norm_surrogate(const Grid& grid, const Face& gamma, const Eigen::MatrixXd& values,
                            int j);

/// H^1(0,T; L^2(Gamma)) of a trace (mu = 0 surrogate of H^1(0,T;H^mu(Gamma))).
double trace_h1_time_norm(const Grid& grid, const Face& gamma, const Eigen::MatrixXd& values);

}  // namespace carlab
