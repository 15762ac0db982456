#pragma once

#include <Eigen/Core>

#include "carlab/geometry.hpp"

namespace carlab {

using Vec = Eigen::VectorXd;

/// Nodal values over a contiguous run of time levels. Column m holds global
/// time level first_level + m.
struct SpaceTimeField {
  Eigen::MatrixXd values;
  int first_level = 0;

  SpaceTimeField() = default;
  SpaceTimeField(int nodes, int levels, int first = 0)
      : values(Eigen::MatrixXd::Zero(nodes, levels)), first_level(first) {}

  int nodes() const { return static_cast<int>(values.rows()); }
  int levels() const { return static_cast<int>(values.cols()); }
  int last_level() const { return first_level + levels() - 1; }
  bool has_level(int m) const { return m >= first_level && m <= last_level(); }

  auto level(int m) { return values.col(m - first_level); }
  auto level(int m) const { return values.col(m - first_level); }

  /// Second-order time derivative (central inside, one-sided at the ends).
  SpaceTimeField time_derivative(double dt) const;

  /// Copy of the levels [m0, m1].
  SpaceTimeField window(int m0, int m1) const;
};

inline SpaceTimeField SpaceTimeField::time_derivative(double dt) const {
  const int L = levels();
  if (L < 3) throw Error("time derivative needs at least three levels");
  SpaceTimeField out(nodes(), L, first_level);
  for (int m = 1; m + 1 < L; ++m) {
    out.values.col(m) = (values.col(m + 1) - values.col(m - 1)) / (2.0 * dt);
  }
  out.values.col(0) = (-3.0 * values.col(0) + 4.0 * values.col(1) - values.col(2)) / (2.0 * dt);
  out.values.col(L - 1) =
      (3.0 * values.col(L - 1) - 4.0 * values.col(L - 2) + values.col(L - 3)) / (2.0 * dt);
  return out;
}

inline SpaceTimeField SpaceTimeField::window(int m0, int m1) const {
  if (!has_level(m0) || !has_level(m1) || m1 < m0) throw Error("time window out of range");
  SpaceTimeField out;
  out.values = values.middleCols(m0 - first_level, m1 - m0 + 1);
  out.first_level = m0;
  return out;
}

}  // namespace carlab
