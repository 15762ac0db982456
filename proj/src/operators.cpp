#include "carlab/operators.hpp"

#include <algorithm>
#include <cmath>

namespace carlab {

namespace {

using Triplet = Eigen::Triplet<double>;

int stencil_half_width(int order) { return (order + 1) / 2; }

SpMat kron(const SpMat& outer, const SpMat& inner) {
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(outer.nonZeros() * inner.nonZeros()));
  const auto ni = inner.rows();
  for (int ko = 0; ko < outer.outerSize(); ++ko) {
    for (SpMat::InnerIterator a(outer, ko); a; ++a) {
      for (int ki = 0; ki < inner.outerSize(); ++ki) {
        for (SpMat::InnerIterator b(inner, ki); b; ++b) {
          t.emplace_back(static_cast<int>(a.row() * ni + b.row()),
                         static_cast<int>(a.col() * ni + b.col()), a.value() * b.value());
        }
      }
    }
  }
  SpMat out(outer.rows() * ni, outer.cols() * ni);
  out.setFromTriplets(t.begin(), t.end());
  return out;
}

SpMat identity(int n) {
  SpMat I(n, n);
  I.setIdentity();
  return I;
}

SpMat interior_projector(const Grid& grid) {
  std::vector<Triplet> t;
  for (int k = 0; k < grid.size(); ++k) {
    if (!grid.on_boundary(k)) t.emplace_back(k, k, 1.0);
  }
  SpMat P(grid.size(), grid.size());
  P.setFromTriplets(t.begin(), t.end());
  return P;
}

Vec axis_trapezoid(int n, double h) {
  Vec w = Vec::Constant(n, h);
  w(0) = w(n - 1) = 0.5 * h;
  return w;
}

}  // namespace

std::vector<MultiIndex> multi_indices_up_to(int dim, int max_order) {
  std::vector<MultiIndex> out;
  for (int total = 0; total <= max_order; ++total) {
    if (dim == 1) {
      out.push_back(MultiIndex{{total, 0}});
    } else {
      for (int b0 = total; b0 >= 0; --b0) out.push_back(MultiIndex{{b0, total - b0}});
    }
  }
  return out;
}

std::vector<double> fd_weights(int m, std::span<const double> offsets) {
  const int n = static_cast<int>(offsets.size());
  if (n <= m) throw Error("stencil too small for derivative order");
  std::vector<std::vector<double>> c(n, std::vector<double>(m + 1, 0.0));
  double c1 = 1.0;
  double c4 = offsets[0];
  c[0][0] = 1.0;
  for (int i = 1; i < n; ++i) {
    const int mn = std::min(i, m);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = offsets[i];
    for (int j = 0; j < i; ++j) {
      const double c3 = offsets[i] - offsets[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k) {
          c[i][k] = c1 * (k * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
        }
        c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
      }
      for (int k = mn; k >= 1; --k) c[j][k] = (c4 * c[j][k] - k * c[j][k - 1]) / c3;
      c[j][0] = c4 * c[j][0] / c3;
    }
    c1 = c2;
  }
  std::vector<double> w(n);
  for (int i = 0; i < n; ++i) w[i] = c[i][m];
  return w;
}

SpMat derivative_matrix_1d(int n, double h, int order) {
  if (order == 0) return identity(n);
  if (order < 0 || order > 4) throw Error("derivative order must be in [0, 4]");
  const int width = order + 2;
  if (n < width) throw Error("too few nodes for the derivative stencil");
  const int r = stencil_half_width(order);
  const double scale = std::pow(h, -order);
  std::vector<Triplet> t;
  std::vector<double> offs;
  for (int i = 0; i < n; ++i) {
    int start = 0;
    int len = 0;
    if (i - r >= 0 && i + r <= n - 1) {
      start = i - r;
      len = 2 * r + 1;
    } else {
      start = (i - r < 0) ? 0 : n - width;
      len = width;
    }
    offs.resize(len);
    for (int j = 0; j < len; ++j) offs[j] = static_cast<double>(start + j - i);
    const auto w = fd_weights(order, offs);
    for (int j = 0; j < len; ++j) {
      if (w[j] != 0.0) t.emplace_back(i, start + j, w[j] * scale);
    }
  }
  SpMat D(n, n);
  D.setFromTriplets(t.begin(), t.end());
  return D;
}

SpMat derivative_matrix(const Grid& grid, const MultiIndex& beta) {
  if (grid.dim() == 1) {
    if (beta.order[1] != 0) throw Error("multi-index has a second component on a 1D grid");
    return derivative_matrix_1d(grid.nodes(0), grid.spacing(0), beta.order[0]);
  }
  const SpMat Dx = derivative_matrix_1d(grid.nodes(0), grid.spacing(0), beta.order[0]);
  const SpMat Dy = derivative_matrix_1d(grid.nodes(1), grid.spacing(1), beta.order[1]);
  return kron(Dy, Dx);
}

Vec apply_derivative(const Grid& grid, const Vec& field, const MultiIndex& beta) {
  if (beta.total() > 3) throw Error("derivatives above order 3 are not supported");
  if (field.size() != grid.size()) throw Error("field does not match grid");
  return derivative_matrix(grid, beta) * field;
}

SpMat dirichlet_laplacian(const Grid& grid) {
  std::vector<Triplet> t;
  for (int k = 0; k < grid.size(); ++k) {
    if (grid.on_boundary(k)) continue;
    const auto ij = grid.multi_index(k);
    for (int a = 0; a < grid.dim(); ++a) {
      const double c = 1.0 / (grid.spacing(a) * grid.spacing(a));
      auto lo = ij;
      auto hi = ij;
      --lo[a];
      ++hi[a];
      t.emplace_back(k, grid.index(lo), c);
      t.emplace_back(k, grid.index(hi), c);
      t.emplace_back(k, k, -2.0 * c);
    }
  }
  SpMat L(grid.size(), grid.size());
  L.setFromTriplets(t.begin(), t.end());
  return L;
}

SpMat biharmonic_navier_matrix(const Grid& grid) {
  const SpMat L = dirichlet_laplacian(grid);
  return SpMat(L * L);
}

Vec apply_biharmonic_navier(const Grid& grid, const Vec& field) {
  if (field.size() != grid.size()) throw Error("field does not match grid");
  const double scale = std::max(1.0, field.cwiseAbs().maxCoeff());
  for (int k = 0; k < grid.size(); ++k) {
    if (grid.on_boundary(k) && std::abs(field(k)) > 1e-12 * scale) {
      throw Error("field has a nonzero boundary trace at node " + std::to_string(k));
    }
  }
  return biharmonic_navier_matrix(grid) * field;
}

CoefficientSet::CoefficientSet(const Grid& grid, std::vector<std::pair<MultiIndex, Vec>> terms,
                               double M0)
    : terms_(std::move(terms)), M0_(M0) {
  if (M0_ < 0.0) throw Error("coefficient bound M0 must be nonnegative");
  for (const auto& [beta, p] : terms_) {
    if (beta.total() > 2) throw Error("lower-order coefficients need |beta| <= 2");
    if (grid.dim() == 1 && beta.order[1] != 0) throw Error("2D multi-index on a 1D grid");
    if (p.size() != grid.size()) throw Error("coefficient field does not match grid");
    const double sup = p.cwiseAbs().maxCoeff();
    if (sup > M0_ * (1.0 + 1e-12)) {
      throw Error("coefficient exceeds the bound M0 (" + std::to_string(sup) + " > " +
                  std::to_string(M0_) + ")");
    }
  }
}

CoefficientSet CoefficientSet::constant(const Grid& grid,
                                        const std::vector<std::pair<MultiIndex, double>>& terms,
                                        double M0) {
  std::vector<std::pair<MultiIndex, Vec>> fields;
  double sup = 0.0;
  for (const auto& [beta, c] : terms) {
    fields.emplace_back(beta, Vec::Constant(grid.size(), c));
    sup = std::max(sup, std::abs(c));
  }
  return CoefficientSet(grid, std::move(fields), M0 < 0.0 ? sup : M0);
}

CoefficientSet CoefficientSet::scaled(double factor) const {
  CoefficientSet out = *this;
  for (auto& term : out.terms_) term.second *= factor;
  out.M0_ *= std::abs(factor);
  return out;
}

SpMat lower_order_matrix(const Grid& grid, const CoefficientSet& coeffs) {
  SpMat sum(grid.size(), grid.size());
  for (const auto& [beta, p] : coeffs.terms()) {
    Vec masked = p;
    for (int k = 0; k < grid.size(); ++k) {
      if (grid.on_boundary(k)) masked(k) = 0.0;
    }
    sum += masked.asDiagonal() * derivative_matrix(grid, beta);
  }
  return sum;
}

SpMat spatial_operator(const Grid& grid, const CoefficientSet& coeffs) {
  SpMat K = interior_projector(grid) * biharmonic_navier_matrix(grid);
  if (!coeffs.empty()) K += lower_order_matrix(grid, coeffs);
  K.makeCompressed();
  return K;
}

Vec apply_P(const Grid& grid, const Vec& y, const Vec& dt_y, const CoefficientSet& coeffs) {
  if (y.size() != grid.size() || dt_y.size() != grid.size()) throw Error("grid mismatch in apply_P");
  Vec out = dt_y + biharmonic_navier_matrix(grid) * y;
  for (const auto& [beta, p] : coeffs.terms()) {
    out += p.cwiseProduct(derivative_matrix(grid, beta) * y);
  }
  return out;
}

Vec quadrature_weights(const Grid& grid, const Mask& region) {
  if (static_cast<int>(region.size()) != grid.size()) throw Error("mask does not match grid");
  Vec w = Vec::Zero(grid.size());
  for (int k = 0; k < grid.size(); ++k) {
    if (!region[k]) continue;
    const auto ij = grid.multi_index(k);
    double prod = 1.0;
    for (int a = 0; a < grid.dim(); ++a) {
      double f = 0.0;
      if (ij[a] > 0) {
        auto nb = ij;
        --nb[a];
        if (region[grid.index(nb)]) f += 0.5;
      }
      if (ij[a] < grid.nodes(a) - 1) {
        auto nb = ij;
        ++nb[a];
        if (region[grid.index(nb)]) f += 0.5;
      }
      prod *= f * grid.spacing(a);
    }
    w(k) = prod;
  }
  return w;
}

Vec time_weights(double dt, int m0, int m1) {
  if (m1 <= m0) throw Error("time window needs at least two levels");
  Vec w = Vec::Constant(m1 - m0 + 1, dt);
  w(0) = w(w.size() - 1) = 0.5 * dt;
  return w;
}

double sobolev_norm(const Grid& grid, const Vec& field, int k, const Mask& region) {
  if (k < 0 || k > 4) throw Error("Sobolev order must be in [0, 4]");
  if (field.size() != grid.size()) throw Error("field does not match grid");
  const Vec w = quadrature_weights(grid, region);
  double sum = 0.0;
  for (const auto& beta : multi_indices_up_to(grid.dim(), k)) {
    const Vec d = beta.total() == 0 ? field : Vec(derivative_matrix(grid, beta) * field);
    sum += w.dot(d.cwiseAbs2());
  }
  return std::sqrt(sum);
}

double l2_time_sobolev_norm(const Grid& grid, const SpaceTimeField& f, int k, const Mask& region,
                            int m0, int m1) {
  if (k < 0 || k > 4) throw Error("Sobolev order must be in [0, 4]");
  const Vec w = quadrature_weights(grid, region);
  const Vec wt = time_weights(grid.dt(), m0, m1);
  std::vector<SpMat> D;
  for (const auto& beta : multi_indices_up_to(grid.dim(), k)) D.push_back(derivative_matrix(grid, beta));
  double sum = 0.0;
  for (int m = m0; m <= m1; ++m) {
    const Vec y = f.level(m);
    double level = 0.0;
    for (const auto& Dm : D) level += w.dot((Dm * y).cwiseAbs2());
    sum += wt(m - m0) * level;
  }
  return std::sqrt(sum);
}

double h1_time_l2_norm(const Grid& grid, const SpaceTimeField& f, const Mask& region, int m0,
                       int m1) {
  const Vec w = quadrature_weights(grid, region);
  const Vec wt = time_weights(grid.dt(), m0, m1);
  const SpaceTimeField win = f.window(m0, m1);
  const SpaceTimeField dwin = win.time_derivative(grid.dt());
  double sum = 0.0;
  for (int m = m0; m <= m1; ++m) {
    sum += wt(m - m0) *
           (w.dot(win.level(m).cwiseAbs2()) + w.dot(dwin.level(m).cwiseAbs2()));
  }
  return std::sqrt(sum);
}

double trace_norm_surrogate(const Grid& grid, const Face& gamma, const Eigen::MatrixXd& values,
                            int j) {
  if (j < 0 || j > 3) throw Error("trace index j must be in {0,1,2,3}");
  const Vec wt = time_weights(grid.dt(), 0, static_cast<int>(values.cols()) - 1);
  if (grid.dim() == 1) {
    double sum = 0.0;
    for (int m = 0; m < values.cols(); ++m) sum += wt(m) * values(0, m) * values(0, m);
    return std::sqrt(sum);
  }
  const int order = 4 - j;  // ceil(7/2 - j)
  const int tangential = 1 - gamma.axis;
  const int n = static_cast<int>(values.rows());
  const double h = grid.spacing(tangential);
  const Vec wx = axis_trapezoid(n, h);
  std::vector<SpMat> D;
  for (int q = 0; q <= order; ++q) D.push_back(derivative_matrix_1d(n, h, q));
  double sum = 0.0;
  for (int m = 0; m < values.cols(); ++m) {
    const Vec g = values.col(m);
    double level = 0.0;
    for (const auto& Dq : D) level += wx.dot((Dq * g).cwiseAbs2());
    sum += wt(m) * level;
  }
  return std::sqrt(sum);
}

double trace_h1_time_norm(const Grid& grid, const Face& gamma, const Eigen::MatrixXd& values) {
  const int L = static_cast<int>(values.cols());
  SpaceTimeField f(static_cast<int>(values.rows()), L);
  f.values = values;
  const SpaceTimeField df = f.time_derivative(grid.dt());
  const Vec wt = time_weights(grid.dt(), 0, L - 1);
  Vec wx;
  if (grid.dim() == 1) {
    wx = Vec::Ones(1);
  } else {
    wx = axis_trapezoid(static_cast<int>(values.rows()), grid.spacing(1 - gamma.axis));
  }
  double sum = 0.0;
  for (int m = 0; m < L; ++m) {
    sum += wt(m) * (wx.dot(f.values.col(m).cwiseAbs2()) + wx.dot(df.values.col(m).cwiseAbs2()));
  }
  return std::sqrt(sum);
}

}  // namespace carlab
