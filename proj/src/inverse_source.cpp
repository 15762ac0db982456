#include "carlab/inverse_source.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

namespace carlab {

namespace {

/// L x L matrix of SpaceTimeField::time_derivative acting on level columns.
Eigen::MatrixXd time_difference_matrix(int L, double dt) {
  if (L < 3) throw Error("observation window needs at least three levels");
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(L, L);
  for (int m = 1; m + 1 < L; ++m) {
    D(m, m + 1) = 0.5 / dt;
    D(m, m - 1) = -0.5 / dt;
  }
  D(0, 0) = -1.5 / dt;
  D(0, 1) = 2.0 / dt;
  D(0, 2) = -0.5 / dt;
  D(L - 1, L - 1) = 1.5 / dt;
  D(L - 1, L - 2) = -2.0 / dt;
  D(L - 1, L - 3) = 0.5 / dt;
  return D;
}

/// sqrt(||.||^2_{H^1(window; L^2(omega))} + ||.||^2_{H^4(Omega)}).
double data_norm_of(const Grid& grid, const SpaceTimeField& omega_part, const Vec& theta_part,
                    const ObservationData& layout) {
  const double a = h1_time_l2_norm(grid, omega_part, layout.omega, layout.m0, layout.m1);
  const double b = sobolev_norm(grid, theta_part, 4, Mask(grid.size(), 1));
  return std::sqrt(a * a + b * b);
}

}  // namespace

void ObservationData::validate(const Grid& grid) const {
  if (!(theta - t1 > 0.0) || !(theta + t1 < grid.T()) || !(t1 > 0.0)) {
    throw Error("observation window must satisfy 0 < theta - t1 < theta + t1 < T");
  }
  if (static_cast<int>(omega.size()) != grid.size() || count(omega) == 0) {
    throw Error("omega mask does not match the grid or is empty");
  }
  if (!(noise_level >= 0.0)) throw Error("noise level must be nonnegative");
  if (omega_part.nodes() != grid.size() || omega_part.first_level != m0 ||
      omega_part.last_level() != m1) {
    throw Error("omega data does not cover the observation window");
  }
  if (theta_part.size() != grid.size()) throw Error("theta data does not match the grid");
  for (int k = 0; k < grid.size(); ++k) {
    if (!omega[k] && omega_part.values.row(k).cwiseAbs().maxCoeff() != 0.0) {
      throw Error("omega data is nonzero at node " + std::to_string(k) + " outside omega");
    }
  }
}

ObservationData observation_layout(const Grid& grid, const Mask& omega, double theta, double t1) {
  ObservationData d;
  d.omega = omega;
  d.theta = theta;
  d.t1 = t1;
  if (!(theta - t1 > 0.0) || !(theta + t1 < grid.T()) || !(t1 > 0.0)) {
    throw Error("observation window must satisfy 0 < theta - t1 < theta + t1 < T");
  }
  const double dt = grid.dt();
  d.m_theta = nearest_level(grid, theta);
  if (std::abs(grid.time(d.m_theta) - theta) > 1e-9 * dt) {
    throw Error("theta must lie on a time level");
  }
  d.m0 = static_cast<int>(std::ceil((theta - t1) / dt - 1e-9));
  d.m1 = static_cast<int>(std::floor((theta + t1) / dt + 1e-9));
  if (d.m1 - d.m0 < 2) throw Error("observation window needs at least three time levels");
  d.omega_part = SpaceTimeField(grid.size(), d.m1 - d.m0 + 1, d.m0);
  d.theta_part = Vec::Zero(grid.size());
  d.validate(grid);
  return d;
}

ObservationData observe(const Grid& grid, const SpaceTimeField& y, const ObservationData& layout,
                        double noise_level, unsigned long long seed) {
  if (!y.has_level(layout.m0) || !y.has_level(layout.m1) || !y.has_level(layout.m_theta)) {
    throw Error("field does not cover the observation window");
  }
  if (!(noise_level >= 0.0)) throw Error("noise level must be nonnegative");
  ObservationData d = layout;
  d.noise_level = noise_level;
  for (int m = d.m0; m <= d.m1; ++m) {
    for (int k = 0; k < grid.size(); ++k) d.omega_part.level(m)(k) = layout.omega[k] ? y.level(m)(k) : 0.0;
  }
  d.theta_part = y.level(layout.m_theta);
  if (noise_level > 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n01;
    SpaceTimeField e_omega(grid.size(), d.omega_part.levels(), d.m0);
    Vec e_theta = Vec::Zero(grid.size());
    for (int m = d.m0; m <= d.m1; ++m) {
      for (int k = 0; k < grid.size(); ++k) {
        if (layout.omega[k]) e_omega.level(m)(k) = n01(rng);
      }
    }
    // the boundary condition is known exactly; noise only on interior nodes
    for (int k = 0; k < grid.size(); ++k) {
      if (!grid.on_boundary(k)) e_theta(k) = n01(rng);
    }
    const double clean = data_norm_of(grid, d.omega_part, d.theta_part, d);
    const double raw = data_norm_of(grid, e_omega, e_theta, d);
    const double scale = noise_level * clean / raw;
    d.omega_part.values += scale * e_omega.values;
    d.theta_part += scale * e_theta;
  }
  return d;
}

Vec direct_formula_reconstruct(const Grid& grid, const SpaceTimeField& y, const CoefficientSet& coeffs,
                               const SourceModel& source, double theta) {
  const int m = nearest_level(grid, theta);
  if (std::abs(grid.time(m) - theta) > 1e-9 * grid.dt()) throw Error("theta must lie on a time level");
  if (m < 1 || m >= grid.Nt()) throw Error("theta must be an interior time level");
  if (!y.has_level(m - 1) || !y.has_level(m + 1) || y.nodes() != grid.size()) {
    throw Error("field does not cover the levels around theta");
  }
  source.check_positivity(grid, m);
  const Vec a = y.level(m);
  const Vec z = (y.level(m + 1) - y.level(m - 1)) / (2.0 * grid.dt());
  const Vec Pa = spatial_operator(grid, coeffs) * a;
  Vec f(grid.size());
  for (int k = 0; k < grid.size(); ++k) {
    f(k) = grid.on_boundary(k) ? 0.0 : (z(k) + Pa(k)) / source.R.level(m)(k);
  }
  return f;
}

ObservationOperator::ObservationOperator(const Grid& grid, const CoefficientSet& coeffs,
                                         const SpaceTimeField& R, const ObservationData& layout)
    : solver_(grid, coeffs), R_(R), layout_(layout) {
  layout_.validate(grid);
  if (R.nodes() != grid.size() || R.first_level != 0 || R.last_level() != grid.Nt()) {
    throw Error("R must hold every time level of the grid");
  }
  layout_.omega_part.values.setZero();
  layout_.theta_part.setZero();
  layout_.noise_level = 0.0;
  omega_weights_ = quadrature_weights(grid, layout_.omega);
  time_weights_ = time_weights(grid.dt(), layout_.m0, layout_.m1);
  h4_weights_ = quadrature_weights(grid, Mask(grid.size(), 1));
  for (const auto& beta : multi_indices_up_to(grid.dim(), 4)) {
    if (beta.total() > 0) h4_derivs_.push_back(derivative_matrix(grid, beta));
  }
  mass_ = quadrature_weights(grid, grid.interior_mask());
  interior_.resize(grid.size());
  for (int k = 0; k < grid.size(); ++k) interior_(k) = grid.on_boundary(k) ? 0.0 : 1.0;
}

ObservationData ObservationOperator::apply(const Vec& f) const {
  const Grid& g = grid();
  if (f.size() != g.size()) throw Error("source does not match the grid");
  SpaceTimeField loads(g.size(), g.Nt() + 1);
  for (int m = 0; m <= g.Nt(); ++m) loads.level(m) = R_.level(m).cwiseProduct(f);
  const auto y = solver_.solve(Vec::Zero(g.size()), loads);
  ObservationData out = layout_;
  for (int m = out.m0; m <= out.m1; ++m) {
    for (int k = 0; k < g.size(); ++k) out.omega_part.level(m)(k) = out.omega[k] ? y.level(m)(k) : 0.0;
  }
  out.theta_part = y.level(out.m_theta);
  return out;
}

Vec ObservationOperator::transpose(const ObservationData& d) const {
  const Grid& g = grid();
  SpaceTimeField w(g.size(), g.Nt() + 1);
  for (int m = d.m0; m <= d.m1; ++m) {
    for (int k = 0; k < g.size(); ++k) w.level(m)(k) = d.omega[k] ? d.omega_part.level(m)(k) : 0.0;
  }
  w.level(d.m_theta) += d.theta_part;
  const auto p = solver_.solve_transpose(w);
  Vec out = Vec::Zero(g.size());
  for (int m = 1; m <= g.Nt(); ++m) out += g.dt() * R_.level(m).cwiseProduct(p.level(m));
  return out.cwiseProduct(interior_);
}

ObservationData ObservationOperator::gram(const ObservationData& d) const {
  const int L = d.omega_part.levels();
  const Eigen::MatrixXd Dt = time_difference_matrix(L, grid().dt());
  const Eigen::MatrixXd Tm = Eigen::MatrixXd(time_weights_.asDiagonal()) +
                             Dt.transpose() * time_weights_.asDiagonal() * Dt;
  ObservationData out = d;
  out.omega_part.values = omega_weights_.asDiagonal() * (d.omega_part.values * Tm);
  out.theta_part = h4_weights_.cwiseProduct(d.theta_part);
  for (const auto& D : h4_derivs_) {
    out.theta_part += D.transpose() * h4_weights_.cwiseProduct(D * d.theta_part);
  }
  return out;
}

double dot(const ObservationData& a, const ObservationData& b) {
  return a.omega_part.values.cwiseProduct(b.omega_part.values).sum() + a.theta_part.dot(b.theta_part);
}

double ObservationOperator::data_inner(const ObservationData& a, const ObservationData& b) const {
  return dot(a, gram(b));
}

double ObservationOperator::data_norm(const ObservationData& d) const {
  return data_norm_of(grid(), d.omega_part, d.theta_part, d);
}

Vec ObservationOperator::adjoint(const ObservationData& g) const {
  const Vec t = transpose(gram(g));
  Vec out = Vec::Zero(t.size());
  for (int k = 0; k < t.size(); ++k) {
    if (mass_(k) > 0.0) out(k) = t(k) / mass_(k);
  }
  return out;
}

TikhonovResult tikhonov_reconstruct(const ObservationOperator& A, const ObservationData& obs,
                                    const TikhonovOptions& opts) {
  if (!(opts.reg >= 0.0)) throw Error("regularisation weight must be nonnegative");
  obs.validate(A.grid());
  TikhonovResult res;
  if (opts.reg == 0.0 && obs.noise_level > 0.0) {
    res.warnings.push_back("reg = 0 with noisy data: the unregularised fit amplifies noise");
  }
  const Vec& M = A.mass();
  auto normal = [&](const Vec& f) -> Vec {
    return A.transpose(A.gram(A.apply(f))) + opts.reg * M.cwiseProduct(f);
  };
  const Vec b = A.transpose(A.gram(obs));
  const int n = static_cast<int>(b.size());
  res.f = Vec::Zero(n);
  const double bnorm = b.norm();
  if (bnorm == 0.0) return res;

  Vec r = b;
  Vec p = r;
  double rr = r.squaredNorm();
  double best = 1.0;
  int since_best = 0;
  for (int it = 1; it <= opts.max_iter; ++it) {
    const Vec Ap = normal(p);
    const double pAp = p.dot(Ap);
    if (!(pAp > 0.0)) throw Error("normal operator lost positivity after " + std::to_string(it) + " iterations");
    const double alpha = rr / pAp;
    res.f += alpha * p;
    r -= alpha * Ap;
    const double rr_new = r.squaredNorm();
    res.iterations = it;
    res.relative_residual = std::sqrt(rr_new) / bnorm;
    if (res.relative_residual <= opts.tol) return res;
    if (res.relative_residual < 0.999 * best) {
      best = res.relative_residual;
      since_best = 0;
    } else if (++since_best > 200) {
      break;
    }
    p = r + (rr_new / rr) * p;
    rr = rr_new;
  }
  std::ostringstream os;
  os << "conjugate gradients stagnated after " << res.iterations
     << " iterations (relative residual " << res.relative_residual << ", tol " << opts.tol << ")";
  throw Error(os.str());
}

Vec random_fourier_source(const Grid& grid, int mode_cap, std::mt19937_64& rng) {
  if (mode_cap < 1) throw Error("mode cap must be at least 1");
  std::normal_distribution<double> n01;
  const double pi = std::numbers::pi;
  Vec f = Vec::Zero(grid.size());
  // one coefficient per mode tuple, drawn in a grid-independent order
  if (grid.dim() == 1) {
    const double lo = grid.axis(0).coord(0), L = grid.axis(0).coord(grid.nodes(0) - 1) - lo;
    for (int k = 1; k <= mode_cap; ++k) {
      const double c = n01(rng) / k;
      for (int n = 0; n < grid.size(); ++n) f(n) += c * std::sin(k * pi * (grid.coord(n, 0) - lo) / L);
    }
  } else {
    const double lo0 = grid.axis(0).coord(0), L0 = grid.axis(0).coord(grid.nodes(0) - 1) - lo0;
    const double lo1 = grid.axis(1).coord(0), L1 = grid.axis(1).coord(grid.nodes(1) - 1) - lo1;
    for (int k = 1; k <= mode_cap; ++k) {
      for (int l = 1; l <= mode_cap; ++l) {
        const double c = n01(rng) / std::hypot(k, l);
        for (int n = 0; n < grid.size(); ++n) {
          f(n) += c * std::sin(k * pi * (grid.coord(n, 0) - lo0) / L0) *
                  std::sin(l * pi * (grid.coord(n, 1) - lo1) / L1);
        }
      }
    }
  }
  for (int n = 0; n < grid.size(); ++n) {
    if (grid.on_boundary(n)) f(n) = 0.0;
  }
  return f;
}

double lipschitz_ratio(const ObservationOperator& A, const Vec& f) {
  const Grid& g = A.grid();
  const double fn = sobolev_norm(g, f, 0, Mask(g.size(), 1));
  const auto d = A.apply(f);
  const double omega_norm = h1_time_l2_norm(g, d.omega_part, d.omega, d.m0, d.m1);
  const double theta_norm = sobolev_norm(g, d.theta_part, 4, Mask(g.size(), 1));
  const double den = omega_norm + theta_norm;
  if (fn == 0.0 && den == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return fn / den;
}

LipschitzTable lipschitz_ensemble(int n_samples, const ObservationOperator& A, int mode_cap,
                                  unsigned long long seed) {
  if (n_samples < 1) throw Error("ensemble needs at least one member");
  const Grid& g = A.grid();
  int cap = mode_cap;
  for (int a = 0; a < g.dim(); ++a) cap = std::min(cap, g.nodes(a) / 4);
  std::mt19937_64 rng(seed);
  LipschitzTable table;
  std::vector<double> ratios;
  for (int i = 0; i < n_samples; ++i) {
    const Vec f = random_fourier_source(g, cap, rng);
    const double r = lipschitz_ratio(A, f);
    if (std::isnan(r)) {
      ++table.skipped;
      continue;
    }
    LipschitzRow row;
    row.member = i;
    row.f_norm = sobolev_norm(g, f, 0, Mask(g.size(), 1));
    row.data_norm = row.f_norm / r;
    row.ratio = r;
    table.rows.push_back(row);
    ratios.push_back(r);
  }
  if (!ratios.empty()) {
    table.max_ratio = *std::max_element(ratios.begin(), ratios.end());
    std::sort(ratios.begin(), ratios.end());
    const std::size_t n = ratios.size();
    table.median_ratio = n % 2 ? ratios[n / 2] : 0.5 * (ratios[n / 2 - 1] + ratios[n / 2]);
  }
  return table;
}

}  // namespace carlab
