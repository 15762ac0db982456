#include "carlab/carleman.hpp"

#include "carlab/forward.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace carlab {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

MultiIndex unit(int axis, int order) {
  MultiIndex m;
  m.order[axis] = order;
  return m;
}

MultiIndex add(MultiIndex x, const MultiIndex& y) {
  for (int a = 0; a < kMaxDim; ++a) x.order[a] += y.order[a];
  return x;
}

void check_navier(const Grid& grid, const SpaceTimeField& y) {
  const double scale = std::max(1.0, y.values.cwiseAbs().maxCoeff());
  for (int m = y.first_level; m <= y.last_level(); ++m) {
    for (int k = 0; k < grid.size(); ++k) {
      if (grid.on_boundary(k) && std::abs(y.level(m)(k)) > 1e-10 * scale) {
        throw Error("field violates y = 0 on the boundary at level " + std::to_string(m));
      }
    }
  }
}

// Weighted sum over the window of sum_j c_j(k, m) exp(2 s alpha + p_j log(s phi)),
// accumulated as a log.
struct LogAccumulator {
  std::vector<double> terms;

  void push(double log_value) {
    if (log_value == kNegInf) return;
    terms.push_back(log_value);
  }
  double result() const { return log_sum_exp(terms); }
};

}  // namespace

double log_sum_exp(const std::vector<double>& v) {
  double m = kNegInf;
  for (double x : v) m = std::max(m, x);
  if (m == kNegInf) return kNegInf;
  if (std::isinf(m)) return m;
  double sum = 0.0;
  for (double x : v) sum += std::exp(x - m);
  return m + std::log(sum);
}

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

double CarlemanSides::log_ratio() const {
  const double obs = rhs_obs > 0.0 ? std::log(rhs_obs) : kNegInf;
  const double den = log_add(log_rhs_pde, obs);
  if (log_lhs == kNegInf && den == kNegInf) return std::numeric_limits<double>::quiet_NaN();
  return log_lhs - den;
}

double CarlemanSides::ratio() const { return std::exp(log_ratio()); }

CarlemanIntegrands carleman_integrands(const Grid& grid, const SpaceTimeField& y,
                                       const CoefficientSet& coeffs, const WeightParams& params,
                                       const Mask& omega, int margin) {
  if (y.nodes() != grid.size()) throw Error("field does not match the grid");
  if (static_cast<int>(omega.size()) != grid.size()) throw Error("omega mask does not match grid");
  check_navier(grid, y);
  const auto [m0, m1] = params.interior_levels(grid, margin);
  if (!y.has_level(m0 - 1) || !y.has_level(m1 + 1)) {
    throw Error("field must cover the weight window plus one level on each side");
  }

  CarlemanIntegrands in;
  in.m0 = m0;
  in.m1 = m1;
  in.space_weights = quadrature_weights(grid, Mask(grid.size(), 1));
  in.pde_space_weights = quadrature_weights(grid, grid.interior_mask());
  in.time_weights = time_weights(grid.dt(), m0, m1);

  const int dim = grid.dim();
  std::vector<SpMat> grad, grad_lap;
  std::vector<std::pair<SpMat, double>> hess;
  for (int a = 0; a < dim; ++a) {
    grad.push_back(derivative_matrix(grid, unit(a, 1)));
    SpMat gl(grid.size(), grid.size());
    for (int b = 0; b < dim; ++b) gl += derivative_matrix(grid, add(unit(a, 1), unit(b, 2)));
    grad_lap.push_back(gl);
    for (int b = a; b < dim; ++b) {
      hess.emplace_back(derivative_matrix(grid, add(unit(a, 1), unit(b, 1))), a == b ? 1.0 : 2.0);
    }
  }
  const SpMat K = biharmonic_navier_matrix(grid) + lower_order_matrix(grid, coeffs);
  const SpaceTimeField window = y.window(m0 - 1, m1 + 1);
  const SpaceTimeField dty = window.time_derivative(grid.dt());

  const int L = m1 - m0 + 1;
  const int n = grid.size();
  in.y2.resize(n, L);
  in.grad2.resize(n, L);
  in.hess2.resize(n, L);
  in.grad_lap2.resize(n, L);
  in.low2.resize(n, L);
  in.Py2.resize(n, L);
  const Vec w_omega = quadrature_weights(grid, omega);
  for (int m = m0; m <= m1; ++m) {
    const Vec v = y.level(m);
    const Vec vt = dty.level(m);
    Vec g2 = Vec::Zero(n), h2 = Vec::Zero(n), gl2 = Vec::Zero(n);
    for (int a = 0; a < dim; ++a) {
      g2 += (grad[a] * v).cwiseAbs2();
      gl2 += (grad_lap[a] * v).cwiseAbs2();
    }
    for (const auto& [H, mult] : hess) h2 += mult * (H * v).cwiseAbs2();
    const int c = m - m0;
    in.y2.col(c) = v.cwiseAbs2();
    in.grad2.col(c) = g2;
    in.hess2.col(c) = h2;
    in.grad_lap2.col(c) = gl2;
    in.low2.col(c) = vt.cwiseAbs2() + h2;
    in.Py2.col(c) = (vt + K * v).cwiseAbs2();
    in.obs += in.time_weights(c) * w_omega.dot(v.cwiseAbs2());
  }
  return in;
}

CarlemanSides carleman_sides(const CarlemanIntegrands& in, const Grid& grid,
                             const WeightParams& params) {
  const double log_s = std::log(params.s());
  LogAccumulator lhs, pde;
  for (int m = in.m0; m <= in.m1; ++m) {
    const int c = m - in.m0;
    const double t = grid.time(m);
    const double wt = in.time_weights(c);
    for (int k = 0; k < grid.size(); ++k) {
      const double base = 2.0 * params.s() * params.alpha(k, t);
      const double lsp = log_s + params.log_phi(k, t);
      const double wx = in.space_weights(k);
      auto push = [&](LogAccumulator& acc, double weight, double value, double power) {
        if (weight <= 0.0 || value <= 0.0) return;
        acc.push(std::log(weight * value) + base + power * lsp);
      };
      push(lhs, wt * wx, in.y2(k, c), 6.0);
      push(lhs, wt * wx, in.grad2(k, c), 4.0);
      push(lhs, wt * wx, in.hess2(k, c), 2.0);
      push(lhs, wt * wx, in.grad_lap2(k, c), 1.0);
      push(lhs, wt * wx, in.low2(k, c), -1.0);
      push(pde, wt * in.pde_space_weights(k), in.Py2(k, c), 0.0);
    }
  }
  CarlemanSides out;
  out.log_lhs = lhs.result();
  out.log_rhs_pde = pde.result();
  out.lhs = std::exp(out.log_lhs);
  out.rhs_pde = std::exp(out.log_rhs_pde);
  out.rhs_obs = in.obs;
  return out;
}

CarlemanSides carleman_sides(const Grid& grid, const SpaceTimeField& y, const CoefficientSet& coeffs,
                             const WeightParams& params, const Mask& omega, int margin) {
  return carleman_sides(carleman_integrands(grid, y, coeffs, params, omega, margin), grid, params);
}

RatioSweep ratio_sweep(const Grid& grid, const std::vector<SpaceTimeField>& suite,
                       const CoefficientSet& coeffs, const WeightParams& params, const Mask& omega,
                       const std::vector<double>& s_values, int margin, double growth_tol) {
  if (s_values.size() < 5) throw Error("s sweep needs at least five points");
  if (suite.empty()) throw Error("empty field suite");
  RatioSweep out;
  out.s_values = s_values;
  out.growth_tol = growth_tol;
  const int S = static_cast<int>(s_values.size());
  out.ratios.resize(static_cast<int>(suite.size()), S);
  for (std::size_t i = 0; i < suite.size(); ++i) {
    const auto in = carleman_integrands(grid, suite[i], coeffs, params, omega, margin);
    for (int j = 0; j < S; ++j) {
      out.ratios(static_cast<int>(i), j) = carleman_sides(in, grid, params.with_s(s_values[j])).ratio();
    }
  }
  for (int j = 0; j < S; ++j) {
    double best = 0.0;
    for (int i = 0; i < out.ratios.rows(); ++i) {
      const double r = out.ratios(i, j);
      if (std::isfinite(r)) best = std::max(best, r);
    }
    out.max_per_s.push_back(best);
  }
  for (int i = 0; i < S; ++i) {
    const double tail = *std::max_element(out.max_per_s.begin() + i, out.max_per_s.end());
    if (tail <= growth_tol * out.max_per_s[i]) {
      out.knee = i;
      out.s0 = s_values[i];
      out.points_above_knee = S - 1 - i;
      out.max_beyond_knee = tail;
      break;
    }
  }
  return out;
}

std::vector<double> geometric_range(double lo, double hi, double factor) {
  if (!(lo > 0.0) || !(hi >= lo) || !(factor > 1.0)) throw Error("invalid geometric range");
  std::vector<double> out;
  for (int i = 0;; ++i) {
    const double v = lo * std::pow(factor, i);
    if (v > hi * (1.0 + 1e-12)) break;
    out.push_back(v);
  }
  return out;
}

namespace {

// a(t) = c0 + c1 cos(pi t / T + p1) + c2 cos(2 pi t / T + p2)
struct Profile {
  double c[3];
  double p[2];

  double operator()(double t, double T) const {
    const double pi = std::numbers::pi;
    return c[0] + c[1] * std::cos(pi * t / T + p[0]) + c[2] * std::cos(2.0 * pi * t / T + p[1]);
  }
};

Profile draw_profile(std::mt19937_64& rng) {
  std::normal_distribution<double> n01;
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  Profile pr{};
  for (double& v : pr.c) v = n01(rng);
  for (double& v : pr.p) v = phase(rng);
  return pr;
}

template <class Shape>
std::vector<SpaceTimeField> build_suite(const Grid& grid, int members, unsigned long long seed,
                                        Shape shape, bool with_modal) {
  if (members < 1) throw Error("suite needs at least one member");
  std::mt19937_64 rng(seed);
  std::vector<SpaceTimeField> out;
  for (int i = 0; i < members; ++i) {
    SpaceTimeField y(grid.size(), grid.Nt() + 1);
    if (with_modal && i % 2 == 1) {
      // decaying mode: an exact solution of the unperturbed equation
      const int k = 1 + (i / 2) % 3;
      Vec s = shape(k);
      const double rate = std::pow(k * std::numbers::pi, 4) * 0.01;
      for (int m = 0; m <= grid.Nt(); ++m) y.level(m) = std::exp(-rate * grid.time(m)) * s;
    } else {
      for (int k = 1; k <= 3; ++k) {
        const Profile pr = draw_profile(rng);
        const Vec s = shape(k);
        for (int m = 0; m <= grid.Nt(); ++m) y.level(m) += pr(grid.time(m), grid.T()) / k * s;
      }
    }
    out.push_back(std::move(y));
  }
  return out;
}

}  // namespace

std::vector<SpaceTimeField> carleman_suite(const Grid& grid, int members, unsigned long long seed) {
  auto shape = [&grid](int k) {
    Vec s = Vec::Ones(grid.size());
    for (int a = 0; a < grid.dim(); ++a) {
      const double lo = grid.axis(a).lo();
      const double L = grid.axis(a).hi() - lo;
      for (int n = 0; n < grid.size(); ++n) {
        s(n) *= grid.on_boundary(n) ? 0.0 : std::sin(k * std::numbers::pi * (grid.coord(n, a) - lo) / L);
      }
    }
    return s;
  };
  return build_suite(grid, members, seed, shape, true);
}

std::vector<SpaceTimeField> carleman_suite_supported(const Grid& grid, const Box& support,
                                                     int members, unsigned long long seed) {
  for (int a = 0; a < grid.dim(); ++a) {
    if (!(support.lo[a] < support.hi[a])) throw Error("empty support box");
  }
  auto shape = [&grid, &support](int k) {
    Vec s = Vec::Ones(grid.size());
    for (int a = 0; a < grid.dim(); ++a) {
      const double lo = support.lo[a];
      const double L = support.hi[a] - lo;
      for (int n = 0; n < grid.size(); ++n) {
        const double x = (grid.coord(n, a) - lo) / L;
        if (x <= 0.0 || x >= 1.0 || grid.on_boundary(n)) {
          s(n) = 0.0;
          continue;
        }
        const double b = std::sin(std::numbers::pi * x);
        s(n) *= std::pow(b, 6) * std::cos((k - 1) * std::numbers::pi * x);
      }
    }
    return s;
  };
  return build_suite(grid, members, seed, shape, false);
}

EnergyShift check_energy_shift(const Grid& grid, const SpaceTimeField& z, const WeightParams& params) {
  if (z.nodes() != grid.size() || z.first_level != 0 || z.last_level() != grid.Nt()) {
    throw Error("z must hold every level of the grid");
  }
  const int theta = nearest_level(grid, params.t0());
  if (std::abs(grid.time(theta) - params.t0()) > 1e-9 * grid.dt()) {
    throw Error("theta must be a grid level");
  }
  const auto [m0, m1] = params.interior_levels(grid, 1);
  if (theta <= m0 || theta >= m1) throw Error("window mismatch: theta not inside the window");
  const SpaceTimeField dz = z.time_derivative(grid.dt());
  const Vec wx = quadrature_weights(grid, Mask(grid.size(), 1));
  const double s = params.s();

  double shift = kNegInf;
  for (int k = 0; k < grid.size(); ++k) shift = std::max(shift, 2.0 * s * params.alpha(k, params.t0()));

  EnergyShift out;
  out.log_shift = shift;
  for (int k = 0; k < grid.size(); ++k) {
    const double e = std::exp(2.0 * s * params.alpha(k, params.t0()) - shift);
    out.lhs_point += wx(k) * z.level(theta)(k) * z.level(theta)(k) * e;
  }
  const Vec wt = time_weights(grid.dt(), m0, m1);
  const Vec wl = time_weights(grid.dt(), m0, theta);
  for (int m = m0; m <= m1; ++m) {
    const double t = grid.time(m);
    double rhs = 0.0;
    double ftc = 0.0;
    for (int k = 0; k < grid.size(); ++k) {
      const double zz = z.level(m)(k);
      const double zt = dz.level(m)(k);
      const double phi = params.phi(k, t);
      const double e = std::exp(2.0 * s * params.alpha(k, t) - shift);
      rhs += wx(k) * (std::abs(zz) * std::abs(zt) + s * phi * phi * zz * zz) * e;
      ftc += wx(k) * (2.0 * zz * zt + 2.0 * s * params.dt_alpha(k, t) * zz * zz) * e;
    }
    out.rhs_int += wt(m - m0) * rhs;
    if (m <= theta) out.ftc_integral += wl(m - m0) * ftc;
  }
  out.identity_rel_error =
      out.lhs_point > 0.0 ? std::abs(out.ftc_integral - out.lhs_point) / out.lhs_point : 0.0;
  return out;
}

double collapse_integral(double C0, double t1, double s) {
  if (!(t1 > 0.0) || s < 0.0 || C0 < 0.0) throw Error("invalid collapse integral parameters");
  // t - theta = t1 sin(psi): h(t) = 1 / (t1 cos psi), dt = t1 cos psi dpsi
  auto f = [=](double psi) {
    const double c = std::cos(psi);
    if (c <= 0.0) return 0.0;
    const double gap = (1.0 / c - 1.0) / t1;
    return std::exp(-C0 * s * gap) * t1 * c;
  };
  const double half = 0.5 * std::numbers::pi;
  double err = 0.0;
  const double left = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, -half, 0.0, 20, 1e-13, &err);
  const double right = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, 0.0, half, 20, 1e-13, &err);
  return left + right;
}

CollapseTable check_lebesgue_collapse(const WeightParams& params, const std::vector<double>& s_values) {
  if (s_values.empty()) throw Error("empty s sweep");
  CollapseTable out;
  out.C0 = 2.0 * (params.big_e() - std::exp(params.lambda() * params.d_max()));
  out.window = 2.0 * params.tau();
  for (double s : s_values) out.rows.push_back({s, collapse_integral(out.C0, params.tau(), s)});
  out.strictly_decreasing = true;
  for (std::size_t i = 0; i + 1 < out.rows.size(); ++i) {
    if (!(out.rows[i + 1].integral < out.rows[i].integral)) out.strictly_decreasing = false;
  }
  out.last_over_first = out.rows.back().integral / out.rows.front().integral;
  return out;
}

}  // namespace carlab
