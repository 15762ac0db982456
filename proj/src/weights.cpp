#include "carlab/weights.hpp"

#include <algorithm>
#include <limits>
#include <sstream>

namespace carlab {

namespace {

constexpr double kTimeTol = 1e-9;

struct Bump1d {
  double lo;
  double hi;
  double c;
  double kappa;

  double value(double x) const { return (x - lo) * (hi - x) * std::exp(kappa * (x - c)); }
  double slope(double x) const {
    return std::exp(kappa * (x - c)) * ((hi - x) - (x - lo) + kappa * (x - lo) * (hi - x));
  }
};

// kappa puts the unique critical point of (x - lo)(hi - x) exp(kappa x) at c.
double tilt_for(double lo, double hi, double c) { return (2.0 * c - lo - hi) / ((c - lo) * (hi - c)); }

std::vector<Bump1d> bumps_for(const Grid& grid, const std::vector<double>& c) {
  std::vector<Bump1d> out;
  for (int a = 0; a < grid.dim(); ++a) {
    const double lo = grid.axis(a).lo();
    const double hi = grid.axis(a).hi();
    if (!(c[a] > lo && c[a] < hi)) throw Error("bump placement must lie inside the working box");
    out.push_back(Bump1d{lo, hi, c[a], tilt_for(lo, hi, c[a])});
  }
  return out;
}

double raw_value(const Grid& grid, const std::vector<Bump1d>& b, int k) {
  double v = 1.0;
  for (int a = 0; a < grid.dim(); ++a) v *= b[a].value(grid.coord(k, a));
  return v;
}

double raw_value_at(const std::vector<Bump1d>& b, const std::vector<double>& x) {
  double v = 1.0;
  for (std::size_t a = 0; a < b.size(); ++a) v *= b[a].value(x[a]);
  return v;
}

std::vector<int> closure_nodes(const Grid& grid, const SubdomainMasks& masks) {
  std::vector<int> out;
  if (masks.omega0_box) {
    for (int k = 0; k < grid.size(); ++k) {
      if (in_closed_box(grid, k, *masks.omega0_box)) out.push_back(k);
    }
  } else {
    for (int k = 0; k < grid.size(); ++k) {
      if (masks.omega0[k]) out.push_back(k);
    }
  }
  return out;
}

bool is_corner(const Grid& grid, int k) {
  if (grid.dim() < 2) return false;
  const auto ij = grid.multi_index(k);
  int edges = 0;
  for (int a = 0; a < grid.dim(); ++a) edges += (ij[a] == 0 || ij[a] == grid.nodes(a) - 1);
  return edges >= 2;
}

std::pair<int, int> window_levels(const Grid& grid, double t0, double tau) {
  const double dt = grid.dt();
  int lo = static_cast<int>(std::ceil((t0 - tau) / dt - kTimeTol));
  int hi = static_cast<int>(std::floor((t0 + tau) / dt + kTimeTol));
  lo = std::max(lo, 0);
  hi = std::min(hi, grid.Nt());
  return {lo, hi};
}

}  // namespace

std::array<double, kMaxDim> DistanceFunction::gradient(const Grid& grid, int k) const {
  const auto b = bumps_for(grid, placement);
  std::array<double, kMaxDim> g{0.0, 0.0};
  for (int a = 0; a < grid.dim(); ++a) {
    double v = b[a].slope(grid.coord(k, a));
    for (int o = 0; o < grid.dim(); ++o) {
      if (o != a) v *= b[o].value(grid.coord(k, o));
    }
    g[a] = v / norm;
  }
  return g;
}

DistanceFunction build_distance_fn(const Grid& grid, const SubdomainMasks& masks,
                                   const DistanceOptions& opts) {
  DistanceFunction out;
  std::vector<int> candidates;
  for (int k = 0; k < grid.size(); ++k) {
    if (masks.omega[k] && !grid.on_boundary(k)) candidates.push_back(k);
  }

  if (opts.placement) {
    out.placement = *opts.placement;
    if (static_cast<int>(out.placement.size()) != grid.dim()) {
      throw Error("placement dimension does not match grid");
    }
  } else {
    if (candidates.empty()) throw Error("control region omega has no interior nodes");
    const auto targets = closure_nodes(grid, masks);
    int best = candidates.front();
    if (!targets.empty()) {
      double best_floor = -1.0;
      for (int c : candidates) {
        std::vector<double> x(grid.dim());
        for (int a = 0; a < grid.dim(); ++a) x[a] = grid.coord(c, a);
        const auto b = bumps_for(grid, x);
        const double peak = raw_value_at(b, x);
        double floor = std::numeric_limits<double>::infinity();
        for (int t : targets) floor = std::min(floor, raw_value(grid, b, t) / peak);
        if (floor > best_floor + 1e-14) {
          best_floor = floor;
          best = c;
        }
      }
    } else {
      std::vector<double> centre(grid.dim(), 0.0);
      if (masks.omega_box) {
        for (int a = 0; a < grid.dim(); ++a) {
          centre[a] = 0.5 * (masks.omega_box->lo[a] + masks.omega_box->hi[a]);
        }
      } else {
        for (int c : candidates) {
          for (int a = 0; a < grid.dim(); ++a) centre[a] += grid.coord(c, a) / candidates.size();
        }
      }
      double best_d2 = std::numeric_limits<double>::infinity();
      for (int c : candidates) {
        double d2 = 0.0;
        for (int a = 0; a < grid.dim(); ++a) {
          d2 += (grid.coord(c, a) - centre[a]) * (grid.coord(c, a) - centre[a]);
        }
        if (d2 < best_d2 - 1e-15) {
          best_d2 = d2;
          best = c;
        }
      }
    }
    out.placement.resize(grid.dim());
    for (int a = 0; a < grid.dim(); ++a) out.placement[a] = grid.coord(best, a);
  }

  const auto b = bumps_for(grid, out.placement);
  for (const auto& bb : b) out.kappa.push_back(bb.kappa);
  out.norm = raw_value_at(b, out.placement);
  out.d.resize(grid.size());
  for (int k = 0; k < grid.size(); ++k) {
    out.d(k) = grid.on_boundary(k) ? 0.0 : raw_value(grid, b, k) / out.norm;
  }
  out.d_max = out.d.maxCoeff();
  out.d_min = out.d.minCoeff();

  double diam = 0.0;
  for (const auto& ax : grid.axes()) diam = std::max(diam, ax.hi() - ax.lo());
  const double tol = opts.gradient_tol * out.d_max / diam;
  std::vector<int> bad;
  for (int k = 0; k < grid.size(); ++k) {
    if (masks.omega[k] || is_corner(grid, k)) continue;
    const auto g = out.gradient(grid, k);
    if (std::hypot(g[0], g[1]) <= tol) bad.push_back(k);
  }
  if (!bad.empty()) {
    std::ostringstream os;
    os << "|grad d| vanishes outside omega at " << bad.size() << " node(s):";
    for (std::size_t i = 0; i < std::min<std::size_t>(bad.size(), 10); ++i) {
      os << " " << bad[i] << " (x=" << grid.coord(bad[i], 0);
      if (grid.dim() == 2) os << "," << grid.coord(bad[i], 1);
      os << ")";
    }
    throw Error(os.str());
  }
  for (int k = 0; k < grid.size(); ++k) {
    if (!grid.on_boundary(k) && !(out.d(k) > 0.0)) throw Error("d must be positive inside");
  }
  return out;
}

double omega0_floor(const Grid& grid, const SubdomainMasks& masks, const DistanceFunction& d) {
  const auto nodes = closure_nodes(grid, masks);
  if (nodes.empty()) throw Error("omega0 is empty; no floor to compute");
  double floor = std::numeric_limits<double>::infinity();
  for (int k : nodes) floor = std::min(floor, d.d(k));
  return floor / d.d_max;
}

WeightParams::WeightParams(const Grid& grid, const DistanceFunction& d, double lambda, double s,
                           double t0, double tau)
    : d_(d.d), d_max_(d.d_max), d_min_(d.d_min), lambda_(lambda), s_(s), t0_(t0), tau_(tau),
      T_(grid.T()) {
  if (d_.size() != grid.size()) throw Error("weight function does not match grid");
  if (!(lambda > 0.0)) throw Error("lambda must be positive");
  if (!(s > 0.0)) throw Error("s must be positive");
  if (!(tau > 0.0)) throw Error("tau must be positive");
  if (t0 - tau < -kTimeTol * grid.dt() || t0 + tau > grid.T() + kTimeTol * grid.dt()) {
    throw Error("window (t0 - tau, t0 + tau) must lie in (0, T)");
  }
  big_e_ = std::exp(2.0 * lambda_ * d_max_);
}

WeightParams WeightParams::with_s(double s) const {
  WeightParams p = *this;
  if (!(s > 0.0)) throw Error("s must be positive");
  p.s_ = s;
  return p;
}

WeightParams WeightParams::with_lambda(double lambda) const {
  WeightParams p = *this;
  if (!(lambda > 0.0)) throw Error("lambda must be positive");
  p.lambda_ = lambda;
  p.big_e_ = std::exp(2.0 * lambda * d_max_);
  return p;
}

WeightParams WeightParams::with_t0(double t0) const {
  WeightParams p = *this;
  if (t0 - tau_ < 0.0 || t0 + tau_ > T_) throw Error("window (t0 - tau, t0 + tau) must lie in (0, T)");
  p.t0_ = t0;
  return p;
}

bool WeightParams::inside(double t) const {
  const double eps = kTimeTol * tau_;
  return t > t0_ - tau_ + eps && t < t0_ + tau_ - eps;
}

double WeightParams::h(double t) const {
  if (!inside(t)) throw Error("weight undefined outside the open window (t0 - tau, t0 + tau)");
  return 1.0 / std::sqrt((t - (t0_ - tau_)) * (t0_ + tau_ - t));
}

double WeightParams::dh(double t) const {
  const double hv = h(t);
  return (t - t0_) * hv * hv * hv;
}

double WeightParams::alpha(int k, double t) const {
  return h(t) * (std::exp(lambda_ * d_(k)) - big_e_);
}

double WeightParams::phi(int k, double t) const { return h(t) * std::exp(lambda_ * d_(k)); }

double WeightParams::dt_alpha(int k, double t) const {
  return dh(t) * (std::exp(lambda_ * d_(k)) - big_e_);
}

std::pair<int, int> WeightParams::interior_levels(const Grid& grid, int margin) const {
  if (margin < 1) throw Error("time margin must be at least one cell");
  int lo = -1;
  int hi = -1;
  for (int m = 0; m <= grid.Nt(); ++m) {
    if (!inside(grid.time(m))) continue;
    if (lo < 0) lo = m;
    hi = m;
  }
  if (lo < 0) throw Error("no time level inside the weight window");
  lo += margin - 1;
  hi -= margin - 1;
  if (hi - lo < 2) throw Error("time window too short for the requested margin");
  return {lo, hi};
}

WeightSample eval_weights(const WeightParams& params, int k, double t) {
  WeightSample w;
  w.h = params.h(t);
  w.alpha = params.alpha(k, t);
  w.phi = params.phi(k, t);
  return w;
}

double alpha_tilde(const WeightParams& params, int k, double t) {
  return params.big_e() * params.alpha(k, t);
}

double delta_of_N(double lambda, double d_max, double delta_floor, double tau, int N) {
  if (N < 2) throw Error("threshold index N must exceed 1");
  const double n = static_cast<double>(N);
  return n / std::sqrt(n * n - 1.0) / tau *
         (std::exp(lambda * delta_floor) - std::exp(2.0 * lambda * d_max));
}

LevelThresholds compute_thresholds(double lambda, double d_max, double delta_floor, double tau,
                                   std::array<int, 3> N) {
  if (!(N[0] < N[1] && N[1] < N[2])) throw Error("threshold indices must increase");
  LevelThresholds th;
  th.N = N;
  th.lambda = lambda;
  th.tau = tau;
  th.delta_floor = delta_floor;
  th.delta1 = (1.0 - std::exp(2.0 * lambda * d_max)) / tau;
  for (int i = 0; i < 3; ++i) th.deltaN[i] = delta_of_N(lambda, d_max, delta_floor, tau, N[i]);
  th.delta0 = th.deltaN[2] - th.deltaN[1];
  return th;
}

LevelThresholds compute_thresholds(const WeightParams& params, const Grid& grid,
                                   const SubdomainMasks& masks, const DistanceFunction& d,
                                   std::array<int, 3> N) {
  const double floor = omega0_floor(grid, masks, d) * d.d_max;
  return compute_thresholds(params.lambda(), params.d_max(), floor, params.tau(), N);
}

namespace {

double dt_alpha_constant(const Grid& grid, const Vec& d, double lambda, double d_max, double t0,
                         double tau) {
  const double E = std::exp(2.0 * lambda * d_max);
  double worst = 0.0;
  for (int m = 0; m <= grid.Nt(); ++m) {
    const double t = grid.time(m);
    const double q = (t - (t0 - tau)) * (t0 + tau - t);
    if (!(q > kTimeTol * tau * tau)) continue;
    const double h = 1.0 / std::sqrt(q);
    const double dh = (t - t0) * h * h * h;
    for (int k = 0; k < grid.size(); ++k) {
      const double el = std::exp(lambda * d(k));
      worst = std::max(worst, std::abs(dh * (el - E)) / (h * h * el * el));
    }
  }
  return worst;
}

}  // namespace

LambdaSelection select_lambda(const Grid& grid, const SubdomainMasks& masks,
                              const DistanceFunction& d, double t0, double tau,
                              const LambdaSweepOptions& opts) {
  if (!(opts.lambda_min > 0.0) || opts.lambda_cap < opts.lambda_min) {
    throw Error("lambda sweep needs 0 < lambda_min <= lambda_cap");
  }
  const double floor = omega0_floor(grid, masks, d) * d.d_max;
  LambdaSelection sel;
  std::ostringstream diag;
  for (double lambda = opts.lambda_min; lambda <= opts.lambda_cap * (1.0 + 1e-12); lambda *= 2.0) {
    sel.tried.push_back(lambda);
    const auto th = compute_thresholds(lambda, d.d_max, floor, tau, opts.N);
    const double c = dt_alpha_constant(grid, d.d, lambda, d.d_max, t0, tau);
    diag << "\n  lambda=" << lambda << " delta1=" << th.delta1 << " delta(N)=(" << th.deltaN[0]
         << ", " << th.deltaN[1] << ", " << th.deltaN[2] << ") ordered=" << th.ordered()
         << " dt_alpha_constant=" << c;
    if (th.ordered() && c <= opts.dt_alpha_ceiling) {
      sel.lambda = lambda;
      sel.thresholds = th;
      sel.dt_alpha_constant = c;
      return sel;
    }
  }
  throw Error("no lambda in the sweep orders the thresholds (delta floor " +
              std::to_string(floor) + "):" + diag.str());
}

namespace {

// S(x) = x^5 (126 - 420 x + 540 x^2 - 315 x^3 + 70 x^4), coefficients by power.
constexpr std::array<double, 10> kRamp{0, 0, 0, 0, 0, 126, -420, 540, -315, 70};

double poly_derivative(double x, int k) {
  double sum = 0.0;
  for (int p = k; p < static_cast<int>(kRamp.size()); ++p) {
    if (kRamp[p] == 0.0) continue;
    double falling = 1.0;
    for (int i = 0; i < k; ++i) falling *= static_cast<double>(p - i);
    sum += kRamp[p] * falling * std::pow(x, p - k);
  }
  return sum;
}

}  // namespace

double smooth_ramp(double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  return poly_derivative(x, 0);
}

double smooth_ramp_derivative(double x, int k) {
  if (k < 0 || k > 4) throw Error("ramp derivative order must be in [0, 4]");
  if (k == 0) return smooth_ramp(x);
  if (x <= 0.0 || x >= 1.0) return 0.0;
  return poly_derivative(x, k);
}

double Cutoff::value(double alpha) const { return smooth_ramp((alpha - lo) / (hi - lo)); }

double Cutoff::derivative(double alpha, int k) const {
  return smooth_ramp_derivative((alpha - lo) / (hi - lo), k) * std::pow(hi - lo, -k);
}

Cutoff make_cutoff(const LevelThresholds& th) {
  if (!(th.deltaN[1] > th.deltaN[0])) throw Error("empty cut-off transition band");
  return Cutoff{th.deltaN[0], th.deltaN[1]};
}

SpaceTimeField build_cutoff(const WeightParams& params, const LevelThresholds& th,
                            const Grid& grid) {
  const Cutoff chi = make_cutoff(th);
  const auto [m0, m1] = window_levels(grid, params.t0(), params.tau());
  SpaceTimeField out(grid.size(), m1 - m0 + 1, m0);
  for (int m = m0; m <= m1; ++m) {
    const double t = grid.time(m);
    if (!params.inside(t)) continue;
    for (int k = 0; k < grid.size(); ++k) out.level(m)(k) = chi.value(params.alpha(k, t));
  }
  return out;
}

WeightBoundsReport check_weight_bounds(const WeightParams& params, const Grid& grid,
                                       const std::vector<double>& s_values) {
  WeightBoundsReport rep;
  rep.s_values = s_values;
  const auto [m0, m1] = params.interior_levels(grid, 1);
  for (double s : s_values) {
    double best = -std::numeric_limits<double>::infinity();
    for (int m = m0; m <= m1; ++m) {
      const double t = grid.time(m);
      for (int k = 0; k < grid.size(); ++k) {
        const double l = 7.0 * std::log(s) + 7.0 * params.log_phi(k, t) + 2.0 * s * params.alpha(k, t);
        best = std::max(best, l);
      }
    }
    rep.max_s7phi7.push_back(std::exp(best));
  }
  rep.dt_alpha_constant =
      dt_alpha_constant(grid, params.d(), params.lambda(), params.d_max(), params.t0(), params.tau());
  for (int m = m0; m <= m1; ++m) {
    const double t = grid.time(m);
    if (std::abs(t - params.t0()) > kTimeTol * grid.dt()) continue;
    rep.midpoint_on_grid = true;
    double worst = 0.0;
    for (int k = 0; k < grid.size(); ++k) {
      const double phi = params.phi(k, t);
      worst = std::max(worst, std::abs(params.dt_alpha(k, t)) / (phi * phi));
    }
    rep.dt_alpha_at_midpoint = worst;
  }
  return rep;
}

}  // namespace carlab
