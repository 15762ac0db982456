#include "carlab/cli/checks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "carlab/carleman.hpp"
#include "carlab/cli/report.hpp"
#include "carlab/continuation.hpp"
#include "carlab/forward.hpp"
#include "carlab/inverse_source.hpp"
#include "carlab/weights.hpp"

namespace carlab::cli {

using nlohmann::json;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

Grid line(const Config& c, int nodes, double T, int Nt) {
  return build_grid(1, {c.geometry.domain}, {nodes}, T, Nt);
}

LambdaSweepOptions sweep_options(const Config& c) {
  LambdaSweepOptions o;
  o.lambda_min = c.weights.lambda_min;
  o.lambda_cap = c.weights.lambda_cap;
  o.N = c.weights.N;
  return o;
}

/// sin(k pi (x - lo) / L), zero on the boundary nodes.
Vec sine(const Grid& g, int k) {
  const double lo = g.axis(0).lo();
  const double L = g.axis(0).hi() - lo;
  Vec v(g.size());
  for (int n = 0; n < g.size(); ++n) v(n) = g.on_boundary(n) ? 0.0 : std::sin(k * kPi * (g.coord(n, 0) - lo) / L);
  return v;
}

double l2(const Grid& g, const Vec& v) { return sobolev_norm(g, v, 0, Mask(g.size(), 1)); }

Mask omega_mask(const Config& c, const Grid& g) {
  SubdomainSpec spec;
  spec.omega = c.geometry.omega;
  return build_subdomains(g, spec).omega;
}

/// R(x, t) = 1 + 0.25 x cos(3 t) on [0, 1]; bounded below by 0.75.
SpaceTimeField varying_R(const Grid& g) {
  SpaceTimeField R(g.size(), g.Nt() + 1);
  for (int m = 0; m <= g.Nt(); ++m) {
    for (int n = 0; n < g.size(); ++n) R.level(m)(n) = 1.0 + 0.25 * g.coord(n, 0) * std::cos(3.0 * g.time(m));
  }
  return R;
}

struct SourceProblem {
  Grid grid;
  CoefficientSet coeffs;
  SpaceTimeField R;
  ObservationData layout;
};

SourceProblem source_problem(const Config& c, int nodes) {
  const auto& ic = c.inverse_source;
  SourceProblem p;
  p.grid = line(c, nodes, ic.T, ic.Nt);
  p.coeffs = make_coefficients(p.grid, ic.coefficients);
  p.R = varying_R(p.grid);
  p.layout = observation_layout(p.grid, omega_mask(c, p.grid), ic.theta, ic.t1);
  return p;
}

Table lipschitz_table(const std::string& name, const LipschitzTable& t) {
  Table out{name, {"member", "f_norm", "data_norm", "ratio"}};
  for (const auto& r : t.rows) out.add({double(r.member), r.f_norm, r.data_norm, r.ratio});
  out.plot_x = "member";
  out.plot_y = {"ratio"};
  return out;
}

LipschitzTable run_lipschitz(const Config& c, int nodes) {
  const auto p = source_problem(c, nodes);
  const ObservationOperator A(p.grid, p.coeffs, p.R, p.layout);
  return lipschitz_ensemble(c.inverse_source.ensemble_size, A, c.inverse_source.mode_cap, c.seed);
}

struct ContinuationSetup {
  Grid grid;
  ContinuationProblem prob;
  SpaceTimeField truth;
  QrOptions opts;
};

ContinuationSetup continuation_setup(const Config& c) {
  const auto& q = c.continuation;
  ContinuationSetup s;
  s.grid = line(c, q.nodes, q.T, q.Nt);
  const auto coeffs = make_coefficients(s.grid, q.coefficients);
  s.prob = make_continuation_problem(s.grid, coeffs, c.geometry.gamma, c.geometry.pad, c.geometry.omega0,
                                     q.epsilon, q.tau, sweep_options(c));
  // Truth: the forward solution from three sine modes.
  const Vec u0 = sine(s.grid, 1) + 0.5 * sine(s.grid, 2) + 0.2 * sine(s.grid, 3);
  s.truth = solve_forward(s.grid, coeffs, SourceModel{}, u0);
  s.opts.s = q.s;
  s.opts.reg = q.reg;
  s.opts.extension_width = q.extension_width;
  return s;
}

Table noise_table(const NoiseSweep& sw) {
  Table t{"continuation_noise_sweep", {"level", "D", "error", "j_error"}};
  for (const auto& r : sw.rows) t.add({r.level, r.D, r.error, r.j_error});
  t.plot_x = "D";
  t.plot_y = {"error"};
  t.log_x = t.log_y = true;
  return t;
}

NoiseSweep run_noise_sweep(const Config& c, const ContinuationSetup& s) {
  return noise_sweep(s.prob, s.truth, c.continuation.noise_levels, c.continuation.seeds, c.seed, s.opts);
}

json thresholds_json(const LambdaSelection& sel) {
  const auto& th = sel.thresholds;
  return {{"lambda", sel.lambda},
          {"delta1", th.delta1},
          {"N", th.N},
          {"deltaN", th.deltaN},
          {"delta0", th.delta0},
          {"ordered", th.ordered()}};
}

void fail_unless(bool ok, CheckResult& r, const std::string& why) {
  if (ok) return;
  r.pass = false;
  if (!r.detail.empty()) r.detail += "; ";
  r.detail += why;
}

CheckResult start(int criterion) {
  CheckResult r;
  r.criterion = criterion;
  r.name = criterion_names().at(criterion - 1);
  r.pass = true;
  return r;
}

}  // namespace

void Table::add(std::vector<double> row) {
  if (row.size() != columns.size()) throw Error("table " + name + ": row width does not match the header");
  rows.push_back(std::move(row));
}

std::vector<double> Table::column(const std::string& c) const {
  const auto it = std::find(columns.begin(), columns.end(), c);
  if (it == columns.end()) throw Error("table " + name + " has no column " + c);
  const auto j = static_cast<std::size_t>(it - columns.begin());
  std::vector<double> out;
  for (const auto& r : rows) out.push_back(r[j]);
  return out;
}

const std::vector<std::string>& criterion_names() {
  static const std::vector<std::string> names{
      "forward solver order",   "operator spectrum and symmetry", "weight system",
      "Carleman inequality",    "energy shift",                   "Lebesgue collapse",
      "inverse source",         "Lipschitz stability",            "continuation uniqueness",
      "Hoelder stability",      "determinism"};
  return names;
}

CheckResult run_check(int criterion, const Config& c) {
  using Fn = CheckResult (*)(const Config&);
  static const Fn fns[] = {check_forward_order,       check_operator_spectrum,   check_weight_system,
                           check_carleman_inequality, check_energy_shift,        check_lebesgue_collapse,
                           check_inverse_source,      check_lipschitz_stability, check_continuation_uniqueness,
                           check_holder_stability,    check_determinism};
  if (criterion < 1 || criterion > 11) throw Error("no acceptance criterion " + std::to_string(criterion));
  try {
    return fns[criterion - 1](c);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    CheckResult r = start(criterion);
    r.pass = false;
    r.detail = e.what();
    return r;
  }
}

CheckResult check_forward_order(const Config& c) {
  const auto& f = c.forward;
  CheckResult r = start(1);

  std::vector<Grid> space, time;
  for (int n : f.space_nodes) space.push_back(line(c, n, f.space_T, f.space_Nt));
  const Grid base = line(c, f.time_nodes, f.time_T, f.time_Nt.front());
  for (int Nt : f.time_Nt) time.push_back(base.with_time(f.time_T, Nt));

  const auto emit = [&](const ConvergenceTable& ct, const std::string& axis, const std::array<double, 2>& band) {
    Table t{"forward_" + axis, {"nodes", "Nt", "h", "dt", "error", "rel_error", "order"}};
    for (std::size_t i = 0; i < ct.rows.size(); ++i) {
      const auto& row = ct.rows[i];
      t.add({double(row.nodes), double(row.Nt), row.h, row.dt, row.error, row.rel_error,
             i == 0 ? kNaN : ct.orders[i - 1]});
    }
    t.plot_x = axis == "space" ? "h" : "dt";
    t.plot_y = {"error"};
    t.log_x = t.log_y = true;
    r.tables.push_back(t);
    r.metrics[axis + "_orders"] = ct.orders;
    for (double o : ct.orders) {
      fail_unless(o >= band[0] && o <= band[1], r,
                  axis + " order " + fmt(o) + " outside [" + fmt(band[0]) + ", " + fmt(band[1]) + "]");
    }
  };
  emit(manufactured_convergence(space, f.mode), "space", f.space_order);
  emit(manufactured_convergence(time, f.mode), "time", f.time_order);

  // final state on the finest temporal grid against the modal solution
  const Grid& fine = time.back();
  const auto exact = modal_solution(fine, f.mode);
  const auto y = solve_forward(fine, CoefficientSet{}, SourceModel{}, exact.level(0));
  Table s{"forward_final_state", {"x", "y", "exact"}};
  for (int n = 0; n < fine.size(); ++n) s.add({fine.coord(n, 0), y.level(fine.Nt())(n), exact.level(fine.Nt())(n)});
  s.plot_x = "x";
  s.plot_y = {"y", "exact"};
  r.tables.push_back(s);
  if (r.pass) r.detail = "observed orders inside the accepted bands";
  return r;
}

CheckResult check_operator_spectrum(const Config& c) {
  const auto& o = c.operators;
  CheckResult r = start(2);

  Table t{"operator_spectrum", {"k", "nodes", "h", "max_error", "order"}};
  std::vector<double> orders;
  for (int k = 1; k <= o.spectral_modes; ++k) {
    double prev_e = 0.0, prev_h = 0.0;
    for (int n : o.spectral_nodes) {
      const Grid g = line(c, n, 1.0, 8);
      const double L = c.geometry.domain[1] - c.geometry.domain[0];
      const double lam = std::pow(k * kPi / L, 4);
      const Vec u = sine(g, k);
      const Vec bu = apply_biharmonic_navier(g, u);
      double e = 0.0;
      for (int i = 1; i + 1 < n; ++i) {
        if (std::abs(u(i)) > 1e-3) e = std::max(e, std::abs(bu(i) / u(i) - lam));
      }
      const double h = g.spacing(0);
      const double order = prev_e > 0.0 ? std::log(prev_e / e) / std::log(prev_h / h) : kNaN;
      if (prev_e > 0.0) {
        orders.push_back(order);
        fail_unless(order >= o.spectral_order[0] && order <= o.spectral_order[1], r,
                    "k = " + std::to_string(k) + ": order " + fmt(order));
      }
      t.add({double(k), double(n), h, e, order});
      prev_e = e;
      prev_h = h;
    }
  }
  t.plot_x = "h";
  t.plot_y = {"max_error"};
  t.log_x = t.log_y = true;
  r.tables.push_back(t);
  r.metrics["spectral_orders"] = orders;

  // symmetry of the Navier matrix on random interior pairs, in 1D and on a 33^2 square
  std::mt19937_64 rng(c.seed);
  std::normal_distribution<double> n01;
  Table s{"operator_symmetry", {"dim", "pair", "rel_asymmetry"}};
  double worst = 0.0;
  const Grid square = build_grid(2, {c.geometry.domain, c.geometry.domain}, {33, 33}, 1.0, 8);
  for (const Grid& g : {line(c, o.spectral_nodes.back(), 1.0, 8), square}) {
    const SpMat B = biharmonic_navier_matrix(g);
    for (int p = 0; p < o.symmetry_pairs; ++p) {
      Vec u(g.size()), v(g.size());
      for (int n = 0; n < g.size(); ++n) {
        u(n) = g.on_boundary(n) ? 0.0 : n01(rng);
        v(n) = g.on_boundary(n) ? 0.0 : n01(rng);
      }
      const double a = (B * u).dot(v);
      const double b = u.dot(B * v);
      const double rel = std::abs(a - b) / std::max(std::abs(a), std::abs(b));
      worst = std::max(worst, rel);
      s.add({double(g.dim()), double(p), rel});
    }
  }
  r.tables.push_back(s);
  r.metrics["max_rel_asymmetry"] = worst;
  fail_unless(worst <= o.symmetry_tol, r, "relative asymmetry " + fmt(worst));
  if (r.pass) r.detail = "O(h^2) spectral ratios; symmetric to " + fmt(worst);
  return r;
}

CheckResult check_weight_system(const Config& c) {
  const auto& w = c.weights;
  CheckResult r = start(3);

  const Grid g = line(c, w.nodes, w.T, w.Nt);
  const auto ext = extend_domain(g, c.geometry.gamma, c.geometry.pad, c.geometry.omega0);
  const auto d = build_distance_fn(ext.grid, ext.masks);
  const auto sel = select_lambda(ext.grid, ext.masks, d, w.t0, w.tau, sweep_options(c));
  const WeightParams wp(ext.grid, d, sel.lambda, 1.0, w.t0, w.tau);
  const Grid& wg = ext.grid;

  fail_unless(wp.h(w.t0) == 1.0 / w.tau, r, "h(t0) = " + fmt(wp.h(w.t0)) + " differs from 1/tau");
  double alpha_max = -std::numeric_limits<double>::infinity();
  for (int m = 0; m <= wg.Nt(); ++m) {
    if (!wp.inside(wg.time(m))) continue;
    for (int k = 0; k < wg.size(); ++k) alpha_max = std::max(alpha_max, wp.alpha(k, wg.time(m)));
  }
  fail_unless(alpha_max < 0.0, r, "alpha reaches " + fmt(alpha_max));
  fail_unless(sel.thresholds.ordered(), r, "thresholds not ordered at lambda = " + fmt(sel.lambda));

  const auto rep = check_weight_bounds(wp, wg, w.s_values);
  Table t{"weight_bounds", {"s", "max_s7phi7"}};
  for (std::size_t i = 0; i < rep.s_values.size(); ++i) {
    t.add({rep.s_values[i], rep.max_s7phi7[i]});
    if (i > 0) {
      fail_unless(rep.max_s7phi7[i] <= rep.max_s7phi7[i - 1], r,
                  "s^7 phi^7 e^{2 s alpha} grows at s = " + fmt(rep.s_values[i]));
    }
  }
  t.plot_x = "s";
  t.plot_y = {"max_s7phi7"};
  t.log_x = t.log_y = true;
  r.tables.push_back(t);

  Table th{"weight_thresholds", {"N", "delta"}};
  th.add({1.0, sel.thresholds.delta1});
  for (int i = 0; i < 3; ++i) th.add({double(sel.thresholds.N[i]), sel.thresholds.deltaN[i]});
  r.tables.push_back(th);

  r.metrics["thresholds"] = thresholds_json(sel);
  r.metrics["h_t0"] = wp.h(w.t0);
  r.metrics["max_alpha"] = alpha_max;
  r.metrics["dt_alpha_constant"] = rep.dt_alpha_constant;
  if (r.pass) r.detail = "lambda = " + fmt(sel.lambda) + ", thresholds ordered, weight bound non-increasing";
  return r;
}

CheckResult check_carleman_inequality(const Config& c) {
  const auto& w = c.weights;
  const auto& k = c.carleman;
  CheckResult r = start(4);

  const Grid g = line(c, w.nodes, w.T, w.Nt);
  SubdomainSpec spec;
  spec.omega = c.geometry.omega;
  const auto masks = build_subdomains(g, spec);
  const auto d = build_distance_fn(g, masks);
  const WeightParams wp(g, d, k.lambda, 1.0, w.t0, w.tau);
  const auto coeffs = make_coefficients(g, c.operators.coefficients);

  auto suite = carleman_suite(g, k.members, c.seed);
  const auto supported = carleman_suite_supported(g, k.support, k.supported_members, c.seed + 1);
  suite.insert(suite.end(), supported.begin(), supported.end());
  const auto s_values = geometric_range(k.s_min, k.s_max, k.s_factor);
  const auto sw = ratio_sweep(g, suite, coeffs, wp, masks.omega, s_values, 1, k.growth_tol);

  Table t{"carleman_ratios", {"s", "max_C_emp"}};
  for (std::size_t m = 0; m < suite.size(); ++m) t.columns.push_back("member_" + std::to_string(m));
  for (std::size_t j = 0; j < s_values.size(); ++j) {
    std::vector<double> row{s_values[j], sw.max_per_s[j]};
    for (Eigen::Index m = 0; m < sw.ratios.rows(); ++m) row.push_back(sw.ratios(m, j));
    t.add(row);
  }
  t.plot_x = "s";
  t.plot_y = {"max_C_emp"};
  t.log_x = t.log_y = true;
  r.tables.push_back(t);

  bool finite = true;
  for (double v : sw.max_per_s) finite = finite && std::isfinite(v);
  fail_unless(finite, r, "non-finite C_emp");
  fail_unless(sw.bounded(k.min_points_above_knee), r,
              "only " + std::to_string(sw.points_above_knee) + " points above the knee");
  if (sw.knee >= 0) {
    fail_unless(sw.max_beyond_knee <= k.growth_tol * sw.max_per_s[sw.knee], r,
                "max C_emp beyond the knee " + fmt(sw.max_beyond_knee) + " exceeds " + fmt(k.growth_tol) +
                    " x C_emp(s0)");
  }

  const SpaceTimeField zero(g.size(), g.Nt() + 1);
  const auto z = carleman_sides(g, zero, coeffs, wp.with_s(k.s_max), masks.omega);
  fail_unless(z.lhs == 0.0 && z.rhs_pde == 0.0 && z.rhs_obs == 0.0, r, "zero field gives nonzero sides");

  r.metrics["members"] = suite.size();
  r.metrics["s0"] = sw.s0;
  r.metrics["points_above_knee"] = sw.points_above_knee;
  r.metrics["C_emp_knee"] = sw.knee >= 0 ? sw.max_per_s[sw.knee] : kNaN;
  r.metrics["C_emp_max_beyond_knee"] = sw.max_beyond_knee;
  if (r.pass) r.detail = "knee s0 = " + fmt(sw.s0) + ", C_emp bounded beyond it";
  return r;
}

CheckResult check_energy_shift(const Config& c) {
  const auto& k = c.carleman;
  CheckResult r = start(5);

  Table t{"energy_shift", {"nodes", "Nt", "lhs_point", "rhs_int", "C_emp", "identity_rel_error"}};
  std::vector<double> ratios;
  double fine_identity = 0.0;
  for (const auto& [nodes, Nt] : k.energy_grids) {
    const Grid g = line(c, nodes, k.energy_T, Nt);
    const auto d = build_distance_fn(g, build_subdomains(g, SubdomainSpec{c.geometry.omega, {}, {}}));
    const WeightParams wp(g, d, k.lambda, k.energy_s, k.energy_theta, k.energy_t1);
    const auto e = carlab::check_energy_shift(g, modal_solution(g, 1), wp);
    t.add({double(nodes), double(Nt), e.lhs_point, e.rhs_int, e.ratio(), e.identity_rel_error});
    ratios.push_back(e.ratio());
    fine_identity = e.identity_rel_error;
    fail_unless(std::isfinite(e.ratio()) && e.lhs_point <= e.ratio() * e.rhs_int * (1.0 + 1e-12), r,
                "no finite C_emp on " + std::to_string(nodes) + " nodes");
  }
  r.tables.push_back(t);
  fail_unless(fine_identity < k.identity_tol, r, "identity error " + fmt(fine_identity) + " on the fine grid");
  double spread = 0.0;
  for (double v : ratios) spread = std::max(spread, std::abs(v - ratios.front()) / ratios.front());
  fail_unless(spread <= k.energy_stability, r, "C_emp moves by " + fmt(100 * spread) + "% under refinement");
  r.metrics["C_emp"] = ratios;
  r.metrics["identity_rel_error_fine"] = fine_identity;
  r.metrics["C_emp_spread"] = spread;
  if (r.pass) r.detail = "identity error " + fmt(fine_identity) + ", C_emp spread " + fmt(100 * spread) + "%";
  return r;
}

CheckResult check_lebesgue_collapse(const Config& c) {
  const auto& k = c.carleman;
  CheckResult r = start(6);

  const auto& [nodes, Nt] = k.energy_grids.front();
  const Grid g = line(c, nodes, k.energy_T, Nt);
  const auto d = build_distance_fn(g, build_subdomains(g, SubdomainSpec{c.geometry.omega, {}, {}}));
  const WeightParams wp(g, d, k.lambda, 1.0, k.energy_theta, k.energy_t1);
  const auto col = carlab::check_lebesgue_collapse(wp, geometric_range(k.collapse_s_min, k.collapse_s_max,
                                                                       k.collapse_factor));
  Table t{"lebesgue_collapse", {"s", "integral"}};
  for (const auto& row : col.rows) t.add({row.s, row.integral});
  t.plot_x = "s";
  t.plot_y = {"integral"};
  t.log_x = t.log_y = true;
  r.tables.push_back(t);
  fail_unless(col.strictly_decreasing, r, "I(s) not strictly decreasing");
  fail_unless(col.last_over_first < k.collapse_ratio, r, "I(s_max)/I(s_min) = " + fmt(col.last_over_first));
  r.metrics["C0"] = col.C0;
  r.metrics["last_over_first"] = col.last_over_first;
  if (r.pass) r.detail = "I(s_max)/I(s_min) = " + fmt(col.last_over_first);
  return r;
}

CheckResult check_inverse_source(const Config& c) {
  const auto& ic = c.inverse_source;
  CheckResult r = start(7);

  // direct formula, R = 1 and no lower-order terms
  {
    const Grid g = line(c, ic.nodes, ic.T, ic.Nt);
    const auto src = SourceModel::separable(g, Vec::Ones(g.size()), sine(g, 1), ic.r0);
    const auto y = solve_forward(g, CoefficientSet{}, src, Vec::Zero(g.size()));
    const Vec f = direct_formula_reconstruct(g, y, CoefficientSet{}, src, ic.theta);
    const double err = l2(g, f - src.f) / l2(g, src.f);
    r.metrics["direct_rel_error"] = err;
    fail_unless(err < ic.direct_tol, r, "direct formula error " + fmt(err));
  }

  // Tikhonov sweep with coefficients and time-dependent R
  const auto p = source_problem(c, ic.nodes);
  const ObservationOperator A(p.grid, p.coeffs, p.R, p.layout);
  const Vec f_true = sine(p.grid, 1);
  const auto obs = A.apply(f_true);
  Table t{"tikhonov_sweep", {"reg", "rel_error", "f_norm", "iterations"}};
  double prev = std::numeric_limits<double>::infinity();
  bool monotone = true;
  for (double reg : ic.reg_sweep) {
    const auto res = tikhonov_reconstruct(A, obs, {reg, ic.cg_tol, ic.cg_max_iter});
    const double err = l2(p.grid, res.f - f_true) / l2(p.grid, f_true);
    t.add({reg, err, l2(p.grid, res.f), double(res.iterations)});
    monotone = monotone && err <= prev * (1.0 + 1e-9);
    prev = err;
  }
  t.plot_x = "reg";
  t.plot_y = {"rel_error"};
  t.log_x = t.log_y = true;
  r.tables.push_back(t);
  fail_unless(monotone, r, "Tikhonov error not monotone in reg");
  fail_unless(prev < ic.tikhonov_target, r, "final Tikhonov error " + fmt(prev));
  r.metrics["tikhonov_final_error"] = prev;

  // adjoint consistency: Euclidean pairing on rough data, weighted pairing on data in the range
  std::mt19937_64 rng(c.seed);
  std::normal_distribution<double> n01;
  double worst = 0.0;
  Table a{"adjoint_consistency", {"pair", "euclidean_rel", "weighted_rel"}};
  for (int trial = 0; trial < ic.adjoint_pairs; ++trial) {
    Vec f(p.grid.size());
    for (int n = 0; n < p.grid.size(); ++n) f(n) = p.grid.on_boundary(n) ? 0.0 : n01(rng);
    ObservationData gdat = p.layout;
    for (int m = gdat.m0; m <= gdat.m1; ++m) {
      for (int n = 0; n < p.grid.size(); ++n) gdat.omega_part.level(m)(n) = gdat.omega[n] ? n01(rng) : 0.0;
    }
    for (int n = 0; n < p.grid.size(); ++n) gdat.theta_part(n) = n01(rng);
    const double e_lhs = dot(A.apply(f), gdat);
    const double e_rel = std::abs(e_lhs - f.dot(A.transpose(gdat))) / std::abs(e_lhs);

    const Vec f1 = random_fourier_source(p.grid, 10, rng);
    const Vec f2 = random_fourier_source(p.grid, 10, rng);
    const auto g2 = A.apply(f2);
    const double w_lhs = A.data_inner(A.apply(f1), g2);
    const double w_rel = std::abs(w_lhs - A.mass().dot(f1.cwiseProduct(A.adjoint(g2)))) / std::abs(w_lhs);
    a.add({double(trial), e_rel, w_rel});
    worst = std::max({worst, e_rel, w_rel});
  }
  r.tables.push_back(a);
  r.metrics["adjoint_max_rel"] = worst;
  fail_unless(worst <= ic.adjoint_tol, r, "adjoint mismatch " + fmt(worst));
  if (r.pass) r.detail = "direct, Tikhonov and adjoint checks inside tolerance";
  return r;
}

CheckResult check_lipschitz_stability(const Config& c) {
  const auto& ic = c.inverse_source;
  CheckResult r = start(8);

  std::vector<double> maxima;
  for (int nodes : ic.lipschitz_nodes) {
    const auto t = run_lipschitz(c, nodes);
    r.tables.push_back(lipschitz_table("lipschitz_" + std::to_string(nodes), t));
    fail_unless(std::isfinite(t.max_ratio), r, "non-finite max ratio on " + std::to_string(nodes) + " nodes");
    fail_unless(static_cast<int>(t.rows.size()) + t.skipped == ic.ensemble_size, r, "ensemble incomplete");
    maxima.push_back(t.max_ratio);
  }
  const double change = std::abs(maxima[1] - maxima[0]) / maxima[0];
  fail_unless(change <= ic.lipschitz_stability, r, "max ratio moves by " + fmt(100 * change) + "%");

  const auto p = source_problem(c, ic.lipschitz_nodes.front());
  const ObservationOperator A(p.grid, p.coeffs, p.R, p.layout);
  std::mt19937_64 rng(c.seed);
  const Vec f = random_fourier_source(p.grid, ic.mode_cap, rng);
  const double rho = lipschitz_ratio(A, f);
  double worst = 0.0;
  for (double scale : {-2.0, 1e-3, 1e4}) worst = std::max(worst, std::abs(lipschitz_ratio(A, scale * f) - rho) / rho);
  fail_unless(worst <= ic.homogeneity_tol, r, "homogeneity defect " + fmt(worst));

  r.metrics["max_ratio"] = maxima;
  r.metrics["grid_change"] = change;
  r.metrics["homogeneity_defect"] = worst;
  if (r.pass) r.detail = "max ratio " + fmt(maxima[0]) + " -> " + fmt(maxima[1]);
  return r;
}

CheckResult check_continuation_uniqueness(const Config& c) {
  const auto& q = c.continuation;
  CheckResult r = start(9);
  const auto s = continuation_setup(c);
  const Face& gamma = c.geometry.gamma;

  const auto zero = CauchyTrace::from_field(s.grid, gamma, SpaceTimeField(s.grid.size(), s.grid.Nt() + 1));
  const auto rz = qr_continue(s.prob, zero, s.opts);
  const double norm = spacetime_l2(s.grid, rz.u, s.prob.omega0, rz.m_lo, rz.m_hi);
  fail_unless(norm <= 10.0 * q.solver_tol, r, "||u_rec|| = " + fmt(norm) + " from zero data");

  // noise-free reconstruction, reported alongside
  const auto rc = qr_continue(s.prob, CauchyTrace::from_field(s.grid, gamma, s.truth), s.opts);
  SpaceTimeField e = rc.u;
  e.values -= s.truth.window(rc.m_lo, rc.m_hi).values;
  const double rel = spacetime_l2(s.grid, e, s.prob.omega0, rc.m_lo, rc.m_hi) /
                     spacetime_l2(s.grid, s.truth, s.prob.omega0, rc.m_lo, rc.m_hi);
  const auto cover = covering_check(s.prob, rc, s.truth);

  const int mid = (rc.m_lo + rc.m_hi) / 2;
  Table t{"continuation_profile", {"x", "u_true", "u_rec"}};
  for (int n = 0; n < s.grid.size(); ++n) {
    if (s.prob.omega0[n]) t.add({s.grid.coord(n, 0), s.truth.level(mid)(n), rc.u.level(mid)(n)});
  }
  t.plot_x = "x";
  t.plot_y = {"u_true", "u_rec"};
  r.tables.push_back(t);

  r.metrics["zero_data_norm"] = norm;
  r.metrics["clean_rel_error"] = rel;
  r.metrics["covering_consistent"] = cover.consistent;
  r.metrics["windows"] = rc.windows.size();
  r.metrics["thresholds"] = thresholds_json(s.prob.lambda);
  if (r.pass) r.detail = "zero data gives ||u_rec|| = " + fmt(norm) + "; clean error " + fmt(100 * rel) + "%";
  return r;
}

CheckResult check_holder_stability(const Config& c) {
  const auto& q = c.continuation;
  CheckResult r = start(10);
  const auto s = continuation_setup(c);

  const auto sw = run_noise_sweep(c, s);
  std::vector<double> D, err;
  for (const auto& row : sw.rows) {
    D.push_back(row.D);
    err.push_back(row.error);
  }
  const auto fit = holder_fit(D, err);
  r.tables.push_back(noise_table(sw));
  fail_unless(fit.kappa_hat > 0.0 && fit.kappa_hat <= q.kappa_max, r, "kappa_hat = " + fmt(fit.kappa_hat));
  fail_unless(fit.r2 >= q.r2_min, r, "R^2 = " + fmt(fit.r2));

  const auto tt = two_term_sweep(s.prob, s.truth, q.two_term_levels, q.two_term_s, c.seed + 1, s.opts);
  const auto tb = two_term_bound_check(tt.D, tt.measured, tt.M, tt.delta0, q.two_term_s);
  Table m{"two_term_measured", {"D"}};
  for (double sv : q.two_term_s) m.columns.push_back("s_" + fmt(sv));
  for (std::size_t i = 0; i < tt.D.size(); ++i) {
    std::vector<double> row{tt.D[i]};
    for (Eigen::Index j = 0; j < tt.measured.cols(); ++j) row.push_back(tt.measured(static_cast<Eigen::Index>(i), j));
    m.add(row);
  }
  r.tables.push_back(m);
  Table k{"two_term_knees", {"D", "s_star", "s_knee", "case2"}};
  for (const auto& row : tb.rows) k.add({row.D, row.s_star, row.s_knee, row.case2 ? 1.0 : 0.0});
  k.plot_x = "D";
  k.plot_y = {"s_star", "s_knee"};
  k.log_x = true;
  r.tables.push_back(k);
  fail_unless(tb.holds, r, "two-term bound violated with c = " + fmt(tb.c_fit));
  fail_unless(tb.worst_knee_ratio <= q.knee_factor, r, "knee ratio " + fmt(tb.worst_knee_ratio));

  const auto budget = make_budget(tt.M, tt.delta0, tb.c_fit);
  r.metrics["kappa_hat"] = fit.kappa_hat;
  r.metrics["C_hat"] = fit.C_hat;
  r.metrics["r2"] = fit.r2;
  r.metrics["decades"] = fit.decades;
  r.metrics["monotone"] = sw.monotone;
  r.metrics["M"] = tt.M;
  r.metrics["delta0"] = tt.delta0;
  r.metrics["C0"] = tb.C0;
  r.metrics["c_fit"] = tb.c_fit;
  r.metrics["kappa_from_c"] = budget.kappa;
  r.metrics["worst_knee_ratio"] = tb.worst_knee_ratio;
  r.metrics["thresholds"] = thresholds_json(s.prob.lambda);
  if (r.pass) r.detail = "kappa_hat = " + fmt(fit.kappa_hat) + ", R^2 = " + fmt(fit.r2) + ", knee ratio " + fmt(tb.worst_knee_ratio);
  return r;
}

CheckResult check_determinism(const Config& c) {
  CheckResult r = start(11);
  const int nodes = c.inverse_source.lipschitz_nodes.front();
  const auto s = continuation_setup(c);

  std::string first[2];
  for (int run = 0; run < 2; ++run) {
    const auto lt = lipschitz_table("lipschitz_" + std::to_string(nodes), run_lipschitz(c, nodes));
    const auto nt = noise_table(run_noise_sweep(c, s));
    const std::string text[2] = {to_csv(lt), to_csv(nt)};
    for (int i = 0; i < 2; ++i) {
      if (run == 0) {
        first[i] = text[i];
      } else {
        fail_unless(text[i] == first[i], r, (i == 0 ? lt.name : nt.name) + " differs between runs");
      }
    }
    if (run == 1) {
      r.tables.push_back(lt);
      r.tables.push_back(nt);
    }
  }
  r.metrics["compared_tables"] = 2;
  if (r.pass) r.detail = "Lipschitz ensemble and noise sweep tables are byte-identical across two runs";
  return r;
}

}  // namespace carlab::cli
