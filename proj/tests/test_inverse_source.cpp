#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>

#include "carlab/inverse_source.hpp"

using namespace carlab;

namespace {

const double pi = std::numbers::pi;

Vec sine(const Grid& g, int k) {
  Vec v(g.size());
  for (int n = 0; n < g.size(); ++n) v(n) = g.on_boundary(n) ? 0.0 : std::sin(k * pi * g.coord(n, 0));
  return v;
}

double l2(const Grid& g, const Vec& v) { return sobolev_norm(g, v, 0, Mask(g.size(), 1)); }

/// R(x, t) = 1 + 0.25 x cos(3 t), bounded below by 0.75.
SpaceTimeField varying_R(const Grid& g) {
  SpaceTimeField R(g.size(), g.Nt() + 1);
  for (int m = 0; m <= g.Nt(); ++m) {
    for (int n = 0; n < g.size(); ++n) R.level(m)(n) = 1.0 + 0.25 * g.coord(n, 0) * std::cos(3.0 * g.time(m));
  }
  return R;
}

Mask omega_mask(const Grid& g) {
  SubdomainSpec spec;
  spec.omega = Box{{0.4}, {0.6}};
  return build_subdomains(g, spec).omega;
}

struct Problem {
  Grid grid;
  CoefficientSet coeffs;
  SourceModel source;
  ObservationData layout;
};

Problem line_problem(int nodes, int Nt, bool with_coeffs) {
  Problem p;
  p.grid = build_grid(1, {{0.0, 1.0}}, {nodes}, 0.1, Nt);
  if (with_coeffs) {
    p.coeffs = CoefficientSet::constant(p.grid, {{MultiIndex{{2, 0}}, 0.3}, {MultiIndex{{0, 0}}, 2.0}});
  }
  p.source.R = varying_R(p.grid);
  p.source.r0 = 0.5;
  p.layout = observation_layout(p.grid, omega_mask(p.grid), 0.05, 0.025);
  return p;
}

}  // namespace

TEST_SUITE("inverse_source") {

TEST_CASE("observation window validation") {
  const Grid g = build_grid(1, {{0.0, 1.0}}, {41}, 0.1, 100);
  const auto d = observation_layout(g, omega_mask(g), 0.05, 0.025);
  CHECK(d.m_theta == 50);
  CHECK(d.m0 == 25);
  CHECK(d.m1 == 75);
  CHECK_THROWS_AS(observation_layout(g, omega_mask(g), 0.05, 0.05), Error);
  CHECK_THROWS_AS(observation_layout(g, omega_mask(g), 0.0505, 0.02), Error);
  CHECK_THROWS_AS(observation_layout(g, Mask(g.size(), 0), 0.05, 0.02), Error);
  auto bad = d;
  bad.omega_part.level(30)(0) = 1.0;  // node 0 is outside omega
  CHECK_THROWS_AS(bad.validate(g), Error);
}

TEST_CASE("direct formula recovers sin(pi x) at 201 nodes") {
  const Grid g = build_grid(1, {{0.0, 1.0}}, {201}, 0.1, 200);
  const auto src = SourceModel::separable(g, Vec::Ones(g.size()), sine(g, 1), 0.5);
  const auto y = solve_forward(g, CoefficientSet{}, src, Vec::Zero(g.size()));
  const Vec f = direct_formula_reconstruct(g, y, CoefficientSet{}, src, 0.05);
  CHECK(l2(g, f - src.f) / l2(g, src.f) < 0.05);
}

TEST_CASE("direct formula error is first order in dt") {
  std::vector<double> errs;
  for (int Nt : {100, 200, 400}) {
    const Grid g = build_grid(1, {{0.0, 1.0}}, {101}, 0.1, Nt);
    const auto coeffs = CoefficientSet::constant(g, {{MultiIndex{{1, 0}}, 0.5}});
    SourceModel src;
    src.R = varying_R(g);
    src.f = sine(g, 1) + 0.3 * sine(g, 2);
    src.r0 = 0.5;
    const auto y = solve_forward(g, coeffs, src, Vec::Zero(g.size()));
    const Vec f = direct_formula_reconstruct(g, y, coeffs, src, 0.05);
    errs.push_back(l2(g, f - src.f) / l2(g, src.f));
  }
  CHECK(errs[1] < errs[0]);
  CHECK(errs[2] < errs[1]);
  CHECK(errs[0] / errs[1] == doctest::Approx(2.0).epsilon(0.2));
}

TEST_CASE("direct formula on zero data and the positivity guard") {
  const Grid g = build_grid(1, {{0.0, 1.0}}, {41}, 0.1, 40);
  Vec R = Vec::Ones(g.size());
  const auto src = SourceModel::separable(g, R, Vec::Zero(g.size()), 0.5);
  const auto y = solve_forward(g, CoefficientSet{}, src, Vec::Zero(g.size()));
  CHECK(direct_formula_reconstruct(g, y, CoefficientSet{}, src, 0.05).cwiseAbs().maxCoeff() == 0.0);
  R(13) = 0.1;
  const auto bad = SourceModel::separable(g, R, Vec::Zero(g.size()), 0.5);
  try {
    direct_formula_reconstruct(g, y, CoefficientSet{}, bad, 0.05);
    FAIL("expected rejection");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("node 13") != std::string::npos);
  }
}

TEST_CASE("data inner product matches the data norm") {
  const auto p = line_problem(61, 60, true);
  const ObservationOperator A(p.grid, p.coeffs, p.source.R, p.layout);
  const auto d = A.apply(sine(p.grid, 1) + sine(p.grid, 3));
  CHECK(A.data_inner(d, d) == doctest::Approx(std::pow(A.data_norm(d), 2)).epsilon(1e-10));
}

TEST_CASE("adjoint consistency on random pairs") {
  const auto p = line_problem(61, 60, true);
  const ObservationOperator A(p.grid, p.coeffs, p.source.R, p.layout);
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n01;
  for (int trial = 0; trial < 5; ++trial) {
    // Euclidean pairing with rough data
    Vec f(p.grid.size());
    for (int n = 0; n < p.grid.size(); ++n) f(n) = p.grid.on_boundary(n) ? 0.0 : n01(rng);
    ObservationData g = p.layout;
    for (int m = g.m0; m <= g.m1; ++m) {
      for (int n = 0; n < p.grid.size(); ++n) g.omega_part.level(m)(n) = g.omega[n] ? n01(rng) : 0.0;
    }
    for (int n = 0; n < p.grid.size(); ++n) g.theta_part(n) = n01(rng);
    const double e_lhs = dot(A.apply(f), g);
    const double e_rhs = f.dot(A.transpose(g));
    CHECK(std::abs(e_lhs - e_rhs) <= 1e-8 * std::abs(e_lhs));

    // weighted pairing; the H^4 Gram of white noise is dominated by
    // cancellation, so g is drawn from the range of A (smooth data)
    const Vec f1 = random_fourier_source(p.grid, 10, rng);
    const Vec f2 = random_fourier_source(p.grid, 10, rng);
    const auto g2 = A.apply(f2);
    const double w_lhs = A.data_inner(A.apply(f1), g2);
    const double w_rhs = A.mass().dot(f1.cwiseProduct(A.adjoint(g2)));
    CHECK(std::abs(w_lhs - w_rhs) <= 1e-8 * std::abs(w_lhs));
  }
}

TEST_CASE("zero observations give the zero reconstruction") {
  const auto p = line_problem(61, 60, false);
  const ObservationOperator A(p.grid, p.coeffs, p.source.R, p.layout);
  for (double reg : {1e-2, 1e-6}) {
    const auto res = tikhonov_reconstruct(A, p.layout, {reg, 1e-10, 500});
    CHECK(res.f.cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("Tikhonov reg sweep on noise-free data") {
  const auto p = line_problem(201, 200, true);
  const ObservationOperator A(p.grid, p.coeffs, p.source.R, p.layout);
  const Vec f_true = sine(p.grid, 1);
  const auto obs = A.apply(f_true);
  double prev_err = 1e300, prev_norm = 0.0;
  for (double reg : {1e-2, 1e-4, 1e-6, 1e-8, 1e-10}) {
    const auto res = tikhonov_reconstruct(A, obs, {reg, 1e-12, 2000});
    const double err = l2(p.grid, res.f - f_true) / l2(p.grid, f_true);
    const double nrm = l2(p.grid, res.f);
    CHECK(err <= prev_err * (1.0 + 1e-9));
    CHECK(nrm >= prev_norm * (1.0 - 1e-9));
    prev_err = err;
    prev_norm = nrm;
  }
  CHECK(prev_err < 0.1);
}

TEST_CASE("Tikhonov commutes with scaling of the observations") {
  const auto p = line_problem(61, 60, true);
  const ObservationOperator A(p.grid, p.coeffs, p.source.R, p.layout);
  const auto obs = A.apply(sine(p.grid, 2));
  const auto a = tikhonov_reconstruct(A, obs, {1e-6, 1e-12, 2000});
  for (double c : {0.5, -3.0}) {
    auto scaled = obs;
    scaled.omega_part.values *= c;
    scaled.theta_part *= c;
    const auto b = tikhonov_reconstruct(A, scaled, {1e-6, 1e-12, 2000});
    // powers of two scale exactly; otherwise agreement to the solver tolerance
    const double tol = c == 0.5 ? 0.0 : 1e-6;
    CHECK((b.f - c * a.f).norm() <= tol * b.f.norm());
  }
}

TEST_CASE("noisy data: warning at reg = 0 and error proportional to the noise") {
  const auto p = line_problem(101, 100, true);
  const ObservationOperator A(p.grid, p.coeffs, p.source.R, p.layout);
  const Vec f_true = sine(p.grid, 1);
  SourceModel src = p.source;
  src.f = f_true;
  const auto y = solve_forward(p.grid, p.coeffs, src, Vec::Zero(p.grid.size()));
  const auto clean = observe(p.grid, y, p.layout);
  const auto obs = observe(p.grid, y, p.layout, 0.01, 99);
  CHECK(obs.noise_level == 0.01);
  auto diff = obs;
  diff.omega_part.values -= clean.omega_part.values;
  diff.theta_part -= clean.theta_part;
  CHECK(A.data_norm(diff) == doctest::Approx(0.01 * A.data_norm(clean)).epsilon(1e-10));
  const auto r0 = tikhonov_reconstruct(A, obs, {0.0, 1e-10, 5000});
  CHECK(!r0.warnings.empty());
  double best = 1e300;
  for (double reg : {1e-1, 1e-2, 1e-4, 1e-6, 1e-8}) {
    const auto res = tikhonov_reconstruct(A, obs, {reg, 1e-10, 5000});
    CHECK(res.warnings.empty());
    best = std::min(best, l2(p.grid, res.f - f_true) / l2(p.grid, f_true));
  }
  // the Lipschitz constant of this configuration is O(1)
  CHECK(best / 0.01 < 5.0);
}

TEST_CASE("Lipschitz ratio: zero source skipped and homogeneity") {
  const auto p = line_problem(61, 60, true);
  const ObservationOperator A(p.grid, p.coeffs, p.source.R, p.layout);
  CHECK(std::isnan(lipschitz_ratio(A, Vec::Zero(p.grid.size()))));
  std::mt19937_64 rng(3);
  const Vec f = random_fourier_source(p.grid, 6, rng);
  const double r = lipschitz_ratio(A, f);
  for (double c : {-2.0, 1e-3, 1e4}) CHECK(lipschitz_ratio(A, c * f) == doctest::Approx(r).epsilon(1e-10));
}

TEST_CASE("random sources are grid independent") {
  std::mt19937_64 a(5), b(5);
  const Grid g1 = build_grid(1, {{0.0, 1.0}}, {101}, 0.1, 10);
  const Grid g2 = build_grid(1, {{0.0, 1.0}}, {201}, 0.1, 10);
  const Vec f1 = random_fourier_source(g1, 8, a);
  const Vec f2 = random_fourier_source(g2, 8, b);
  for (int n = 0; n < g1.size(); ++n) CHECK(f1(n) == doctest::Approx(f2(2 * n)).epsilon(1e-12));
}

TEST_CASE("Lipschitz ensemble is finite and grid stable") {
  std::vector<double> maxima;
  for (int nodes : {101, 201}) {
    const auto p = line_problem(nodes, 200, true);
    const ObservationOperator A(p.grid, p.coeffs, p.source.R, p.layout);
    const auto t = lipschitz_ensemble(20, A, 8, 2024);
    CHECK(t.rows.size() == 20);
    CHECK(t.skipped == 0);
    CHECK(std::isfinite(t.max_ratio));
    CHECK(t.median_ratio <= t.max_ratio);
    maxima.push_back(t.max_ratio);
  }
  CHECK(std::abs(maxima[1] - maxima[0]) < 0.25 * maxima[0]);
}

}  // TEST_SUITE
