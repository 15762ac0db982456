#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>

#include "carlab/forward.hpp"

using namespace carlab;

namespace {

const double pi = std::numbers::pi;

Vec sine(const Grid& g, int k) {
  Vec v(g.size());
  for (int n = 0; n < g.size(); ++n) v(n) = g.on_boundary(n) ? 0.0 : std::sin(k * pi * g.coord(n, 0));
  return v;
}

double l2(const Grid& g, const Vec& v) { return sobolev_norm(g, v, 0, Mask(g.size(), 1)); }

}  // namespace

TEST_SUITE("forward") {

TEST_CASE("free decay of the first mode") {
  const Grid g = build_grid(1, {{0.0, 1.0}}, {101}, 0.01, 400);
  SourceModel none;
  const auto y = solve_forward(g, CoefficientSet{}, none, sine(g, 1));
  const Vec exact = std::exp(-std::pow(pi, 4) * 0.01) * sine(g, 1);
  CHECK(l2(g, y.level(g.Nt()) - exact) / l2(g, exact) < 5e-3);
}

TEST_CASE("zero data gives zero solution") {
  const Grid g = build_grid(1, {{0.0, 1.0}}, {41}, 0.1, 20);
  const auto src = SourceModel::separable(g, Vec::Ones(41), Vec::Zero(41), 0.5);
  const auto y = solve_forward(g, CoefficientSet{}, src, Vec::Zero(41));
  CHECK(y.values.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("single-mode Duhamel response") {
  const Grid g = build_grid(1, {{0.0, 1.0}}, {101}, 0.02, 800);
  const auto src = SourceModel::separable(g, Vec::Ones(g.size()), sine(g, 1), 0.5);
  const auto y = solve_forward(g, CoefficientSet{}, src, Vec::Zero(g.size()));
  const double l4 = std::pow(pi, 4);
  for (int m : {200, 400, 800}) {
    const Vec exact = (1.0 - std::exp(-l4 * g.time(m))) / l4 * sine(g, 1);
    CHECK(l2(g, y.level(m) - exact) / l2(g, exact) < 1e-2);
  }
}

TEST_CASE("contraction without forcing") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n01;
  const Grid g = build_grid(1, {{0.0, 1.0}}, {61}, 0.05, 50);
  Vec y0(g.size());
  for (int n = 0; n < g.size(); ++n) y0(n) = g.on_boundary(n) ? 0.0 : n01(rng);
  const auto y = solve_forward(g, CoefficientSet{}, SourceModel{}, y0);
  for (int m = 0; m < g.Nt(); ++m) CHECK(y.level(m + 1).norm() <= y.level(m).norm());
}

TEST_CASE("linearity in the source") {
  const Grid g = build_grid(2, {{0, 1}, {0, 1}}, {13, 13}, 0.05, 20);
  const auto coeffs = CoefficientSet::constant(g, {{MultiIndex{{1, 0}}, 0.3}, {MultiIndex{{0, 0}}, -0.5}});
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Vec f1(g.size()), f2(g.size()), R(g.size());
  for (int n = 0; n < g.size(); ++n) {
    f1(n) = u(rng);
    f2(n) = u(rng);
    R(n) = 1.0 + 0.5 * g.coord(n, 0);
  }
  const Vec z = Vec::Zero(g.size());
  const auto y1 = solve_forward(g, coeffs, SourceModel::separable(g, R, f1, 1.0), z);
  const auto y2 = solve_forward(g, coeffs, SourceModel::separable(g, R, f2, 1.0), z);
  const auto y12 = solve_forward(g, coeffs, SourceModel::separable(g, R, f1 + f2, 1.0), z);
  CHECK((y12.values - y1.values - y2.values).norm() <= 1e-12 * y12.values.norm());
  CHECK(navier_trace_residual(g, y12) == 0.0);
}

TEST_CASE("transposed solve is the adjoint of the zero-start map") {
  const Grid g = build_grid(1, {{0.0, 1.0}}, {31}, 0.05, 16);
  const auto coeffs = CoefficientSet::constant(g, {{MultiIndex{{1, 0}}, 0.7}});
  const ForwardSolver solver(g, coeffs);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n01;
  SpaceTimeField load(g.size(), g.Nt() + 1), w(g.size(), g.Nt() + 1);
  load.values = Eigen::MatrixXd::NullaryExpr(g.size(), g.Nt() + 1, [&] { return n01(rng); });
  w.values = Eigen::MatrixXd::NullaryExpr(g.size(), g.Nt() + 1, [&] { return n01(rng); });
  const auto y = solver.solve(Vec::Zero(g.size()), load);
  const auto p = solver.solve_transpose(w);
  double lhs = 0.0, rhs = 0.0;
  for (int m = 1; m <= g.Nt(); ++m) {
    lhs += w.level(m).dot(y.level(m));
    for (int n = 0; n < g.size(); ++n) {
      if (!g.on_boundary(n)) rhs += g.dt() * load.level(m)(n) * p.level(m)(n);
    }
  }
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-11));
}

TEST_CASE("positivity of R is enforced at the requested level") {
  const Grid g = build_grid(1, {{0.0, 1.0}}, {21}, 1.0, 10);
  Vec R = Vec::Ones(21);
  R(7) = 0.01;
  const auto src = SourceModel::separable(g, R, Vec::Ones(21), 0.5);
  try {
    src.check_positivity(g, 5);
    FAIL("expected rejection");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("node 7") != std::string::npos);
  }
}

TEST_CASE("initial state must satisfy the boundary condition") {
  const Grid g = build_grid(1, {{0.0, 1.0}}, {21}, 1.0, 10);
  CHECK_THROWS_AS(solve_forward(g, CoefficientSet{}, SourceModel{}, Vec::Ones(21)), Error);
}

TEST_CASE("coarse modal reproduction") {
  const Grid g = build_grid(1, {{0.0, 1.0}}, {17}, 0.01, 2000);
  const auto t = manufactured_convergence({g, g.with_time(0.01, 4000), g.with_time(0.01, 8000)});
  CHECK(t.rows[0].rel_error < 0.05);
}

}  // TEST_SUITE
