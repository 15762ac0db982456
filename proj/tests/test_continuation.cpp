#include "doctest.h"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>

#include "carlab/continuation.hpp"
#include "carlab/forward.hpp"

using namespace carlab;

namespace {

constexpr double kPi = std::numbers::pi;
const Face kGamma{0, 0};

Grid line(int nodes = 101, double T = 0.02, int Nt = 200) {
  return build_grid(1, {{0.0, 1.0}}, {nodes}, T, Nt);
}

CoefficientSet test_coeffs(const Grid& g) {
  return CoefficientSet::constant(g, {{MultiIndex{{2, 0}}, 0.3}, {MultiIndex{{0, 0}}, 1.0}});
}

/// Discrete solution from three sine modes; Navier data on both ends.
SpaceTimeField truth(const Grid& g) {
  Vec u0(g.size());
  for (int k = 0; k < g.size(); ++k) {
    const double x = g.coord(k, 0);
    u0(k) = g.on_boundary(k) ? 0.0
                             : std::sin(kPi * x) + 0.5 * std::sin(2 * kPi * x) +
                                   0.2 * std::sin(3 * kPi * x);
  }
  return solve_forward(g, test_coeffs(g), SourceModel{}, u0);
}

ContinuationProblem problem(const Grid& g) {
  return make_continuation_problem(g, test_coeffs(g), kGamma, 0.5, Box{{0.0}, {0.3}}, 0.004, 0.002);
}

double rel_error(const ContinuationProblem& p, const QrResult& r, const SpaceTimeField& u) {
  SpaceTimeField e = r.u;
  e.values -= u.window(r.m_lo, r.m_hi).values;
  return spacetime_l2(p.grid, e, p.omega0, r.m_lo, r.m_hi) /
         spacetime_l2(p.grid, u, p.omega0, r.m_lo, r.m_hi);
}

}  // namespace

TEST_SUITE("continuation") {

TEST_CASE("traces and the four layers determine each other") {
  const Grid g = line(41, 0.02, 20);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n01;
  SpaceTimeField u(g.size(), g.Nt() + 1);
  for (int m = 0; m <= g.Nt(); ++m) {
    for (int k = 0; k < g.size(); ++k) u.values(k, m) = n01(rng);
  }
  const auto tr = CauchyTrace::from_field(g, kGamma, u);
  REQUIRE(tr.nodes.size() == 1);
  for (int j = 0; j < 4; ++j) {
    const Eigen::MatrixXd L = tr.layer(g, j);
    for (int m = 0; m <= g.Nt(); ++m) CHECK(L(0, m) == doctest::Approx(u.values(j, m)).epsilon(1e-10));
  }
  CHECK(tr.data_size(g) > 0.0);
  const SpaceTimeField zero(g.size(), g.Nt() + 1);
  CHECK(CauchyTrace::from_field(g, kGamma, zero).data_size(g) == 0.0);
}

TEST_CASE("cubic traces are exact for cubics") {
  const Grid g = line(51, 0.02, 10);
  SpaceTimeField u(g.size(), g.Nt() + 1);
  for (int k = 0; k < g.size(); ++k) {
    const double x = g.coord(k, 0);
    u.values.row(k).setConstant(1.0 - 2.0 * x + 3.0 * x * x - 4.0 * x * x * x);
  }
  const auto tr = CauchyTrace::from_field(g, kGamma, u);
  // the outward normal at x = 0 is -x, so odd derivatives change sign
  CHECK(tr.g[0](0, 3) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(tr.g[1](0, 3) == doctest::Approx(2.0).epsilon(1e-8));
  CHECK(tr.g[2](0, 3) == doctest::Approx(6.0).epsilon(1e-8));
  CHECK(tr.g[3](0, 3) == doctest::Approx(24.0).epsilon(1e-6));
}

TEST_CASE("extension of zero traces is zero") {
  const Grid g = line();
  const auto tr = CauchyTrace::from_field(g, kGamma, SpaceTimeField(g.size(), g.Nt() + 1));
  CHECK(extend_cauchy(tr, g, 0.25).values.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("unit g0 extends to the cut-off with zero normal derivative") {
  const Grid g = line();
  const double h = g.spacing(0);
  auto tr = CauchyTrace::from_field(g, kGamma, SpaceTimeField(g.size(), g.Nt() + 1));
  tr.g[0].setOnes();
  const auto ut = extend_cauchy(tr, g, 0.25);
  const Vec c = ut.level(7);
  CHECK(c(0) == 1.0);
  // one-sided second-order difference at Gamma
  CHECK(std::abs((-3.0 * c(0) + 4.0 * c(1) - c(2)) / (2.0 * h)) < 1e-12);
  for (int k = 0; k < g.size(); ++k) {
    CHECK(c(k) >= 0.0);
    CHECK(c(k) <= 1.0);
    if (g.coord(k, 0) >= 0.25) CHECK(c(k) == 0.0);
  }
  CHECK(c(5) < 1.0);
  CHECK(c(20) > 0.0);
}

TEST_CASE("Taylor extension of a decaying mode matches to fifth order near Gamma") {
  const Grid g = line(401, 0.01, 10);
  const int k = 2;
  const double w = k * kPi;
  auto tr = CauchyTrace::from_field(g, kGamma, SpaceTimeField(g.size(), g.Nt() + 1));
  for (int m = 0; m <= g.Nt(); ++m) {
    const double e = std::exp(-std::pow(w, 4) * g.time(m));
    tr.g[1](0, m) = -w * e;
    tr.g[3](0, m) = w * w * w * e;
  }
  const auto ut = extend_cauchy(tr, g, 0.25);
  const int m = 4;
  const double e = std::exp(-std::pow(w, 4) * g.time(m));
  for (int i = 1; i <= 3; ++i) {
    const double r = g.coord(i, 0);
    const double err = std::abs(ut.level(m)(i) - e * std::sin(w * r));
    CHECK(err <= 1.0001 * e * std::pow(w * r, 5) / 120.0);
  }
}

TEST_CASE("zero extension gate reports the offending trace") {
  const Grid g = line();
  const auto ext = extend_domain(g, kGamma, 0.5);
  SpaceTimeField v(g.size(), 3);
  CHECK(zero_extend(v, g, ext, 1e-8).values.cwiseAbs().maxCoeff() == 0.0);
  for (int k = 0; k < g.size(); ++k) {
    const double x = g.coord(k, 0);
    v.values.row(k).setConstant(0.5e-2 * x * x);
  }
  CHECK(max_trace(g, kGamma, v) == doctest::Approx(1e-2).epsilon(1e-6));
  try {
    zero_extend(v, g, ext, 1e-8);
    FAIL("expected rejection");
  } catch (const Error& err) {
    const std::string msg = err.what();
    CHECK(msg.find("d_nu^2") != std::string::npos);
    CHECK(msg.find("0.01") != std::string::npos);
  }
}

TEST_CASE("zero extension keeps the biharmonic residual O(h^2) across Gamma") {
  std::vector<double> errs;
  for (int n : {101, 201}) {
    const Grid g = line(n, 0.02, 8);
    const auto ext = extend_domain(g, kGamma, 0.5);
    SpaceTimeField v(g.size(), 3);
    for (int k = 0; k < g.size(); ++k) v.values.row(k).setConstant(std::pow(g.coord(k, 0), 6));
    // the cubic fit sees x^6 as a g_3 of size O(h^3); the far end is irrelevant here
    const auto vx = zero_extend(v, g, ext, 1e-2);
    const Vec Bv = biharmonic_navier_matrix(ext.grid) * vx.level(1);
    const double h = g.spacing(0);
    double worst = 0.0;
    for (int k = 0; k < ext.grid.size(); ++k) {
      const double x = ext.grid.coord(k, 0);
      if (std::abs(x) > 2.5 * h) continue;
      const double exact = x > 0.0 ? 360.0 * x * x : 0.0;
      worst = std::max(worst, std::abs(Bv(k) - exact));
    }
    errs.push_back(worst / (h * h));
  }
  CHECK(errs[0] > 0.0);
  CHECK(errs[1] == doctest::Approx(errs[0]).epsilon(0.05));
}

TEST_CASE("time window must satisfy eps > tau") {
  const Grid g = line();
  CHECK_THROWS_AS(make_continuation_problem(g, test_coeffs(g), kGamma, 0.5, Box{{0.0}, {0.3}}, 0.002,
                                            0.004),
                  Error);
  CHECK_THROWS_AS(make_continuation_problem(g, test_coeffs(g), kGamma, 0.5, Box{{0.0}, {0.3}}, 0.002,
                                            0.002),
                  Error);
  const auto p = make_continuation_problem(g, test_coeffs(g), kGamma, 0.5, Box{{0.0}, {0.3}}, 0.004, 0.0);
  CHECK(p.tau == 0.002);
  CHECK_THROWS_AS(window_centres(0.02, 0.002, 0.002), Error);
}

TEST_CASE("window centres cover (eps, T - eps) with quarter windows") {
  const double T = 0.02, eps = 0.004, tau = 0.002;
  const auto c = window_centres(T, eps, tau);
  REQUIRE(c.size() >= 2);
  CHECK(c.front() - 0.25 * tau == doctest::Approx(eps));
  CHECK(c.back() + 0.25 * tau == doctest::Approx(T - eps));
  for (std::size_t i = 0; i + 1 < c.size(); ++i) CHECK(c[i + 1] - c[i] <= 0.5 * tau + 1e-15);
  CHECK(window_centres(0.02, 0.0095, 0.004).size() == 1);
}

TEST_CASE("threshold ordering holds at the selected lambda") {
  const auto p = problem(line());
  CHECK(p.lambda.thresholds.ordered());
  CHECK(p.lambda.thresholds.delta0 > 0.0);
}

TEST_CASE("noise-free reconstruction on Omega0") {
  const Grid g = line();
  const auto p = problem(g);
  const auto u = truth(g);
  const auto res = qr_continue(p, CauchyTrace::from_field(g, kGamma, u), QrOptions{});
  CHECK(rel_error(p, res, u) < 0.1);
  CHECK(res.u.first_level == res.m_lo);
  CHECK(g.time(res.m_lo) >= p.epsilon - 1e-12);
  CHECK(g.time(res.m_hi) <= g.T() - p.epsilon + 1e-12);
  const auto cover = covering_check(p, res, u);
  CHECK(cover.overlaps == static_cast<int>(res.windows.size()) - 1);
  CHECK(cover.consistent);
  // every assembled level comes from exactly one window
  int assigned = 0;
  for (const auto& w : res.windows) {
    if (w.q_first >= 0) assigned += w.q_last - w.q_first + 1;
  }
  CHECK(assigned == res.m_hi - res.m_lo + 1);
}

TEST_CASE("zero Cauchy data reconstructs zero") {
  const Grid g = line();
  const auto p = problem(g);
  const auto tr = CauchyTrace::from_field(g, kGamma, SpaceTimeField(g.size(), g.Nt() + 1));
  const auto res = qr_continue(p, tr, QrOptions{});
  CHECK(res.u.values.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("traces from another grid are rejected") {
  const Grid g = line();
  const auto p = problem(g);
  const Grid other = line(101, 0.02, 100);
  const auto tr = CauchyTrace::from_field(other, kGamma, SpaceTimeField(other.size(), other.Nt() + 1));
  CHECK_THROWS_AS(qr_continue(p, tr, QrOptions{}), Error);
}

TEST_CASE("trace noise hits the requested data size") {
  const Grid g = line();
  const auto clean = CauchyTrace::from_field(g, kGamma, truth(g));
  const auto noisy = add_trace_noise(clean, g, 0.125, 5);
  CHECK((noisy - clean).data_size(g) == doctest::Approx(0.125).epsilon(1e-12));
  const auto again = add_trace_noise(clean, g, 0.125, 5);
  CHECK((again.g[3] - noisy.g[3]).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("balance formula") {
  const auto b1 = balance_s(2.0, 2.0, 1.0, 1.0);
  CHECK(b1.case2);
  CHECK(b1.s_star == 0.0);
  const double c = 0.7, d0 = 1.3, D = 0.01;
  CHECK(balance_s(D, std::exp((c + d0) / 2.0) * D, c, d0).s_star == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(balance_s(1.0, 1e3, 1.0, 1.0).s_star == doctest::Approx(6.907755).epsilon(1e-6));
  CHECK_THROWS_AS(balance_s(0.0, 1.0, 1.0, 1.0), Error);
  const auto budget = make_budget(1.0, 1.0, 3.0);
  CHECK(budget.kappa == doctest::Approx(0.25));
  // balanced bound equals the Hoelder form 2 M^{1-kappa} D^kappa
  const double M = 10.0, s = balance_s(D, M, c, d0).s_star;
  const double kappa = d0 / (c + d0);
  const double bound = std::sqrt(std::exp(c * s) * D * D + std::exp(-s * d0) * M * M);
  CHECK(bound == doctest::Approx(std::sqrt(2.0) * std::pow(M, 1 - kappa) * std::pow(D, kappa)));
}

TEST_CASE("Hoelder fit on synthetic power laws") {
  std::vector<double> D, e1, e2;
  for (int i = 0; i < 6; ++i) {
    D.push_back(std::pow(10.0, -6 + i));
    e1.push_back(3.0 * std::sqrt(D.back()));
    e2.push_back(0.2 * D.back());
  }
  const auto f1 = holder_fit(D, e1);
  CHECK(f1.kappa_hat == doctest::Approx(0.5).epsilon(0.04));
  CHECK(f1.C_hat == doctest::Approx(3.0));
  CHECK(f1.r2 == doctest::Approx(1.0));
  CHECK(holder_fit(D, e2).kappa_hat == doctest::Approx(1.0));
  const std::vector<double> narrow{1.0, 2.0, 4.0, 8.0, 16.0};
  CHECK_THROWS_AS(holder_fit(narrow, narrow), Error);
  CHECK_THROWS_AS(holder_fit({1e-6, 1e-3, 1.0}, {1.0, 1.0, 1.0}), Error);
}

TEST_CASE("two-term check on a synthetic table") {
  const double M = 3.0, d0 = 50.0, c = 400.0;
  const std::vector<double> s{0.0, 0.005, 0.01, 0.02};
  std::vector<double> D{1e-6, 1e-5, 1e-4, 1e-3};
  Eigen::MatrixXd meas(4, 4);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      meas(i, j) = 0.5 * (std::exp(c * s[j]) * D[i] * D[i] + std::exp(-s[j] * d0) * 1e-6 * M * M);
    }
  }
  const auto t = two_term_bound_check(D, meas, M, d0, s);
  CHECK(t.holds);
  CHECK(t.C0 == 1.0);
  CHECK(t.c_fit <= c);
  // the knee is the minimiser of the fitted bound: brute-force oracle
  for (const auto& r : t.rows) {
    CHECK_FALSE(r.case2);
    double best = 0.0, best_val = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 200000; ++i) {
      const double sv = 2.0 * i / 200000.0;
      const double val = std::exp(t.c_fit * sv) * r.D * r.D + std::exp(-sv * d0) * M * M;
      if (val < best_val) {
        best_val = val;
        best = sv;
      }
    }
    CHECK(r.s_knee == doctest::Approx(best).epsilon(1e-4));
  }
  // D -> 0: only the a-priori term is left
  for (int j = 0; j < 4; ++j) CHECK(meas(0, j) <= std::exp(-s[j] * d0) * M * M);
  CHECK_THROWS_AS(two_term_bound_check(D, meas.topRows(2), M, d0, s), Error);
}

TEST_CASE("J norm of a polynomial") {
  const Grid g = line(201, 0.02, 20);
  // w = x^2 (1 + t): J = x^2(1+t) + 2x(1+t) + 2(1+t) + 0 + 0 + x^2
  SpaceTimeField w(g.size(), g.Nt() + 1);
  for (int m = 0; m <= g.Nt(); ++m) {
    for (int k = 0; k < g.size(); ++k) w.values(k, m) = std::pow(g.coord(k, 0), 2) * (1.0 + g.time(m));
  }
  Mask region(g.size(), 0);
  for (int k = 0; k < g.size(); ++k) region[k] = g.coord(k, 0) >= 0.2 && g.coord(k, 0) <= 0.6;
  const Vec wx = quadrature_weights(g, region);
  const Vec wt = time_weights(g.dt(), 0, g.Nt());
  double ref = 0.0;
  for (int m = 0; m <= g.Nt(); ++m) {
    const double a = 1.0 + g.time(m);
    for (int k = 0; k < g.size(); ++k) {
      const double x = g.coord(k, 0);
      const double J = x * x * a + 2 * x * a + 2 * a + x * x;
      ref += wt(m) * wx(k) * J * J;
    }
  }
  CHECK(j_norm(g, w, region, 0, g.Nt()) == doctest::Approx(std::sqrt(ref)).epsilon(1e-6));
}

TEST_CASE("noise sweep error grows with the noise and fits a Hoelder law") {
  const Grid g = line();
  const auto p = problem(g);
  const auto u = truth(g);
  const std::vector<double> levels{1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1};
  const auto sw = noise_sweep(p, u, levels, 1, 17, QrOptions{});
  CHECK(sw.monotone);
  CHECK(sw.M > 0.0);
  std::vector<double> D, err;
  for (const auto& r : sw.rows) {
    D.push_back(r.D);
    err.push_back(r.error);
  }
  const auto fit = holder_fit(D, err);
  CHECK(fit.kappa_hat > 0.0);
  CHECK(fit.kappa_hat <= 1.05);
  CHECK(fit.r2 >= 0.9);
}

TEST_CASE("two-term table from reconstructions") {
  const Grid g = line();
  const auto p = problem(g);
  const auto u = truth(g);
  const std::vector<double> s{0.0, 0.0025, 0.005, 0.01, 0.02};
  const auto sw = two_term_sweep(p, u, {1e-6, 1e-5, 1e-4, 1e-3, 1e-2}, s, 23, QrOptions{});
  const auto t = two_term_bound_check(sw.D, sw.measured, sw.M, sw.delta0, s);
  CHECK(t.holds);
  CHECK(std::isfinite(t.c_fit));
  CHECK(t.worst_knee_ratio <= 2.0);
  for (int j = 0; j < sw.measured.cols(); ++j) {
    CHECK(sw.measured(0, j) <= std::exp(-s[j] * sw.delta0) * sw.M * sw.M);
  }
}

TEST_CASE("2D smoke: one window on a 33^2 square") {
  const Grid g = build_grid(2, {{0.0, 1.0}, {0.0, 1.0}}, {33, 33}, 0.02, 100);
  const auto coeffs = CoefficientSet::constant(g, {{MultiIndex{{0, 0}}, 1.0}});
  // Omega0 near the y-centre, where the product weight keeps the threshold floor high
  const auto p = make_continuation_problem(g, coeffs, kGamma, 0.5, Box{{0.0, 0.4}, {0.2, 0.6}}, 0.004, 0.002);
  CHECK(p.lambda.thresholds.ordered());
  Vec u0(g.size());
  for (int k = 0; k < g.size(); ++k) {
    u0(k) = g.on_boundary(k) ? 0.0 : std::sin(kPi * g.coord(k, 0)) * std::sin(kPi * g.coord(k, 1));
  }
  const auto u = solve_forward(g, coeffs, SourceModel{}, u0);
  const auto w = qr_window(p, CauchyTrace::from_field(g, kGamma, u), 0.01, QrOptions{});
  SpaceTimeField e = w.u;
  e.values -= u.window(w.m_first, w.m_last).values;
  const double rel = spacetime_l2(g, e, p.omega0, w.m_first, w.m_last) /
                     spacetime_l2(g, u, p.omega0, w.m_first, w.m_last);
  CHECK(std::isfinite(rel));
  CHECK(rel < 0.3);
}

}  // TEST_SUITE
