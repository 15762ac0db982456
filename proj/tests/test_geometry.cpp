#include "doctest.h"

#include "carlab/geometry.hpp"

using namespace carlab;

TEST_SUITE("geometry") {

TEST_CASE("uniform 1D mesh arithmetic") {
  const Grid g = build_grid(1, {{0.0, 1.0}}, {101}, 1.0, 100);
  CHECK(g.spacing(0) == doctest::Approx(0.01));
  CHECK(g.dt() == doctest::Approx(0.01));
  CHECK(g.size() == 101);
  CHECK(g.coord(0, 0) == 0.0);
  CHECK(g.coord(100, 0) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("2D boundary count on a tensor grid") {
  const Grid g = build_grid(2, {{0.0, 1.0}, {0.0, 1.0}}, {33, 33}, 1.0, 10);
  CHECK(g.size() == 33 * 33);
  CHECK(count(g.boundary_mask()) == 4 * 32);
  CHECK(count(g.boundary_mask()) + count(g.interior_mask()) == static_cast<std::size_t>(g.size()));
}

TEST_CASE("insufficient resolution and bad extents rejected") {
  CHECK_THROWS_AS(build_grid(1, {{0.0, 1.0}}, {4}, 1.0, 100), Error);
  CHECK_THROWS_AS(build_grid(1, {{0.0, 1.0}}, {20}, 1.0, 4), Error);
  CHECK_THROWS_AS(build_grid(1, {{1.0, 0.0}}, {20}, 1.0, 10), Error);
  CHECK_THROWS_AS(build_grid(1, {{0.0, 1.0}}, {20}, -1.0, 10), Error);
  CHECK_THROWS_AS(build_grid(3, {{0, 1}, {0, 1}, {0, 1}}, {9, 9, 9}, 1.0, 10), Error);
}

TEST_CASE("observation region inside the interval") {
  const Grid g = build_grid(1, {{0.0, 1.0}}, {101}, 1.0, 100);
  SubdomainSpec spec;
  spec.omega = Box{{0.4}, {0.6}};
  const auto m = build_subdomains(g, spec);
  // open interval (0.4, 0.6) at h = 0.01 holds nodes 41..59
  std::size_t expected = 0;
  for (int i = 0; i < 101; ++i) expected += (i * 0.01 > 0.4 + 1e-12 && i * 0.01 < 0.6 - 1e-12);
  CHECK(count(m.omega) == expected);
  CHECK(count(m.omega) >= 19);
  CHECK(count(m.omega) <= 21);
}

TEST_CASE("omega touching the boundary rejected") {
  const Grid g = build_grid(1, {{0.0, 1.0}}, {101}, 1.0, 100);
  SubdomainSpec spec;
  spec.omega = Box{{0.0}, {0.3}};
  CHECK_THROWS_AS(build_subdomains(g, spec), Error);
}

TEST_CASE("omega0 closure must stay in Omega union Gamma") {
  const Grid g = build_grid(1, {{0.0, 1.0}}, {101}, 1.0, 100);
  SubdomainSpec ok;
  ok.gamma = Face{0, 0};
  ok.omega0 = Box{{0.0}, {0.5}};
  const auto m = build_subdomains(g, ok);
  CHECK(count(m.gamma) == 1);
  CHECK(m.gamma[0] == 1);
  CHECK(count(m.omega0) > 0);

  SubdomainSpec bad = ok;
  bad.omega0 = Box{{0.2}, {1.0}};
  CHECK_THROWS_AS(build_subdomains(g, bad), Error);
}

TEST_CASE("padding across Gamma in 1D") {
  const Grid g = build_grid(1, {{0.0, 1.0}}, {101}, 1.0, 100);
  const auto ext = extend_domain(g, Face{0, 0}, 0.5);
  const Grid& w = ext.grid;
  CHECK(w.axis(0).lo() == doctest::Approx(-0.5));
  CHECK(w.axis(0).hi() == doctest::Approx(1.0));
  REQUIRE(ext.masks.omega_box);
  CHECK(ext.masks.omega_box->lo[0] == doctest::Approx(-0.4));
  CHECK(ext.masks.omega_box->hi[0] == doctest::Approx(-0.1));
  for (int k = 0; k < w.size(); ++k) {
    if (ext.masks.omega[k]) {
      CHECK(w.coord(k, 0) > -0.5);
      CHECK(w.coord(k, 0) < 0.0);
    }
  }
  // physical nodes are reproduced bit-exactly
  for (int k = 0; k < g.size(); ++k) CHECK(w.coord(ext.physical_to_working[k], 0) == g.coord(k, 0));
  // Gamma is interior to the enlarged domain
  for (int k = 0; k < w.size(); ++k) {
    if (ext.masks.gamma[k]) CHECK_FALSE(w.on_boundary(k));
  }
}

TEST_CASE("padding in 2D and the node partition") {
  const Grid g = build_grid(2, {{0.0, 1.0}, {0.0, 1.0}}, {17, 17}, 1.0, 10);
  const auto ext = extend_domain(g, Face{0, 0}, 0.5);
  const Grid& w = ext.grid;
  CHECK(w.axis(0).lo() == doctest::Approx(-0.5));
  CHECK(w.axis(1).lo() == doctest::Approx(0.0));
  CHECK(w.axis(1).hi() == doctest::Approx(1.0));
  int tallies[4] = {0, 0, 0, 0};
  for (int k = 0; k < w.size(); ++k) ++tallies[static_cast<int>(classify_node(w, ext.masks, k))];
  CHECK(tallies[0] + tallies[1] + tallies[2] + tallies[3] == w.size());
  CHECK(tallies[0] == 15 * 15);
  CHECK(tallies[3] == static_cast<int>(count(w.boundary_mask())));
  for (int k = 0; k < w.size(); ++k) {
    if (ext.masks.omega[k]) {
      CHECK(classify_node(w, ext.masks, k) == NodeClass::PadInterior);
    }
  }
}

TEST_CASE("pad too thin for the cut-off band") {
  const Grid g = build_grid(1, {{0.0, 1.0}}, {101}, 1.0, 100);
  CHECK_THROWS_AS(extend_domain(g, Face{0, 0}, 0.005), Error);
}

TEST_CASE("padding is monotone and restricts to the original grid") {
  const Grid g = build_grid(1, {{0.0, 1.0}}, {41}, 1.0, 10);
  const auto a = extend_domain(g, Face{0, 1}, 0.25);
  const auto b = extend_domain(g, Face{0, 1}, 0.5);
  CHECK(b.grid.size() > a.grid.size());
  for (int k = 0; k < a.grid.size(); ++k) {
    CHECK(a.grid.coord(k, 0) == b.grid.coord(k, 0));
  }
  for (int k = 0; k < g.size(); ++k) {
    CHECK(a.grid.coord(a.physical_to_working[k], 0) == g.coord(k, 0));
    CHECK(b.grid.coord(b.physical_to_working[k], 0) == g.coord(k, 0));
  }
}

}  // TEST_SUITE
