#include "carlab/forward.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace carlab {

SourceModel SourceModel::separable(const Grid& grid, const Vec& R_space, const Vec& f, double r0) {
  if (R_space.size() != grid.size() || f.size() != grid.size()) {
    throw Error("source fields do not match the grid");
  }
  SourceModel s;
  s.R = SpaceTimeField(grid.size(), grid.Nt() + 1);
  s.R.values.colwise() = R_space;
  s.f = f;
  s.r0 = r0;
  return s;
}

void SourceModel::check_positivity(const Grid& grid, int level) const {
  if (!(r0 > 0.0)) throw Error("source bound r0 must be positive");
  if (R.nodes() != grid.size() || !R.has_level(level)) throw Error("R does not cover the level");
  std::vector<int> bad;
  for (int k = 0; k < grid.size(); ++k) {
    if (std::abs(R.level(level)(k)) < r0) bad.push_back(k);
  }
  if (bad.empty()) return;
  std::ostringstream os;
  os << "|R(x, t_" << level << ")| < r0 = " << r0 << " at " << bad.size() << " node(s):";
  for (std::size_t i = 0; i < std::min<std::size_t>(bad.size(), 8); ++i) {
    os << " node " << bad[i] << " (|R| = " << std::abs(R.level(level)(bad[i])) << ")";
  }
  throw Error(os.str());
}

int nearest_level(const Grid& grid, double t) {
  const int m = static_cast<int>(std::lround(t / grid.dt()));
  if (m < 0 || m > grid.Nt()) throw Error("time outside [0, T]");
  return m;
}

ForwardSolver::ForwardSolver(const Grid& grid, const CoefficientSet& coeffs)
    : grid_(grid), K_(spatial_operator(grid, coeffs)), interior_(grid.size()) {
  for (int k = 0; k < grid.size(); ++k) interior_(k) = grid.on_boundary(k) ? 0.0 : 1.0;
  A_ = SpMat(grid.size(), grid.size());
  A_.setIdentity();
  A_ += grid.dt() * K_;
  A_.makeCompressed();
  lu_ = std::make_shared<Eigen::SparseLU<SpMat>>();
  lu_->compute(A_);
  if (lu_->info() != Eigen::Success) {
    throw Error("factorisation of the implicit step matrix failed: " + lu_->lastErrorMessage());
  }
}

Vec ForwardSolver::solve_system(const Vec& rhs) const {
  Vec x = lu_->solve(rhs);
  if (lu_->info() != Eigen::Success || !x.allFinite()) throw Error("implicit step solve failed");
  // one refinement sweep: high-order norms amplify the factorisation round-off
  x += lu_->solve(Vec(rhs - A_ * x));
  return x;
}

Vec ForwardSolver::solve_system_transpose(const Vec& rhs) const {
  Vec x = lu_->transpose().solve(rhs);
  if (!x.allFinite()) throw Error("transposed implicit step solve failed");
  x += lu_->transpose().solve(Vec(rhs - A_.transpose() * x));
  return x;
}

Vec ForwardSolver::step(const Vec& y, const Vec& load) const {
  Vec rhs = y;
  if (load.size() > 0) rhs += grid_.dt() * interior_.cwiseProduct(load);
  // boundary rows are identity with zero data; drop the round-off
  return solve_system(rhs).cwiseProduct(interior_);
}

SpaceTimeField ForwardSolver::solve(const Vec& y_init, const SpaceTimeField& loads) const {
  if (y_init.size() != grid_.size()) throw Error("initial state does not match the grid");
  const bool forced = loads.levels() > 0;
  if (forced && (loads.nodes() != grid_.size() || !loads.has_level(1) ||
                 !loads.has_level(grid_.Nt()))) {
    throw Error("source does not cover levels 1..Nt");
  }
  SpaceTimeField y(grid_.size(), grid_.Nt() + 1);
  y.level(0) = y_init;
  const Vec none;
  for (int m = 1; m <= grid_.Nt(); ++m) {
    y.level(m) = forced ? step(y.level(m - 1), loads.level(m)) : step(y.level(m - 1), none);
  }
  return y;
}

SpaceTimeField ForwardSolver::solve_transpose(const SpaceTimeField& w) const {
  if (w.nodes() != grid_.size() || !w.has_level(1) || !w.has_level(grid_.Nt())) {
    throw Error("sensitivities must cover levels 1..Nt");
  }
  SpaceTimeField p(grid_.size(), grid_.Nt() + 1);
  Vec carry = Vec::Zero(grid_.size());
  for (int m = grid_.Nt(); m >= 1; --m) {
    carry = solve_system_transpose(w.level(m) + carry);
    p.level(m) = carry;
  }
  return p;
}

SpaceTimeField solve_forward(const Grid& grid, const CoefficientSet& coeffs,
                             const SourceModel& source, const Vec& y_init) {
  if (y_init.size() != grid.size()) throw Error("initial state does not match the grid");
  const double scale = std::max(1.0, y_init.cwiseAbs().maxCoeff());
  for (int k = 0; k < grid.size(); ++k) {
    if (grid.on_boundary(k) && std::abs(y_init(k)) > 1e-12 * scale) {
      throw Error("initial state must vanish on the boundary");
    }
  }
  SpaceTimeField loads;
  if (source.f.size() > 0) {
    if (source.f.size() != grid.size() || source.R.nodes() != grid.size() ||
        source.R.levels() != grid.Nt() + 1) {
      throw Error("source does not match the grid");
    }
    loads = SpaceTimeField(grid.size(), grid.Nt() + 1);
    for (int m = 0; m <= grid.Nt(); ++m) loads.level(m) = source.forcing(m);
  }
  return ForwardSolver(grid, coeffs).solve(y_init, loads);
}

SpaceTimeField modal_solution(const Grid& grid, int k) {
  const double pi = std::numbers::pi;
  double rate = 0.0;
  Vec shape = Vec::Ones(grid.size());
  for (int a = 0; a < grid.dim(); ++a) {
    const double L = grid.axis(a).hi() - grid.axis(a).lo();
    const double w = k * pi / L;
    rate += w * w;
    for (int n = 0; n < grid.size(); ++n) {
      shape(n) *= grid.on_boundary(n) ? 0.0 : std::sin(w * (grid.coord(n, a) - grid.axis(a).lo()));
    }
  }
  rate *= rate;
  SpaceTimeField u(grid.size(), grid.Nt() + 1);
  for (int m = 0; m <= grid.Nt(); ++m) u.level(m) = std::exp(-rate * grid.time(m)) * shape;
  return u;
}

double navier_trace_residual(const Grid& grid, const SpaceTimeField& y) {
  // Odd reflection about a boundary node gives the ghost value 2 y_b - y_1,
  // so the boundary Laplacian reduces to the trace itself.
  double worst = 0.0;
  for (int m = y.first_level; m <= y.last_level(); ++m) {
    const auto col = y.level(m);
    for (int k = 0; k < grid.size(); ++k) {
      if (!grid.on_boundary(k)) continue;
      const auto ij = grid.multi_index(k);
      double lap = 0.0;
      for (int a = 0; a < grid.dim(); ++a) {
        const double h2 = grid.spacing(a) * grid.spacing(a);
        const int n = grid.nodes(a);
        auto nb = ij;
        if (ij[a] == 0 || ij[a] == n - 1) {
          nb[a] = ij[a] == 0 ? 1 : n - 2;
          const double inner = col(grid.index(nb));
          const double ghost = 2.0 * col(k) - inner;
          lap += (inner + ghost - 2.0 * col(k)) / h2;
        } else {
          auto lo = ij;
          auto hi = ij;
          lo[a] -= 1;
          hi[a] += 1;
          lap += (col(grid.index(lo)) + col(grid.index(hi)) - 2.0 * col(k)) / h2;
        }
      }
      worst = std::max({worst, std::abs(col(k)), std::abs(lap)});
    }
  }
  return worst;
}

ConvergenceTable manufactured_convergence(const std::vector<Grid>& grids, int k) {
  if (grids.size() < 3) throw Error("convergence study needs at least three grids");
  ConvergenceTable table;
  const bool same_h = grids[0].spacing(0) == grids[1].spacing(0);
  table.axis = same_h ? RefinementAxis::Time : RefinementAxis::Space;
  const CoefficientSet none;
  for (const auto& g : grids) {
    const auto exact = modal_solution(g, k);
    SourceModel src;
    const auto y = solve_forward(g, none, src, exact.level(0));
    const Vec err = y.level(g.Nt()) - exact.level(g.Nt());
    const Mask all(g.size(), 1);
    ConvergenceRow row;
    row.nodes = g.nodes(0);
    row.Nt = g.Nt();
    row.h = g.spacing(0);
    row.dt = g.dt();
    row.error = sobolev_norm(g, err, 0, all);
    row.rel_error = row.error / sobolev_norm(g, exact.level(g.Nt()), 0, all);
    table.rows.push_back(row);
  }
  for (std::size_t i = 0; i + 1 < table.rows.size(); ++i) {
    const auto& a = table.rows[i];
    const auto& b = table.rows[i + 1];
    const double step = table.axis == RefinementAxis::Space ? a.h / b.h : a.dt / b.dt;
    table.ratios.push_back(a.error / b.error);
    table.orders.push_back(std::log(a.error / b.error) / std::log(step));
  }
  return table;
}

}  // namespace carlab
