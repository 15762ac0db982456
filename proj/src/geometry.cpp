#include "carlab/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace carlab {

namespace {

// Coordinates are compared with a tolerance relative to the spacing so box
// edges that fall on nodes behave the same on every grid.
constexpr double kCoordTol = 1e-9;

bool strictly_inside(double x, double lo, double hi, double h) {
  return x > lo + kCoordTol * h && x < hi - kCoordTol * h;
}

bool inside_closed(double x, double lo, double hi, double h) {
  return x >= lo - kCoordTol * h && x <= hi + kCoordTol * h;
}

bool same_coord(double a, double b, double h) { return std::abs(a - b) <= kCoordTol * h; }

void check_box(const Grid& g, const Box& b, const char* name) {
  if (static_cast<int>(b.lo.size()) != g.dim() || static_cast<int>(b.hi.size()) != g.dim()) {
    throw Error(std::string(name) + ": box dimension does not match grid");
  }
  for (int a = 0; a < g.dim(); ++a) {
    if (!(b.lo[a] < b.hi[a])) throw Error(std::string(name) + ": empty box");
  }
}

Box grid_box(const Grid& g) {
  Box b;
  for (const auto& ax : g.axes()) {
    b.lo.push_back(ax.lo());
    b.hi.push_back(ax.hi());
  }
  return b;
}

// closure(omega0) must lie in Omega united with Gamma: every face of the
// physical box touched by the closure has to be Gamma itself.
void check_omega0_closure(const Box& phys, const Box& o0, const std::optional<Face>& gamma,
                          const Grid& g) {
  for (int a = 0; a < g.dim(); ++a) {
    const double h = g.spacing(a);
    if (o0.lo[a] < phys.lo[a] - kCoordTol * h || o0.hi[a] > phys.hi[a] + kCoordTol * h) {
      throw Error("omega0 extends outside the domain along axis " + std::to_string(a));
    }
    for (int side = 0; side < 2; ++side) {
      const bool touches = side == 0 ? same_coord(o0.lo[a], phys.lo[a], h)
                                     : same_coord(o0.hi[a], phys.hi[a], h);
      if (!touches) continue;
      const bool is_gamma = gamma && gamma->axis == a && gamma->side == side;
      if (!is_gamma) {
        std::ostringstream os;
        os << "closure of omega0 touches the boundary face (axis " << a << ", "
           << (side == 0 ? "lower" : "upper") << ") which is not Gamma";
        throw Error(os.str());
      }
    }
  }
}

Mask gamma_mask(const Grid& g, const Box& phys, const Face& f) {
  Mask m(g.size(), 0);
  for (int k = 0; k < g.size(); ++k) {
    const double x = g.coord(k, f.axis);
    const double face = f.side == 0 ? phys.lo[f.axis] : phys.hi[f.axis];
    if (!same_coord(x, face, g.spacing(f.axis))) continue;
    bool ok = true;
    for (int a = 0; a < g.dim(); ++a) {
      if (a == f.axis) continue;
      ok = ok && strictly_inside(g.coord(k, a), phys.lo[a], phys.hi[a], g.spacing(a));
    }
    m[k] = ok ? 1 : 0;
  }
  return m;
}

int far_boundary_margin(const Grid& g, const Mask& omega0, const Box& phys,
                        const std::optional<Face>& gamma) {
  int margin = -1;
  for (int k = 0; k < g.size(); ++k) {
    if (!omega0[k]) continue;
    for (int a = 0; a < g.dim(); ++a) {
      const double h = g.spacing(a);
      const double x = g.coord(k, a);
      for (int side = 0; side < 2; ++side) {
        if (gamma && gamma->axis == a && gamma->side == side) continue;
        const double face = side == 0 ? phys.lo[a] : phys.hi[a];
        const int d = static_cast<int>(std::lround(std::abs(x - face) / h));
        margin = margin < 0 ? d : std::min(margin, d);
      }
    }
  }
  return std::max(margin, 0);
}

}  // namespace

Grid::Grid(std::vector<Axis> axes, double T, int Nt) : axes_(std::move(axes)), T_(T), Nt_(Nt) {
  size_ = 1;
  for (const auto& ax : axes_) size_ *= ax.n;
  dt_ = T_ / static_cast<double>(Nt_);
}

bool Grid::on_boundary(int k) const {
  const auto ij = multi_index(k);
  for (int a = 0; a < dim(); ++a) {
    if (ij[a] == 0 || ij[a] == axes_[a].n - 1) return true;
  }
  return false;
}

Mask Grid::boundary_mask() const {
  Mask m(size_, 0);
  for (int k = 0; k < size_; ++k) m[k] = on_boundary(k) ? 1 : 0;
  return m;
}

Mask Grid::interior_mask() const {
  Mask m = boundary_mask();
  for (auto& v : m) v = v ? 0 : 1;
  return m;
}

Grid Grid::with_time(double T, int Nt) const {
  if (!(T > 0.0) || Nt < kMinNodes) throw Error("invalid time horizon");
  return Grid(axes_, T, Nt);
}

Grid build_grid(int dim, const std::vector<std::array<double, 2>>& extents,
                const std::vector<int>& nodes, double T, int Nt) {
  if (dim < 1 || dim > kMaxDim) throw Error("dim must be 1 or 2");
  if (static_cast<int>(extents.size()) != dim || static_cast<int>(nodes.size()) != dim) {
    throw Error("extents/nodes must have one entry per axis");
  }
  if (!(T > 0.0)) throw Error("time extent T must be positive");
  if (Nt < kMinNodes) throw Error("Nt must be at least 8");
  std::vector<Axis> axes;
  for (int a = 0; a < dim; ++a) {
    const auto [lo, hi] = extents[a];
    if (!(hi > lo)) throw Error("extent along axis " + std::to_string(a) + " must be positive");
    if (nodes[a] < kMinNodes) {
      throw Error("axis " + std::to_string(a) + " needs at least 8 nodes, got " +
                  std::to_string(nodes[a]));
    }
    axes.push_back(Axis{lo, (hi - lo) / static_cast<double>(nodes[a] - 1), nodes[a], 0});
  }
  return Grid(std::move(axes), T, Nt);
}

std::size_t count(const Mask& m) {
  return static_cast<std::size_t>(std::count_if(m.begin(), m.end(), [](auto v) { return v != 0; }));
}

bool in_open_box(const Grid& g, int k, const Box& b) {
  for (int a = 0; a < g.dim(); ++a) {
    if (!strictly_inside(g.coord(k, a), b.lo[a], b.hi[a], g.spacing(a))) return false;
  }
  return true;
}

bool in_closed_box(const Grid& g, int k, const Box& b) {
  for (int a = 0; a < g.dim(); ++a) {
    if (!inside_closed(g.coord(k, a), b.lo[a], b.hi[a], g.spacing(a))) return false;
  }
  return true;
}

SubdomainMasks build_subdomains(const Grid& grid, const SubdomainSpec& spec) {
  SubdomainMasks m;
  const Box phys = grid_box(grid);
  m.physical_box = phys;
  m.physical.assign(grid.size(), 1);
  m.working = m.physical;
  m.omega.assign(grid.size(), 0);
  m.omega0.assign(grid.size(), 0);
  m.gamma.assign(grid.size(), 0);

  if (spec.gamma) {
    if (spec.gamma->axis < 0 || spec.gamma->axis >= grid.dim() || spec.gamma->side < 0 ||
        spec.gamma->side > 1) {
      throw Error("gamma face out of range");
    }
    m.gamma = gamma_mask(grid, phys, *spec.gamma);
    m.gamma_face = spec.gamma;
  }

  if (spec.omega) {
    check_box(grid, *spec.omega, "omega");
    for (int a = 0; a < grid.dim(); ++a) {
      const double h = grid.spacing(a);
      if (spec.omega->lo[a] <= phys.lo[a] + kCoordTol * h ||
          spec.omega->hi[a] >= phys.hi[a] - kCoordTol * h) {
        throw Error("omega must lie strictly inside the domain (touches the boundary along axis " +
                    std::to_string(a) + ")");
      }
    }
    for (int k = 0; k < grid.size(); ++k) m.omega[k] = in_open_box(grid, k, *spec.omega);
    if (count(m.omega) == 0) throw Error("omega contains no grid nodes");
    m.omega_box = spec.omega;
  }

  if (spec.omega0) {
    check_box(grid, *spec.omega0, "omega0");
    check_omega0_closure(phys, *spec.omega0, spec.gamma, grid);
    for (int k = 0; k < grid.size(); ++k) m.omega0[k] = in_open_box(grid, k, *spec.omega0);
    if (count(m.omega0) == 0) throw Error("omega0 contains no grid nodes");
    // Discrete form of the closure condition: every omega0 node is interior or
    // within one spacing of a Gamma node.
    for (int k = 0; k < grid.size(); ++k) {
      if (!m.omega0[k] || !grid.on_boundary(k)) continue;
      bool near_gamma = false;
      for (int j = 0; j < grid.size() && !near_gamma; ++j) {
        if (!m.gamma[j]) continue;
        double d2 = 0.0;
        for (int a = 0; a < grid.dim(); ++a) {
          const double dx = (grid.coord(k, a) - grid.coord(j, a)) / grid.spacing(a);
          d2 += dx * dx;
        }
        near_gamma = d2 <= 1.0 + 1e-9;
      }
      if (!near_gamma) throw Error("omega0 node on the boundary away from Gamma");
    }
    m.omega0_box = spec.omega0;
    m.omega0_interior_margin = far_boundary_margin(grid, m.omega0, phys, spec.gamma);
  }
  return m;
}

ExtendedDomain extend_domain(const Grid& grid, const Face& gamma, double pad,
                             const std::optional<Box>& omega0) {
  if (gamma.axis < 0 || gamma.axis >= grid.dim() || gamma.side < 0 || gamma.side > 1) {
    throw Error("gamma face out of range");
  }
  const double h = grid.spacing(gamma.axis);
  if (!(pad >= 2.0 * h * (1.0 - kCoordTol))) {
    throw Error("pad must be at least two node spacings (cut-off band needs room)");
  }
  const int k = static_cast<int>(std::lround(pad / h));

  std::vector<Axis> axes = grid.axes();
  Axis& ax = axes[gamma.axis];
  ax.n += k;
  if (gamma.side == 0) ax.first -= k;
  Grid working(axes, grid.T(), grid.Nt());

  ExtendedDomain out;
  out.grid = working;
  out.pad_cells = k;

  const Box phys = grid_box(grid);
  const double pad_actual = static_cast<double>(k) * h;
  Box omega;
  omega.lo = phys.lo;
  omega.hi = phys.hi;
  for (int a = 0; a < grid.dim(); ++a) {
    if (a == gamma.axis) {
      if (gamma.side == 0) {
        omega.lo[a] = phys.lo[a] - 0.8 * pad_actual;
        omega.hi[a] = phys.lo[a] - 0.2 * pad_actual;
      } else {
        omega.lo[a] = phys.hi[a] + 0.2 * pad_actual;
        omega.hi[a] = phys.hi[a] + 0.8 * pad_actual;
      }
    } else {
      const double len = phys.hi[a] - phys.lo[a];
      omega.lo[a] = phys.lo[a] + 0.2 * len;
      omega.hi[a] = phys.hi[a] - 0.2 * len;
    }
  }

  SubdomainMasks& m = out.masks;
  m.physical_box = phys;
  m.gamma_face = gamma;
  m.omega_box = omega;
  m.physical.assign(working.size(), 0);
  m.working.assign(working.size(), 1);
  m.omega.assign(working.size(), 0);
  m.omega0.assign(working.size(), 0);
  m.gamma = gamma_mask(working, phys, gamma);
  for (int n = 0; n < working.size(); ++n) {
    m.physical[n] = in_closed_box(working, n, phys);
    m.omega[n] = in_open_box(working, n, omega);
  }
  if (count(m.omega) == 0) throw Error("control region in the pad contains no nodes");

  if (omega0) {
    check_box(grid, *omega0, "omega0");
    check_omega0_closure(phys, *omega0, gamma, grid);
    for (int n = 0; n < working.size(); ++n) m.omega0[n] = in_open_box(working, n, *omega0);
    if (count(m.omega0) == 0) throw Error("omega0 contains no grid nodes");
    m.omega0_box = omega0;
    m.omega0_interior_margin = far_boundary_margin(working, m.omega0, phys, gamma);
  }

  out.physical_to_working.resize(grid.size());
  for (int n = 0; n < grid.size(); ++n) {
    auto ij = grid.multi_index(n);
    if (gamma.side == 0) ij[gamma.axis] += k;
    out.physical_to_working[n] = working.index(ij);
  }
  return out;
}

NodeClass classify_node(const Grid& working, const SubdomainMasks& masks, int k) {
  if (working.on_boundary(k)) return NodeClass::OuterBoundary;
  if (!masks.physical[k]) return NodeClass::PadInterior;
  const Box& b = masks.physical_box;
  for (int a = 0; a < working.dim(); ++a) {
    const double x = working.coord(k, a);
    const double h = working.spacing(a);
    if (same_coord(x, b.lo[a], h) || same_coord(x, b.hi[a], h)) return NodeClass::PhysicalBoundary;
  }
  return NodeClass::PhysicalInterior;
}

}  // namespace carlab
