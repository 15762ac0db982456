#pragma once

/// \file geometry.hpp
/// \brief Tensor-product space/time meshes and the subdomain masks used by
///        the inverse-source and continuation experiments.

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace carlab {

/// Raised for invalid inputs across the library (bad grids, masks, configs).
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

constexpr int kMaxDim = 2;
constexpr int kMinNodes = 8;

using Mask = std::vector<std::uint8_t>;

/// One uniform axis. Node i sits at anchor + (i + first) * h, so a padded
/// axis reproduces the coordinates of the unpadded one bit-exactly.
struct Axis {
  double anchor = 0.0;
  double h = 0.0;
  int n = 0;
  int first = 0;

  double coord(int i) const { return anchor + static_cast<double>(i + first) * h; }
  double lo() const { return coord(0); }
  double hi() const { return coord(n - 1); }
};

class Grid {
public:
  Grid() = default;
  Grid(std::vector<Axis> axes, double T, int Nt);

  int dim() const { return static_cast<int>(axes_.size()); }
  const Axis& axis(int a) const { return axes_.at(a); }
  const std::vector<Axis>& axes() const { return axes_; }
  int nodes(int a) const { return axes_.at(a).n; }
  double spacing(int a) const { return axes_.at(a).h; }
  int size() const { return size_; }

  double T() const { return T_; }
  int Nt() const { return Nt_; }
  double dt() const { return dt_; }
  double time(int m) const { return static_cast<double>(m) * dt_; }

  int index(const std::array<int, kMaxDim>& ijk) const {
    return dim() == 1 ? ijk[0] : ijk[0] + axes_[0].n * ijk[1];
  }
  std::array<int, kMaxDim> multi_index(int k) const {
    if (dim() == 1) return {k, 0};
    return {k % axes_[0].n, k / axes_[0].n};
  }
  double coord(int k, int a) const { return axes_[a].coord(multi_index(k)[a]); }

  /// True for nodes on the boundary of the box.
  bool on_boundary(int k) const;
  Mask boundary_mask() const;
  Mask interior_mask() const;

  /// Same spatial mesh with a different time horizon.
  Grid with_time(double T, int Nt) const;

private:
  std::vector<Axis> axes_;
  int size_ = 0;
  double T_ = 0.0;
  int Nt_ = 0;
  double dt_ = 0.0;
};

/// Build a uniform grid. extents[a] = {lo, hi}.
Grid build_grid(int dim, const std::vector<std::array<double, 2>>& extents,
                const std::vector<int>& nodes, double T, int Nt);

/// Open coordinate box.
struct Box {
  std::vector<double> lo;
  std::vector<double> hi;
};

/// A face of the box domain: axis index and side (0 = lower, 1 = upper).
struct Face {
  int axis = 0;
  int side = 0;
};

struct SubdomainSpec {
  std::optional<Box> omega;
  std::optional<Box> omega0;
  std::optional<Face> gamma;
};

struct SubdomainMasks {
  Mask omega;     ///< observation region (Problem I) or control region in the pad
  Mask omega0;    ///< continuation target, empty when unused
  Mask gamma;     ///< sub-boundary nodes carrying Cauchy data
  Mask physical;  ///< closure of the physical domain
  Mask working;   ///< closure of the working domain (enlarged domain when padded)
  int omega0_interior_margin = 0;  ///< stencil clearance of omega0 from the far boundary
  std::optional<Box> omega_box;
  std::optional<Box> omega0_box;
  std::optional<Face> gamma_face;
  Box physical_box;
};

std::size_t count(const Mask& m);

bool in_open_box(const Grid& g, int k, const Box& b);
bool in_closed_box(const Grid& g, int k, const Box& b);

/// Masks on the physical grid. Rejects omega touching the boundary and an
/// omega0 whose closure leaves Omega united with Gamma.
SubdomainMasks build_subdomains(const Grid& grid, const SubdomainSpec& spec);

struct ExtendedDomain {
  Grid grid;
  SubdomainMasks masks;
  int pad_cells = 0;
  /// Node index in the enlarged grid of physical node k.
  std::vector<int> physical_to_working;
};

/// Pad the box across Gamma. The control region omega is placed inside the
/// pad at (0.2, 0.8) of its depth; omega0 (optional) is carried over.
ExtendedDomain extend_domain(const Grid& grid, const Face& gamma, double pad,
                             const std::optional<Box>& omega0 = std::nullopt);

enum class NodeClass { PhysicalInterior, PhysicalBoundary, PadInterior, OuterBoundary };

/// Partition of the enlarged node set. Nodes shared by the physical and outer
/// boundaries count as outer boundary.
NodeClass classify_node(const Grid& working, const SubdomainMasks& masks, int k);

}  // namespace carlab
