#pragma once

// Structured grid of square bilinear elements plus boundary-condition
// resolution (segment snapping, constrained DOFs, loaded edges).

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "topopt/errors.hpp"

namespace topopt {

// Per-element scalar field (densities, coefficients), length nx*ny,
// element (i,j) at index i + j*nx, i.e. row-major from the bottom row.
using ElementField = std::vector<double>;

struct GridSpec {
  int nx = 0;
  int ny = 0;
  double lx = 1.0;
  double ly = 1.0;
};

struct Grid {
  int nx = 0;
  int ny = 0;
  double lx = 0.0;
  double ly = 0.0;
  double h = 0.0;  // edge length of the (square) cells

  int n_elems() const { return nx * ny; }
  int n_nodes() const { return (nx + 1) * (ny + 1); }

  int node_id(int i, int j) const { return i + j * (nx + 1); }
  int elem_id(int i, int j) const { return i + j * nx; }
  int elem_i(int e) const { return e % nx; }
  int elem_j(int e) const { return e / nx; }

  // Corner nodes in counterclockwise order: bottom-left, bottom-right,
  // top-right, top-left.
  std::array<int, 4> elem_nodes(int e) const {
    const int i = elem_i(e), j = elem_j(e);
    const int n0 = node_id(i, j);
    return {n0, n0 + 1, n0 + 1 + (nx + 1), n0 + (nx + 1)};
  }

  double centroid_x(int e) const { return (elem_i(e) + 0.5) * h; }
  double centroid_y(int e) const { return (elem_j(e) + 0.5) * h; }
  double node_x(int n) const { return (n % (nx + 1)) * h; }
  double node_y(int n) const { return (n / (nx + 1)) * h; }
};

// Validates the spec and fills in derived quantities. Cells must come out
// square: lx/nx and ly/ny have to agree to relative 1e-9.
Grid build_grid(const GridSpec& spec);

enum class Side { left, right, bottom, top };

enum class BcKind {
  clamp,        // both displacement components fixed to zero
  roller,       // displacement component normal to the side fixed to zero
  traction,     // constant traction (v1, v2) on the segment
  temperature,  // prescribed temperature v1
  flux          // prescribed boundary flux v1
};

enum class LoadRole { input, output };

// A boundary segment in fractional coordinates along its side:
// 0 <= s0 < s1 <= 1, measured left-to-right on bottom/top and
// bottom-to-top on left/right.
struct Segment {
  Side side = Side::left;
  double s0 = 0.0;
  double s1 = 1.0;
  BcKind kind = BcKind::clamp;
  double v1 = 0.0;
  double v2 = 0.0;
  LoadRole role = LoadRole::input;  // meaningful for tractions only
};

struct BoundarySpec {
  std::vector<Segment> segments;
};

// One loaded boundary edge (between two adjacent boundary nodes).
struct EdgeLoad {
  int n0 = 0;
  int n1 = 0;
  double v1 = 0.0;  // traction x-component, or scalar flux
  double v2 = 0.0;  // traction y-component (unused for flux)
  LoadRole role = LoadRole::input;
};

struct ResolvedBoundary {
  int dofs_per_node = 0;            // 2 for elasticity, 1 for heat
  std::vector<int> fixed_dofs;      // ascending, no duplicates
  std::vector<double> fixed_vals;   // aligned with fixed_dofs
  std::vector<EdgeLoad> loads;      // traction or flux edges, spec order
};

// Snaps segments to the grid, collects constrained DOFs and loaded edges,
// and validates the setup: kinds must belong to a single physics, Dirichlet
// and load segments must not share a full edge, and the constrained set
// must rule out rigid-body modes (elasticity) or be nonempty (heat).
ResolvedBoundary resolve_boundary(const Grid& grid, const BoundarySpec& spec);

// Snapped node index range [a, b] (inclusive) along a side with n edges,
// for a fractional interval [s0, s1]. Exposed for tests; resolve_boundary
// uses it internally. Guarantees b - a >= ceil((s1 - s0) * n) and
// endpoint snap error <= h/2 before any extension.
std::pair<int, int> snap_segment(double s0, double s1, int n_edges);

}  // namespace topopt
