#include "topopt/grid.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace topopt {

Grid build_grid(const GridSpec& spec) {
  if (spec.nx < 1 || spec.ny < 1)
    throw config_error("grid: nx and ny must be at least 1");
  if (!(spec.lx > 0.0) || !(spec.ly > 0.0))
    throw config_error("grid: lx and ly must be positive");
  const double hx = spec.lx / spec.nx;
  const double hy = spec.ly / spec.ny;
  if (std::abs(hx - hy) > 1e-9 * std::max(hx, hy))
    throw config_error("grid: cells must be square (lx/nx != ly/ny)");
  Grid g;
  g.nx = spec.nx;
  g.ny = spec.ny;
  g.lx = spec.lx;
  g.ly = spec.ly;
  g.h = hx;
  return g;
}

std::pair<int, int> snap_segment(double s0, double s1, int n_edges) {
  const double n = static_cast<double>(n_edges);
  int a = static_cast<int>(std::lround(s0 * n));
  int b = static_cast<int>(std::lround(s1 * n));
  a = std::clamp(a, 0, n_edges);
  b = std::clamp(b, 0, n_edges);
  // Never let snapping shrink the segment below its requested edge count.
  const int need = static_cast<int>(std::ceil((s1 - s0) * n - 1e-12));
  if (b - a < need) {
    const double err_a = std::abs(a / n - s0);
    const double err_b = std::abs(b / n - s1);
    const bool can_lo = a > 0, can_hi = b < n_edges;
    if (can_lo && (!can_hi || err_a <= err_b))
      --a;
    else if (can_hi)
      ++b;
  }
  return {a, b};
}

namespace {

bool is_mech_kind(BcKind k) {
  return k == BcKind::clamp || k == BcKind::roller || k == BcKind::traction;
}

int side_edges(const Grid& g, Side s) {
  return (s == Side::bottom || s == Side::top) ? g.nx : g.ny;
}

int side_node(const Grid& g, Side s, int k) {
  switch (s) {
    case Side::bottom: return g.node_id(k, 0);
    case Side::top:    return g.node_id(k, g.ny);
    case Side::left:   return g.node_id(0, k);
    case Side::right:  return g.node_id(g.nx, k);
  }
  return -1;
}

}  // namespace

ResolvedBoundary resolve_boundary(const Grid& grid, const BoundarySpec& spec) {
  if (spec.segments.empty())
    throw config_error("boundary: no segments given");

  bool any_mech = false, any_heat = false;
  for (const auto& s : spec.segments)
    (is_mech_kind(s.kind) ? any_mech : any_heat) = true;
  if (any_mech && any_heat)
    throw config_error("boundary: cannot mix elastic and thermal segment kinds");
  const int dpn = any_mech ? 2 : 1;

  ResolvedBoundary rb;
  rb.dofs_per_node = dpn;

  std::map<int, double> fixed;  // dof -> value
  auto fix_dof = [&](int dof, double val) {
    auto [it, inserted] = fixed.emplace(dof, val);
    if (!inserted && it->second != val)
      throw config_error("boundary: conflicting prescribed values on one DOF");
  };

  // Snapped node ranges per side, kept to detect Dirichlet/load overlap.
  struct Placed { Side side; int a, b; bool dirichlet; };
  std::vector<Placed> placed;

  for (const auto& seg : spec.segments) {
    if (!(seg.s0 >= 0.0) || !(seg.s1 <= 1.0) || !(seg.s0 < seg.s1))
      throw config_error("boundary: segment must satisfy 0 <= s0 < s1 <= 1");
    const int n = side_edges(grid, seg.side);
    const auto [a, b] = snap_segment(seg.s0, seg.s1, n);

    const bool dirichlet = seg.kind == BcKind::clamp ||
                           seg.kind == BcKind::roller ||
                           seg.kind == BcKind::temperature;
    placed.push_back({seg.side, a, b, dirichlet});

    if (dirichlet) {
      for (int k = a; k <= b; ++k) {
        const int node = side_node(grid, seg.side, k);
        switch (seg.kind) {
          case BcKind::clamp:
            fix_dof(2 * node + 0, 0.0);
            fix_dof(2 * node + 1, 0.0);
            break;
          case BcKind::roller: {
            // Fix the component normal to the side.
            const int comp =
                (seg.side == Side::left || seg.side == Side::right) ? 0 : 1;
            fix_dof(2 * node + comp, 0.0);
            break;
          }
          case BcKind::temperature:
            fix_dof(node, seg.v1);
            break;
          default: break;
        }
      }
    } else {
      for (int k = a; k < b; ++k) {
        EdgeLoad e;
        e.n0 = side_node(grid, seg.side, k);
        e.n1 = side_node(grid, seg.side, k + 1);
        e.v1 = seg.v1;
        e.v2 = seg.v2;
        e.role = seg.role;
        rb.loads.push_back(e);
      }
    }
  }

  // A load segment and a Dirichlet segment may touch at a node but must not
  // share a whole edge.
  for (size_t i = 0; i < placed.size(); ++i)
    for (size_t j = i + 1; j < placed.size(); ++j) {
      const auto& p = placed[i];
      const auto& q = placed[j];
      if (p.side != q.side || p.dirichlet == q.dirichlet) continue;
      if (std::min(p.b, q.b) - std::max(p.a, q.a) >= 1)
        throw config_error(
            "boundary: Dirichlet and load segments overlap on a full edge");
    }

  for (const auto& [dof, val] : fixed) {
    rb.fixed_dofs.push_back(dof);
    rb.fixed_vals.push_back(val);
  }

  if (dpn == 1) {
    if (rb.fixed_dofs.empty())
      throw config_error("boundary: heat problem needs a temperature segment");
    return rb;
  }

  // Elasticity: the constraints must block both translations and the
  // rotation. Evaluate the three rigid modes on the constrained DOFs and
  // check the 3x3 Gram matrix has full rank.
  double gram[3][3] = {};
  for (size_t m = 0; m < rb.fixed_dofs.size(); ++m) {
    const int dof = rb.fixed_dofs[m];
    const int node = dof / 2, comp = dof % 2;
    const double x = grid.node_x(node), y = grid.node_y(node);
    // Rigid modes (tx, ty, rot) evaluated at this DOF.
    const double r[3] = {comp == 0 ? 1.0 : 0.0, comp == 1 ? 1.0 : 0.0,
                         comp == 0 ? -y : x};
    for (int s = 0; s < 3; ++s)
      for (int t = 0; t < 3; ++t) gram[s][t] += r[s] * r[t];
  }
  // Rank via greedy pivoting; scale-aware tolerance.
  double scale = 0.0;
  for (int s = 0; s < 3; ++s) scale = std::max(scale, gram[s][s]);
  int rank = 0;
  for (int c = 0; c < 3 && scale > 0.0; ++c) {
    int piv = -1;
    double best = 1e-10 * scale;
    for (int s = c; s < 3; ++s)
      if (std::abs(gram[s][s]) > best) { best = std::abs(gram[s][s]); piv = s; }
    if (piv < 0) break;
    for (int s = 0; s < 3; ++s) std::swap(gram[c][s], gram[piv][s]);
    for (int s = 0; s < 3; ++s) std::swap(gram[s][c], gram[s][piv]);
    ++rank;
    for (int s = 0; s < 3; ++s) {
      if (s == c) continue;
      const double f = gram[s][c] / gram[c][c];
      for (int t = 0; t < 3; ++t) gram[s][t] -= f * gram[c][t];
    }
  }
  if (rank < 3)
    throw config_error(
        "boundary: constraints leave rigid-body modes (need clamps/rollers "
        "blocking both translations and the rotation)");

  return rb;
}

}  // namespace topopt
