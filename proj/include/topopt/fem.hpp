#pragma once

// Bilinear finite elements on the structured grid: element matrices,
// assembly with symmetric Dirichlet elimination, Jacobi-preconditioned CG
// and a sparse-direct engine behind one interface, load builders, element
// stress/gradient evaluation, and the paired state/adjoint solves.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <array>
#include <optional>
#include <vector>

#include "topopt/grid.hpp"
#include "topopt/material.hpp"

namespace topopt {

using Matrix8d = Eigen::Matrix<double, 8, 8>;

// Plane-stress stiffness of one square element with unit Young's modulus.
// Independent of h; rows/cols ordered (ux, uy) per corner, counterclockwise
// from bottom-left.
Matrix8d element_stiffness_elastic(double nu, double h);

// Scalar diffusion stiffness of one square element with unit conductivity;
// independent of h. Kernel = constant fields.
Eigen::Matrix4d element_stiffness_scalar(double h);

enum class SolveEngine { pcg, direct };

struct SolverOptions {
  SolveEngine engine = SolveEngine::pcg;
  double rtol = 1e-10;  // contract requires <= 1e-9; default is tighter
  int max_iters = 0;    // 0 -> 50 * sqrt(n_free)
};

struct SolveReport {
  int iterations = 0;
  double rel_residual = 0.0;
};

// Assembled SPD system on the free DOFs after symmetric elimination of the
// prescribed ones, plus the bookkeeping to scatter back to full vectors.
struct LinearSystem {
  Eigen::SparseMatrix<double> A;
  Eigen::VectorXd rhs_fixed;       // free-space correction from fixed values
  std::vector<int> free_of_full;   // -1 where fixed
  std::vector<int> full_of_free;
  std::vector<int> fixed_dofs;
  std::vector<double> fixed_vals;
  int n_full = 0;
  int dofs_per_node = 0;
};

// coeff is a positive per-element multiplier of the unit element matrix:
// 1/A(chi) for elasticity, kappa(chi) for heat. The physics follows
// bcs.dofs_per_node; nu is used only for elasticity.
LinearSystem assemble(const Grid& grid, const ElementField& coeff,
                      const ResolvedBoundary& bcs, double nu = 0.3);

// Nodal force/flux vector (full DOF numbering) from the boundary edges with
// the given role: constant traction t contributes t*h/2 to each edge node.
Eigen::VectorXd boundary_load(const Grid& grid, const ResolvedBoundary& bcs,
                              LoadRole role);

// Nodal load from a per-element volumetric source: q_e * h^2 / 4 per corner.
Eigen::VectorXd volume_source_load(const Grid& grid, const ElementField& q);

// Solves A x = b for the full-length rhs, returns the full-length solution
// with prescribed values filled in. Relative residual on the free DOFs is
// driven below opts.rtol (hard ceiling 1e-9 enforced); failure to converge
// or loss of positive definiteness throws solver_error.
Eigen::VectorXd solve_linear(const LinearSystem& sys,
                             const Eigen::VectorXd& rhs_full,
                             const SolverOptions& opts = {},
                             const Eigen::VectorXd* warm_start = nullptr,
                             SolveReport* report = nullptr);

// Element stresses sampled at the four 2x2 Gauss points, Voigt order
// (xx, yy, xy). The mean of the four samples equals the centroid value for
// bilinear displacements.
struct StressField {
  int n_elems = 0;
  std::vector<double> gp;  // layout [12*e + 3*g + c]

  std::array<double, 3> centroid(int e) const {
    std::array<double, 3> s{};
    for (int g = 0; g < 4; ++g)
      for (int c = 0; c < 3; ++c) s[c] += 0.25 * gp[12 * e + 3 * g + c];
    return s;
  }
};

// sigma = (1/A(chi_e)) * D_1 * strain(u) sampled per Gauss point.
StressField compute_stress(const Grid& grid, const ElementField& chi_eps,
                           const MechMaterial& mat, const Eigen::VectorXd& u);

// Element mean of the unit-modulus compliance pairing E0^{-1} s : t.
// Exact for Q1 fields; with s == t this is the (nonnegative) energy density.
double stress_pair_mean(const StressField& s, const StressField& t, double nu,
                        int e);

// Element means of |grad T|^2 for a nodal field T; exact per element.
ElementField grad_sq_mean(const Grid& grid, const Eigen::VectorXd& T);

// Element means of a nodal field (average of the four corners).
ElementField element_mean(const Grid& grid, const Eigen::VectorXd& T);

// State and adjoint displacement solves sharing one assembled matrix.
struct MechState {
  Eigen::VectorXd u, v;     // responses to the input and output loads
  StressField sigma, rho;   // stresses of u and v
  double l_in_u = 0, l_out_u = 0, l_in_v = 0, l_out_v = 0;
  SolveReport rep_u, rep_v;
};

// Solves both problems at the given (already smoothed) density field and
// asserts the reciprocity identity l_in(v) == l_out(u) to 1e-8 relative.
MechState solve_mech_pair(const Grid& grid, const ElementField& chi_eps,
                          const MechMaterial& mat, const ResolvedBoundary& bcs,
                          const SolverOptions& opts = {},
                          const MechState* warm = nullptr);

// Convenience single solves mirroring solve_mech_pair.
Eigen::VectorXd solve_state_mech(const Grid& grid, const ElementField& chi_eps,
                                 const MechMaterial& mat,
                                 const ResolvedBoundary& bcs,
                                 const SolverOptions& opts = {});
Eigen::VectorXd solve_adjoint_mech(const Grid& grid,
                                   const ElementField& chi_eps,
                                   const MechMaterial& mat,
                                   const ResolvedBoundary& bcs,
                                   const SolverOptions& opts = {});

struct HeatState {
  Eigen::VectorXd T_star;  // solution of the state equation
  Eigen::VectorXd T;       // scaled field lambda/(lambda+2) * T_star
  SolveReport rep;
};

// One assemble + one solve; source defaults to q(chi) from the material and
// can be overridden (per-element field). Boundary flux edges contribute to
// the load as well.
HeatState solve_heat_pair(const Grid& grid, const ElementField& chi,
                          const HeatMaterial& mat, const ResolvedBoundary& bcs,
                          double lambda, const SolverOptions& opts = {},
                          const ElementField* source_override = nullptr,
                          const Eigen::VectorXd* warm = nullptr);

Eigen::VectorXd solve_heat_state(const Grid& grid, const ElementField& chi,
                                 const HeatMaterial& mat,
                                 const ResolvedBoundary& bcs,
                                 const SolverOptions& opts = {});
Eigen::VectorXd solve_heat_scaled(const Grid& grid, const ElementField& chi,
                                  const HeatMaterial& mat,
                                  const ResolvedBoundary& bcs, double lambda,
                                  const SolverOptions& opts = {});

}  // namespace topopt
