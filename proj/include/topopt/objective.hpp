#pragma once

// Penalized objective functionals for both physics: the inner-minimum term,
// full evaluations against frozen state fields (with the inner term
// re-solved), descent fields, and the physical objectives reported in run
// histories.

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "topopt/fem.hpp"
#include "topopt/grid.hpp"
#include "topopt/material.hpp"
#include "topopt/perimeter.hpp"

namespace topopt {

enum class ConstraintMode { inequality, equality };
enum class Formulation { stress, displacement_adjoint };

struct PenaltyParams {
  double lambda = 1.0;  // penalty weight
  double gamma = 0.1;   // perimeter weight
  double eps = 0.0;     // smoothing/perimeter length scale
  double beta = 0.3;    // volume fraction
  double delta = 0.0;   // line-search termination measure (area units)
  ConstraintMode constraint = ConstraintMode::inequality;
  Formulation formulation = Formulation::stress;
  int max_outer_iters = 500;
};

// Throws config_error on hard violations (gamma < 0, eps <= 0, beta outside
// (0,1), delta <= 0, negative iteration budget, lambda <= 0). Returns
// warnings: the stress-form equivalence guarantee wants lambda > 1/2, which
// is advisory for mechanisms and not applicable to the heat functional.
std::vector<std::string> validate_params(const PenaltyParams& p,
                                         bool heat_physics);

struct ObjectiveBreakdown {
  double total = 0.0;
  double physical = 0.0;          // mutual-energy term (dissipation for heat)
  double penalty_residual = 0.0;  // lambda * (g~ - min g~), >= -solver tol
  double perimeter = 0.0;         // (gamma/eps) * P
  double volume = 0.0;            // mean density, in [0, 1]
};

// Inner minimum over admissible states at a fixed (smoothed) design:
// both solves, their stresses, and the value l_in(u) + l_out(v).
struct GEval {
  double value = 0.0;
  StressField sigma, rho;
  Eigen::VectorXd u, v;
  double l_in_u = 0, l_out_u = 0, l_in_v = 0, l_out_v = 0;
};

GEval eval_G(const ElementField& chi_eps, const Grid& grid,
             const MechMaterial& mat, const ResolvedBoundary& bcs,
             const SolverOptions& opts = {}, const GEval* warm = nullptr);

struct MechEval {
  ObjectiveBreakdown parts;
  GEval inner;           // fresh inner solves at this design
  double g_tilde = 0.0;  // frozen-stress self-energy term
  // Self-consistent objective at this design, evaluated from the inner
  // solves (zero penalty residual by construction).
  double fresh_total = 0.0;
};

// L(chi; sigma, rho) with the stress fields held fixed and the inner
// minimum re-solved at chi. chi is the raw design; the material terms see
// its smoothed version, the perimeter the raw field.
MechEval eval_L_mech(const ElementField& chi, const StressField& sigma,
                     const StressField& rho, const PenaltyParams& params,
                     const Grid& grid, const MechMaterial& mat,
                     const KernelSpec& kernel, const ResolvedBoundary& bcs,
                     const SolverOptions& opts = {},
                     const GEval* warm = nullptr);

// Gradient field of eval_L_mech at the current iterate (stresses at their
// inner optimum): smoothed mutual-energy sensitivity plus the perimeter
// subgradient. The descent direction is -d.
ElementField descent_field_mech(const ElementField& chi,
                                const StressField& sigma,
                                const StressField& rho,
                                const PenaltyParams& params, const Grid& grid,
                                const MechMaterial& mat,
                                const KernelSpec& kernel);

struct HeatEval {
  ObjectiveBreakdown parts;
  Eigen::VectorXd T_star_inner;  // re-solved state at this design
  double a_T = 0.0;              // dissipation of the frozen field
  double l_T = 0.0;              // source work of the frozen field
  // Self-consistent objective at this design from the re-solved state;
  // NaN when the inner source was overridden.
  double fresh_total = 0.0;
};

// L(chi; T) with the scaled temperature held fixed and the inner state
// re-solved at chi's conductivity. The inner solve's source defaults to
// q(chi); source_override freezes it (used by the gradient diagnostics so
// the finite-difference derivative matches descent_field_heat exactly).
HeatEval eval_L_heat(const ElementField& chi, const Eigen::VectorXd& T_fixed,
                     const PenaltyParams& params, const Grid& grid,
                     const HeatMaterial& mat, const KernelSpec& kernel,
                     const ResolvedBoundary& bcs,
                     const SolverOptions& opts = {},
                     const ElementField* source_override = nullptr,
                     const Eigen::VectorXd* warm = nullptr);

// Gradient field of the heat functional: conductivity terms from the frozen
// scaled field and the re-solved state, source term from the element-mean
// temperature, plus the perimeter subgradient.
ElementField descent_field_heat(const ElementField& chi,
                                const Eigen::VectorXd& T,
                                const Eigen::VectorXd& T_star,
                                const PenaltyParams& params, const Grid& grid,
                                const HeatMaterial& mat,
                                const KernelSpec& kernel);

// J = l_out(u): work of the output load against the state displacement.
double physical_objective_mech(const Grid& grid, const ResolvedBoundary& bcs,
                               const Eigen::VectorXd& u);

// J = integral q(chi) T dx (+ boundary flux work) at the scaled field.
double physical_objective_heat(const Grid& grid, const ElementField& chi,
                               const HeatMaterial& mat,
                               const ResolvedBoundary& bcs,
                               const Eigen::VectorXd& T);

}  // namespace topopt
