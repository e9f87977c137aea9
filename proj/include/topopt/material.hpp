#pragma once

// Two-phase material models: compliance interpolation for elasticity and
// conductivity/source interpolation for heat, including the generalized
// power-mean interpolation with exponent p (p -> 0 is the geometric mean).

#include "topopt/errors.hpp"

namespace topopt {

enum class MechInterp { linear_compliance, linear_stiffness, power_mean };

struct MechMaterial {
  double e_max = 1.0;   // stiff phase Young's modulus
  double e_min = 1e-5;  // weak phase Young's modulus
  double nu = 0.3;  // Poisson ratio (plane stress)
  MechInterp interp = MechInterp::linear_compliance;
  double p = 1.0;  // exponent for power_mean interpolation
};

enum class HeatInterp { linear, power_mean };

struct HeatMaterial {
  double kappa1 = 10.0;  // conductivity of the material phase
  double kappa2 = 1.0;   // conductivity of the void phase
  double q1 = 1.0;       // heat source in the material phase
  double q2 = 100.0;     // heat source in the void phase
  HeatInterp interp = HeatInterp::linear;
  double p = 1.0;
};

// Generalized two-phase interpolation: the p-power mean of (k1, k2) with
// weight chi on k1. p = 1 is linear in chi, p -> 0 the geometric mean
// k1^chi * k2^(1-chi), p = -1 the harmonic mean. Monotone nondecreasing
// in p for fixed chi. k1, k2 must be positive.
double gmif_eval(double k1, double k2, double p, double chi);

// Derivative of gmif_eval with respect to chi.
double gmif_deriv(double k1, double k2, double p, double chi);

// Compliance 1/E(chi) of the blended material; chi must lie in [0, 1].
// For the default interpolation this is affine in chi:
// (1/e_max - 1/e_min) * chi + 1/e_min.
double compliance_A(const MechMaterial& mat, double chi);

// d/dchi of compliance_A.
double compliance_A_deriv(const MechMaterial& mat, double chi);

struct HeatCoeffs {
  double kappa = 0.0;
  double q = 0.0;
  double dkappa = 0.0;
  double dq = 0.0;
};

// Conductivity and volumetric source at density chi (in [0, 1]) plus their
// chi-derivatives. The source is always the linear blend q1*chi+q2*(1-chi);
// the conductivity follows mat.interp.
HeatCoeffs heat_coefficients(const HeatMaterial& mat, double chi);

}  // namespace topopt
