#include "topopt/material.hpp"

#include <cmath>

namespace topopt {

namespace {

void check_phases(double k1, double k2) {
  if (!(k1 > 0.0) || !(k2 > 0.0))
    throw domain_error("material: phase values must be positive");
}

// Smoothing and projection preserve [0, 1] only up to rounding, so absorb
// ulp-level excursions and reject anything larger.
double checked_chi(double chi) {
  constexpr double slack = 1e-9;
  if (!(chi >= -slack) || !(chi <= 1.0 + slack))
    throw domain_error("material: density must lie in [0, 1]");
  return std::min(1.0, std::max(0.0, chi));
}

// Exponents this close to zero are treated as the geometric-mean limit;
// the power form loses all precision well before that.
constexpr double kGeometricLimit = 1e-12;

}  // namespace

double gmif_eval(double k1, double k2, double p, double chi) {
  check_phases(k1, k2);
  if (std::abs(p) < kGeometricLimit)
    return std::pow(k1, chi) * std::pow(k2, 1.0 - chi);
  const double base = (std::pow(k1, p) - std::pow(k2, p)) * chi + std::pow(k2, p);
  if (!(base > 0.0))
    throw domain_error("material: interpolation left the positive domain");
  return std::pow(base, 1.0 / p);
}

double gmif_deriv(double k1, double k2, double p, double chi) {
  check_phases(k1, k2);
  if (std::abs(p) < kGeometricLimit)
    return gmif_eval(k1, k2, 0.0, chi) * std::log(k1 / k2);
  const double d = std::pow(k1, p) - std::pow(k2, p);
  const double base = d * chi + std::pow(k2, p);
  if (!(base > 0.0))
    throw domain_error("material: interpolation left the positive domain");
  return std::pow(base, 1.0 / p - 1.0) * d / p;
}

double compliance_A(const MechMaterial& mat, double chi) {
  chi = checked_chi(chi);
  check_phases(mat.e_max, mat.e_min);
  switch (mat.interp) {
    case MechInterp::linear_compliance:
      return (1.0 / mat.e_max - 1.0 / mat.e_min) * chi + 1.0 / mat.e_min;
    case MechInterp::linear_stiffness:
      return 1.0 / ((mat.e_max - mat.e_min) * chi + mat.e_min);
    case MechInterp::power_mean:
      return 1.0 / gmif_eval(mat.e_max, mat.e_min, mat.p, chi);
  }
  return 0.0;
}

double compliance_A_deriv(const MechMaterial& mat, double chi) {
  chi = checked_chi(chi);
  check_phases(mat.e_max, mat.e_min);
  switch (mat.interp) {
    case MechInterp::linear_compliance:
      return 1.0 / mat.e_max - 1.0 / mat.e_min;
    case MechInterp::linear_stiffness: {
      const double e = (mat.e_max - mat.e_min) * chi + mat.e_min;
      return -(mat.e_max - mat.e_min) / (e * e);
    }
    case MechInterp::power_mean: {
      const double e = gmif_eval(mat.e_max, mat.e_min, mat.p, chi);
      return -gmif_deriv(mat.e_max, mat.e_min, mat.p, chi) / (e * e);
    }
  }
  return 0.0;
}

HeatCoeffs heat_coefficients(const HeatMaterial& mat, double chi) {
  chi = checked_chi(chi);
  check_phases(mat.kappa1, mat.kappa2);
  HeatCoeffs c;
  if (mat.interp == HeatInterp::linear) {
    c.kappa = (mat.kappa1 - mat.kappa2) * chi + mat.kappa2;
    c.dkappa = mat.kappa1 - mat.kappa2;
  } else {
    c.kappa = gmif_eval(mat.kappa1, mat.kappa2, mat.p, chi);
    c.dkappa = gmif_deriv(mat.kappa1, mat.kappa2, mat.p, chi);
  }
  c.q = (mat.q1 - mat.q2) * chi + mat.q2;
  c.dq = mat.q1 - mat.q2;
  return c;
}

}  // namespace topopt
