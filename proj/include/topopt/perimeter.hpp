#pragma once

// Truncated Gaussian smoothing kernel on the element grid, the nonlocal
// perimeter functional built from it, and the calibration constant that
// relates the nonlocal value to geometric perimeter.

#include <vector>

#include "topopt/grid.hpp"

namespace topopt {

// Separable 2D Gaussian sampled at cell centers, truncated at radius
// 4*eps and normalized so the full 2D stencil sums to exactly 1.
struct KernelSpec {
  double eps = 0.0;
  double h = 0.0;
  double r_t = 0.0;          // truncation radius, 4*eps
  int taps = 0;              // one-sided tap count K; offsets -K..K
  std::vector<double> w1d;   // 2K+1 weights, sum == 1
};

// eps and h must be positive.
KernelSpec make_kernel(double eps, double h);

// Convolution of a per-element field with the kernel, zero-extended
// outside the grid. Linear in the field; output range stays inside
// [min(0, min f), max(0, max f)].
ElementField convolve(const Grid& grid, const ElementField& field,
                      const KernelSpec& kernel);

// Nonlocal perimeter h^2 * (sum chi - sum (G*chi) chi). Nonnegative for
// chi in [0,1]^N; on binary fields it equals the zero-extended pairwise
// interface sum exactly.
double perimeter_value(const Grid& grid, const ElementField& chi,
                       const KernelSpec& kernel);

// Subgradient field chi - G*chi of the perimeter at a binary design.
// Entries lie in [-1, 1]. Also exactly half the gradient of the quadratic
// relaxation h^2 * (sum chi^2 - sum (G*chi) chi).
ElementField perimeter_subgrad(const Grid& grid, const ElementField& chi,
                               const KernelSpec& kernel);

// Calibration constant 2 / integral(G_1(x) |x_d|) for the unit Gaussian,
// evaluated by 1D quadrature truncated at quad_radius standard deviations.
// Equals sqrt(2*pi) up to quadrature error; independent of kernel.eps.
double c_g_constant(const KernelSpec& kernel, double quad_radius = 6.0);

}  // namespace topopt
