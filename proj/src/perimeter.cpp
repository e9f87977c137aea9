#include "topopt/perimeter.hpp"

#include <algorithm>
#include <cmath>

namespace topopt {

KernelSpec make_kernel(double eps, double h) {
  if (!(eps > 0.0))
    throw config_error("kernel: smoothing radius eps must be positive");
  if (!(h > 0.0))
    throw config_error("kernel: cell size h must be positive");
  KernelSpec k;
  k.eps = eps;
  k.h = h;
  k.r_t = 4.0 * eps;
  k.taps = static_cast<int>(std::floor(k.r_t / h + 1e-12));
  k.w1d.assign(2 * k.taps + 1, 0.0);
  double sum = 0.0;
  for (int i = -k.taps; i <= k.taps; ++i) {
    const double x = i * h / eps;
    const double w = std::exp(-0.5 * x * x);
    k.w1d[i + k.taps] = w;
    sum += w;
  }
  for (double& w : k.w1d) w /= sum;
  return k;
}

ElementField convolve(const Grid& grid, const ElementField& field,
                      const KernelSpec& kernel) {
  if (static_cast<int>(field.size()) != grid.n_elems())
    throw domain_error("convolve: field size does not match grid");
  const int nx = grid.nx, ny = grid.ny, K = kernel.taps;
  const auto& w = kernel.w1d;
  // Separable passes with zero extension outside the grid.
  ElementField tmp(field.size(), 0.0), out(field.size(), 0.0);
  for (int j = 0; j < ny; ++j) {
    const double* row = field.data() + static_cast<size_t>(j) * nx;
    double* trow = tmp.data() + static_cast<size_t>(j) * nx;
    for (int i = 0; i < nx; ++i) {
      double acc = 0.0;
      const int lo = std::max(-K, -i), hi = std::min(K, nx - 1 - i);
      for (int d = lo; d <= hi; ++d) acc += w[d + K] * row[i + d];
      trow[i] = acc;
    }
  }
  for (int j = 0; j < ny; ++j) {
    const int lo = std::max(-K, -j), hi = std::min(K, ny - 1 - j);
    double* orow = out.data() + static_cast<size_t>(j) * nx;
    for (int d = lo; d <= hi; ++d) {
      const double wd = w[d + K];
      const double* trow = tmp.data() + static_cast<size_t>(j + d) * nx;
      for (int i = 0; i < nx; ++i) orow[i] += wd * trow[i];
    }
  }
  return out;
}

double perimeter_value(const Grid& grid, const ElementField& chi,
                       const KernelSpec& kernel) {
  const ElementField sm = convolve(grid, chi, kernel);
  double acc = 0.0;
  for (size_t e = 0; e < chi.size(); ++e) acc += chi[e] * (1.0 - sm[e]);
  const double p = grid.h * grid.h * acc;
  return std::max(p, 0.0);
}

ElementField perimeter_subgrad(const Grid& grid, const ElementField& chi,
                               const KernelSpec& kernel) {
  ElementField g = convolve(grid, chi, kernel);
  for (size_t e = 0; e < chi.size(); ++e) g[e] = chi[e] - g[e];
  return g;
}

double c_g_constant(const KernelSpec&, double quad_radius) {
  // Simpson quadrature of the unit Gaussian mass and first absolute moment
  // on [-R, R]; by symmetry integrate [0, R] and double.
  const double R = quad_radius;
  const int n = 1 << 16;  // panels; even
  const double dx = R / n;
  double mass = 0.0, moment = 0.0;
  auto g = [](double x) { return std::exp(-0.5 * x * x); };
  for (int i = 0; i <= n; ++i) {
    const double x = i * dx;
    const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    mass += w * g(x);
    moment += w * g(x) * x;
  }
  mass *= dx / 3.0;
  moment *= dx / 3.0;
  // Normalized first absolute moment of G_1 is moment/mass; the calibration
  // constant is 2 / that.
  return 2.0 * mass / moment;
}

}  // namespace topopt
