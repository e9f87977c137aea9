#include "topopt/oracle.hpp"

#include <algorithm>
#include <cmath>

namespace topopt::oracle {

OracleReport make_report(const std::string& quantity, double main,
                         double reference, double rel_tol) {
  OracleReport r;
  r.quantity = quantity;
  r.main = main;
  r.reference = reference;
  r.abs_err = std::abs(main - reference);
  r.rel_err = r.abs_err / std::max(std::abs(reference), 1e-30);
  r.pass = r.rel_err <= rel_tol;
  return r;
}

double fd_gradient(const std::function<double(const ElementField&)>& f,
                   const ElementField& chi, const ElementField& dir,
                   double t) {
  ElementField plus = chi, minus = chi;
  for (size_t e = 0; e < chi.size(); ++e) {
    plus[e] += t * dir[e];
    minus[e] -= t * dir[e];
  }
  return (f(plus) - f(minus)) / (2.0 * t);
}

double perimeter_double_sum(const Grid& grid, const ElementField& chi,
                            const KernelSpec& kernel) {
  const int nx = grid.nx, ny = grid.ny, K = kernel.taps;
  double acc = 0.0;
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const double ce = chi[grid.elem_id(i, j)];
      for (int dj = -K; dj <= K; ++dj) {
        const int jf = j + dj;
        if (jf < 0 || jf >= ny) continue;
        for (int di = -K; di <= K; ++di) {
          const int ifx = i + di;
          if (ifx < 0 || ifx >= nx) continue;
          const double w = kernel.w1d[di + K] * kernel.w1d[dj + K];
          acc += w * std::abs(ce - chi[grid.elem_id(ifx, jf)]);
        }
      }
    }
  return 0.5 * grid.h * grid.h * acc;
}

ElementField projection_bruteforce(const ElementField& chi_bar, double beta,
                                   ConstraintMode mode) {
  const size_t n = chi_bar.size();
  const size_t K = static_cast<size_t>(
      std::floor(beta * static_cast<double>(n) + 1e-12));
  std::vector<std::pair<double, size_t>> ranked(n);
  for (size_t e = 0; e < n; ++e) ranked[e] = {chi_bar[e], e};
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) {
                     return a.first > b.first;
                   });
  ElementField out(n, 0.0);
  if (K == 0) return out;
  if (mode == ConstraintMode::equality) {
    for (size_t k = 0; k < K; ++k) out[ranked[k].second] = 1.0;
  } else {
    const double c =
        K < n ? ranked[K].first : ranked[n - 1].first - 1.0;
    for (size_t k = 0; k < n && ranked[k].first > c; ++k)
      out[ranked[k].second] = 1.0;
  }
  return out;
}

namespace {

// 2x2 Gauss rule on the reference square [-1, 1]^2.
constexpr double kGauss = 0.57735026918962576;

void shape_gradients(double xi, double eta, double h, double dndx[4],
                     double dndy[4]) {
  const double sx[4] = {-1.0, 1.0, 1.0, -1.0};
  const double sy[4] = {-1.0, -1.0, 1.0, 1.0};
  for (int a = 0; a < 4; ++a) {
    dndx[a] = 0.25 * sx[a] * (1.0 + sy[a] * eta) * 2.0 / h;
    dndy[a] = 0.25 * sy[a] * (1.0 + sx[a] * xi) * 2.0 / h;
  }
}

Eigen::VectorXd dense_solve(Eigen::MatrixXd K, Eigen::VectorXd rhs,
                            const std::vector<int>& fixed_dofs,
                            const std::vector<double>& fixed_vals) {
  const long n = K.rows();
  if (n > 2000) throw usage_error("dense_solve: capped at 2000 unknowns");
  // Eliminate prescribed values symmetrically.
  for (size_t k = 0; k < fixed_dofs.size(); ++k) {
    const int d = fixed_dofs[k];
    const double v = fixed_vals[k];
    rhs -= v * K.col(d);
    K.row(d).setZero();
    K.col(d).setZero();
    K(d, d) = 1.0;
    rhs[d] = v;
  }
  Eigen::LDLT<Eigen::MatrixXd> ldlt(K);
  if (ldlt.info() != Eigen::Success || (ldlt.vectorD().array() <= 0.0).any())
    throw solver_error("dense_solve: matrix is not positive definite");
  return ldlt.solve(rhs);
}

}  // namespace

Eigen::VectorXd dense_solve_mech(const Grid& grid,
                                 const std::vector<double>& young, double nu,
                                 const std::vector<int>& fixed_dofs,
                                 const std::vector<double>& fixed_vals,
                                 const Eigen::VectorXd& rhs) {
  const int n = 2 * grid.n_nodes();
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n, n);
  const double h = grid.h;
  for (int e = 0; e < grid.n_elems(); ++e) {
    const double f = young[e] / (1.0 - nu * nu);
    const double c11 = f, c12 = f * nu, c33 = f * 0.5 * (1.0 - nu);
    double KE[8][8] = {};
    for (double gx : {-kGauss, kGauss})
      for (double gy : {-kGauss, kGauss}) {
        double dndx[4], dndy[4];
        shape_gradients(gx, gy, h, dndx, dndy);
        const double w = 0.25 * h * h;
        // B^T C B accumulated entry by entry.
        for (int a = 0; a < 4; ++a)
          for (int b = 0; b < 4; ++b) {
            KE[2 * a][2 * b] +=
                w * (c11 * dndx[a] * dndx[b] + c33 * dndy[a] * dndy[b]);
            KE[2 * a][2 * b + 1] +=
                w * (c12 * dndx[a] * dndy[b] + c33 * dndy[a] * dndx[b]);
            KE[2 * a + 1][2 * b] +=
                w * (c12 * dndy[a] * dndx[b] + c33 * dndx[a] * dndy[b]);
            KE[2 * a + 1][2 * b + 1] +=
                w * (c11 * dndy[a] * dndy[b] + c33 * dndx[a] * dndx[b]);
          }
      }
    const auto nodes = grid.elem_nodes(e);
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b)
        for (int da = 0; da < 2; ++da)
          for (int db = 0; db < 2; ++db)
            K(2 * nodes[a] + da, 2 * nodes[b] + db) +=
                KE[2 * a + da][2 * b + db];
  }
  return dense_solve(std::move(K), rhs, fixed_dofs, fixed_vals);
}

Eigen::VectorXd dense_solve_heat(const Grid& grid,
                                 const std::vector<double>& kappa,
                                 const std::vector<int>& fixed_dofs,
                                 const std::vector<double>& fixed_vals,
                                 const Eigen::VectorXd& rhs) {
  const int n = grid.n_nodes();
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n, n);
  const double h = grid.h;
  for (int e = 0; e < grid.n_elems(); ++e) {
    double KE[4][4] = {};
    for (double gx : {-kGauss, kGauss})
      for (double gy : {-kGauss, kGauss}) {
        double dndx[4], dndy[4];
        shape_gradients(gx, gy, h, dndx, dndy);
        const double w = 0.25 * h * h * kappa[e];
        for (int a = 0; a < 4; ++a)
          for (int b = 0; b < 4; ++b)
            KE[a][b] += w * (dndx[a] * dndx[b] + dndy[a] * dndy[b]);
      }
    const auto nodes = grid.elem_nodes(e);
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) K(nodes[a], nodes[b]) += KE[a][b];
  }
  return dense_solve(std::move(K), rhs, fixed_dofs, fixed_vals);
}

}  // namespace topopt::oracle
