#pragma once

// Brute-force references for tests and diagnostics. Everything here is
// deliberately reimplemented from the definitions (dense algebra, double
// sums, full sorts) and never runs on the optimization path.

#include <Eigen/Dense>
#include <functional>
#include <string>

#include "topopt/objective.hpp"
#include "topopt/perimeter.hpp"

namespace topopt::oracle {

struct OracleReport {
  std::string quantity;
  double main = 0.0;
  double reference = 0.0;
  double abs_err = 0.0;
  double rel_err = 0.0;  // abs_err / max(|reference|, 1e-30)
  bool pass = false;
};

OracleReport make_report(const std::string& quantity, double main,
                         double reference, double rel_tol);

// Central difference (f(chi + t d) - f(chi - t d)) / (2 t).
double fd_gradient(const std::function<double(const ElementField&)>& f,
                   const ElementField& chi, const ElementField& dir,
                   double t = 1e-6);

// Interface measure as the symmetric double sum
// 1/2 sum_e sum_f w(e - f) |chi_e - chi_f| h^2 over cell pairs, with the
// same truncated-Gaussian weights as the fast path. Exact match for binary
// fields supported away from the boundary by the kernel radius.
double perimeter_double_sum(const Grid& grid, const ElementField& chi,
                            const KernelSpec& kernel);

// Volume projection by full stable sort.
ElementField projection_bruteforce(const ElementField& chi_bar, double beta,
                                   ConstraintMode mode);

// Dense factorization references with their own quadrature loops; capped at
// 2000 unknowns. fixed_dofs must be ascending; rhs is the full-length load.
Eigen::VectorXd dense_solve_mech(const Grid& grid,
                                 const std::vector<double>& young, double nu,
                                 const std::vector<int>& fixed_dofs,
                                 const std::vector<double>& fixed_vals,
                                 const Eigen::VectorXd& rhs);
Eigen::VectorXd dense_solve_heat(const Grid& grid,
                                 const std::vector<double>& kappa,
                                 const std::vector<int>& fixed_dofs,
                                 const std::vector<double>& fixed_vals,
                                 const Eigen::VectorXd& rhs);

}  // namespace topopt::oracle
