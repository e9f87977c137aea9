#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <vector>

#include "topopt/errors.hpp"
#include "topopt/fem.hpp"
#include "topopt/grid.hpp"
#include "topopt/material.hpp"
#include "topopt/oracle.hpp"

using namespace topopt;

namespace {

const SolverOptions kDirect{SolveEngine::direct, 1e-12, 0};

// Clamp-and-pull layout used by several solve tests: clamps at the left
// corners, input traction at left mid-edge, output at right mid-edge.
BoundarySpec pull_spec(double tin, double tout) {
  BoundarySpec spec;
  spec.segments.push_back({Side::left, 0.0, 0.1, BcKind::clamp});
  spec.segments.push_back({Side::left, 0.9, 1.0, BcKind::clamp});
  spec.segments.push_back(
      {Side::left, 0.45, 0.55, BcKind::traction, tin, 0.0, LoadRole::input});
  spec.segments.push_back(
      {Side::right, 0.45, 0.55, BcKind::traction, tout, 0.0,
       LoadRole::output});
  return spec;
}

ElementField uniform(const Grid& g, double v) {
  return ElementField(static_cast<std::size_t>(g.nx) * g.ny, v);
}

ElementField random_binary(const Grid& g, unsigned seed) {
  std::mt19937 rng(seed);
  std::bernoulli_distribution coin(0.5);
  ElementField chi(static_cast<std::size_t>(g.nx) * g.ny);
  for (double& v : chi) v = coin(rng) ? 1.0 : 0.0;
  return chi;
}

// Dense scatter of per-element matrices into the full (unconstrained)
// matrix, straight from the definition.
Eigen::MatrixXd scatter_dense(const Grid& g, const ElementField& coeff,
                              int dofs_per_node, double nu) {
  int n_nodes = (g.nx + 1) * (g.ny + 1);
  Eigen::MatrixXd A =
      Eigen::MatrixXd::Zero(n_nodes * dofs_per_node, n_nodes * dofs_per_node);
  Eigen::MatrixXd ke;
  if (dofs_per_node == 2)
    ke = element_stiffness_elastic(nu, g.h);
  else
    ke = element_stiffness_scalar(g.h);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      auto nodes = g.elem_nodes(g.elem_id(i, j));
      double c = coeff[g.elem_id(i, j)];
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b)
          for (int da = 0; da < dofs_per_node; ++da)
            for (int db = 0; db < dofs_per_node; ++db)
              A(nodes[a] * dofs_per_node + da, nodes[b] * dofs_per_node + db) +=
                  c * ke(a * dofs_per_node + da, b * dofs_per_node + db);
    }
  return A;
}

// Rebuild the eliminated system as a dense matrix on all DOFs for
// comparisons (fixed DOFs rows/cols dropped).
Eigen::MatrixXd free_dense(const LinearSystem& sys) {
  return Eigen::MatrixXd(sys.A);
}

}  // namespace

TEST_SUITE("fem") {

TEST_CASE("elastic element matrix: symmetric, h-invariant, 3 rigid modes") {
  Matrix8d k1 = element_stiffness_elastic(0.3, 1.0);
  Matrix8d k2 = element_stiffness_elastic(0.3, 0.5);
  CHECK((k1 - k1.transpose()).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((k1 - k2).cwiseAbs().maxCoeff() < 1e-13);

  Eigen::SelfAdjointEigenSolver<Matrix8d> es(k1);
  const auto& ev = es.eigenvalues();
  double scale = ev.cwiseAbs().maxCoeff();
  int zeros = 0;
  for (int i = 0; i < 8; ++i) {
    CHECK(ev[i] > -1e-12 * scale);
    if (std::abs(ev[i]) < 1e-12 * scale) ++zeros;
  }
  CHECK(zeros == 3);

  // Rigid translations and the in-plane rotation are exactly in the kernel.
  double h = 1.0;
  Eigen::Matrix<double, 8, 1> tx, ty, rot;
  tx << 1, 0, 1, 0, 1, 0, 1, 0;
  ty << 0, 1, 0, 1, 0, 1, 0, 1;
  // corners (0,0), (h,0), (h,h), (0,h); rotation u = (-y, x)
  rot << 0, 0, 0, h, -h, h, -h, 0;
  CHECK((k1 * tx).cwiseAbs().maxCoeff() < 1e-13);
  CHECK((k1 * ty).cwiseAbs().maxCoeff() < 1e-13);
  CHECK((k1 * rot).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("scalar element matrix is the classic Q1 Laplace stencil") {
  Eigen::Matrix4d k = element_stiffness_scalar(0.25);
  CHECK((k - element_stiffness_scalar(1.0)).cwiseAbs().maxCoeff() < 1e-14);
  for (int i = 0; i < 4; ++i) {
    CHECK(k(i, i) == doctest::Approx(2.0 / 3.0).epsilon(1e-13));
    int opp = (i + 2) % 4;
    CHECK(k(i, opp) == doctest::Approx(-1.0 / 3.0).epsilon(1e-13));
    CHECK(k(i, (i + 1) % 4) == doctest::Approx(-1.0 / 6.0).epsilon(1e-13));
  }
  // Kernel = constants only.
  Eigen::Vector4d ones = Eigen::Vector4d::Ones();
  CHECK((k * ones).cwiseAbs().maxCoeff() < 1e-14);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(k);
  CHECK(es.eigenvalues()[0] < 1e-14);
  CHECK(es.eigenvalues()[1] > 1e-3);
}

TEST_CASE("assembly equals the definitional scatter") {
  ResolvedBoundary none_heat;
  none_heat.dofs_per_node = 1;
  ResolvedBoundary none_mech;
  none_mech.dofs_per_node = 2;

  SUBCASE("uniform coefficient on a 2x2 grid") {
    Grid g = build_grid({2, 2, 1.0, 1.0});
    LinearSystem sys = assemble(g, uniform(g, 1.0), none_heat);
    Eigen::MatrixXd want = scatter_dense(g, uniform(g, 1.0), 1, 0.3);
    CHECK((free_dense(sys) - want).cwiseAbs().maxCoeff() < 1e-14);

    LinearSystem sys2 = assemble(g, uniform(g, 2.0), none_heat);
    CHECK((free_dense(sys2) - 2.0 * want).cwiseAbs().maxCoeff() < 1e-14);
  }

  SUBCASE("random coefficients on a 3x3 grid, both physics") {
    Grid g = build_grid({3, 3, 1.0, 1.0});
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> u(0.1, 3.0);
    ElementField c1(9), c2(9), sum(9);
    for (int e = 0; e < 9; ++e) {
      c1[e] = u(rng);
      c2[e] = u(rng);
      sum[e] = c1[e] + c2[e];
    }
    for (int dofs = 1; dofs <= 2; ++dofs) {
      const ResolvedBoundary& bcs = dofs == 1 ? none_heat : none_mech;
      Eigen::MatrixXd a1 = free_dense(assemble(g, c1, bcs));
      Eigen::MatrixXd a2 = free_dense(assemble(g, c2, bcs));
      Eigen::MatrixXd want = scatter_dense(g, c1, dofs, 0.3);
      CHECK((a1 - want).cwiseAbs().maxCoeff() < 1e-13);
      // Linearity in the coefficient field.
      Eigen::MatrixXd asum = free_dense(assemble(g, sum, bcs));
      CHECK((asum - a1 - a2).cwiseAbs().maxCoeff() < 1e-13);
    }
  }

  SUBCASE("nonpositive or missized coefficients are rejected") {
    Grid g = build_grid({2, 2, 1.0, 1.0});
    ElementField bad = uniform(g, 1.0);
    bad[3] = 0.0;
    CHECK_THROWS_AS(assemble(g, bad, none_heat), assembly_error);
    bad[3] = -0.5;
    CHECK_THROWS_AS(assemble(g, bad, none_heat), assembly_error);
    CHECK_THROWS_AS(assemble(g, ElementField(3, 1.0), none_heat),
                    assembly_error);
  }
}

TEST_CASE("zero load with homogeneous constraints gives the zero solution") {
  Grid g = build_grid({4, 4, 1.0, 1.0});
  BoundarySpec spec;
  spec.segments.push_back({Side::left, 0.0, 1.0, BcKind::temperature, 0.0});
  ResolvedBoundary bcs = resolve_boundary(g, spec);
  LinearSystem sys = assemble(g, uniform(g, 1.0), bcs);
  Eigen::VectorXd x =
      solve_linear(sys, Eigen::VectorXd::Zero((g.nx + 1) * (g.ny + 1)));
  CHECK(x.norm() == 0.0);
}

TEST_CASE("singular system is reported, not returned") {
  Grid g = build_grid({3, 3, 1.0, 1.0});
  ResolvedBoundary none;
  none.dofs_per_node = 1;  // no Dirichlet data: pure Neumann Laplacian
  LinearSystem sys = assemble(g, uniform(g, 1.0), none);
  Eigen::VectorXd b = Eigen::VectorXd::Ones(16);
  CHECK_THROWS_AS(solve_linear(sys, b), solver_error);
  CHECK_THROWS_AS(solve_linear(sys, b, kDirect), solver_error);
}

TEST_CASE("patch test: uniaxial stress state is reproduced exactly") {
  Grid g = build_grid({8, 8, 1.0, 1.0});
  BoundarySpec spec;
  spec.segments.push_back({Side::left, 0.0, 1.0, BcKind::roller});
  spec.segments.push_back({Side::bottom, 0.0, 1.0, BcKind::roller});
  spec.segments.push_back(
      {Side::right, 0.0, 1.0, BcKind::traction, 1.0, 0.0, LoadRole::input});
  ResolvedBoundary bcs = resolve_boundary(g, spec);

  MechMaterial mat;  // e_max = 1, nu = 0.3
  ElementField chi = uniform(g, 1.0);
  Eigen::VectorXd u = solve_state_mech(g, chi, mat, bcs, kDirect);

  // sigma_xx = 1 uniaxial: u_x = x, u_y = -nu y.
  for (int n = 0; n < (g.nx + 1) * (g.ny + 1); ++n) {
    CHECK(std::abs(u[2 * n] - g.node_x(n)) < 1e-9);
    CHECK(std::abs(u[2 * n + 1] + 0.3 * g.node_y(n)) < 1e-9);
  }

  StressField s = compute_stress(g, chi, mat, u);
  for (int e = 0; e < s.n_elems; ++e)
    for (int gp = 0; gp < 4; ++gp) {
      CHECK(std::abs(s.gp[12 * e + 3 * gp + 0] - 1.0) < 1e-9);
      CHECK(std::abs(s.gp[12 * e + 3 * gp + 1]) < 1e-9);
      CHECK(std::abs(s.gp[12 * e + 3 * gp + 2]) < 1e-9);
    }
  auto c = s.centroid(10);
  CHECK(c[0] == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("stress of a rigid translation vanishes") {
  Grid g = build_grid({4, 4, 1.0, 1.0});
  Eigen::VectorXd u(2 * 25);
  for (int n = 0; n < 25; ++n) {
    u[2 * n] = 0.7;
    u[2 * n + 1] = -0.3;
  }
  StressField s = compute_stress(g, uniform(g, 1.0), MechMaterial{}, u);
  for (double v : s.gp) CHECK(std::abs(v) < 1e-14);
}

TEST_CASE("stress scales with the weak-phase modulus as chi -> 0") {
  Grid g = build_grid({4, 4, 1.0, 1.0});
  Eigen::VectorXd u(2 * 25);
  for (int n = 0; n < 25; ++n) {
    u[2 * n] = g.node_x(n) + 0.25 * g.node_y(n);
    u[2 * n + 1] = -0.1 * g.node_y(n);
  }
  MechMaterial mat;
  StressField s1 = compute_stress(g, uniform(g, 1.0), mat, u);
  StressField s0 = compute_stress(g, uniform(g, 0.0), mat, u);
  // 1/A(1) = e_max = 1, 1/A(0) = e_min = 1e-5.
  for (std::size_t i = 0; i < s1.gp.size(); ++i)
    CHECK(s0.gp[i] == doctest::Approx(1e-5 * s1.gp[i]).epsilon(1e-12));
}

TEST_CASE("1d heat: nodally exact parabola, and the scaled variant") {
  Grid g = build_grid({16, 4, 1.0, 0.25});
  BoundarySpec spec;
  spec.segments.push_back({Side::left, 0.0, 1.0, BcKind::temperature, 0.0});
  spec.segments.push_back({Side::right, 0.0, 1.0, BcKind::temperature, 0.0});
  ResolvedBoundary bcs = resolve_boundary(g, spec);

  HeatMaterial mat;  // kappa1 = 10, q1 = 1 in the material phase
  ElementField chi = uniform(g, 1.0);
  Eigen::VectorXd T = solve_heat_state(g, chi, mat, bcs, kDirect);

  double kappa = 10.0, q = 1.0;
  double tmax = q / (8.0 * kappa);
  for (int n = 0; n < (g.nx + 1) * (g.ny + 1); ++n) {
    double x = g.node_x(n);
    double want = q * x * (1.0 - x) / (2.0 * kappa);
    CHECK(std::abs(T[n] - want) < 1e-8 * tmax);
  }

  double lambda = 0.1;
  Eigen::VectorXd Ts =
      solve_heat_scaled(g, chi, mat, bcs, lambda, kDirect);
  double factor = lambda / (lambda + 2.0);
  CHECK(factor == doctest::Approx(0.047619047619).epsilon(1e-10));
  for (int n = 0; n < (g.nx + 1) * (g.ny + 1); ++n)
    CHECK(std::abs(Ts[n] - factor * T[n]) < 1e-10 * tmax);
}

TEST_CASE("scaled temperature limits in the penalty weight") {
  Grid g = build_grid({8, 8, 1.0, 1.0});
  BoundarySpec spec;
  spec.segments.push_back({Side::left, 0.4, 0.6, BcKind::temperature, 0.0});
  ResolvedBoundary bcs = resolve_boundary(g, spec);
  ElementField chi = random_binary(g, 21);
  HeatMaterial mat;

  HeatState big = solve_heat_pair(g, chi, mat, bcs, 1e9, kDirect);
  CHECK((big.T - big.T_star).norm() <= 1e-6 * big.T_star.norm());

  HeatState small = solve_heat_pair(g, chi, mat, bcs, 0.1, kDirect);
  CHECK((small.T - (0.1 / 2.1) * small.T_star).norm() <=
        1e-12 * small.T_star.norm());
}

TEST_CASE("boundary tractions integrate with the trapezoidal rule") {
  Grid g = build_grid({4, 4, 1.0, 1.0});
  BoundarySpec spec;
  spec.segments.push_back({Side::left, 0.0, 0.25, BcKind::clamp});
  spec.segments.push_back(
      {Side::right, 0.25, 0.75, BcKind::traction, 2.0, -1.0, LoadRole::input});
  ResolvedBoundary bcs = resolve_boundary(g, spec);
  Eigen::VectorXd f = boundary_load(g, bcs, LoadRole::input);

  double h = g.h;
  int lo = g.node_id(4, 1), mid = g.node_id(4, 2), hi = g.node_id(4, 3);
  CHECK(f[2 * lo] == doctest::Approx(2.0 * h / 2).epsilon(1e-14));
  CHECK(f[2 * lo + 1] == doctest::Approx(-1.0 * h / 2).epsilon(1e-14));
  CHECK(f[2 * mid] == doctest::Approx(2.0 * h).epsilon(1e-14));
  CHECK(f[2 * mid + 1] == doctest::Approx(-1.0 * h).epsilon(1e-14));
  CHECK(f[2 * hi] == doctest::Approx(2.0 * h / 2).epsilon(1e-14));
  // Total force = traction * loaded length.
  double fx = 0.0;
  for (int n = 0; n < 25; ++n) fx += f[2 * n];
  CHECK(fx == doctest::Approx(2.0 * 0.5).epsilon(1e-14));
  // No output-role loads were declared.
  CHECK(boundary_load(g, bcs, LoadRole::output).norm() == 0.0);
}

TEST_CASE("volumetric source spreads q h^2 / 4 to element corners") {
  Grid g = build_grid({2, 2, 1.0, 1.0});
  ElementField q = {1.0, 2.0, 3.0, 4.0};
  Eigen::VectorXd f = volume_source_load(g, q);
  double cell = g.h * g.h;
  CHECK(f[g.node_id(0, 0)] == doctest::Approx(1.0 * cell / 4).epsilon(1e-14));
  CHECK(f[g.node_id(2, 2)] == doctest::Approx(4.0 * cell / 4).epsilon(1e-14));
  CHECK(f[g.node_id(1, 1)] ==
        doctest::Approx((1.0 + 2.0 + 3.0 + 4.0) * cell / 4).epsilon(1e-14));
  CHECK(f.sum() == doctest::Approx((1 + 2 + 3 + 4) * cell).epsilon(1e-14));
}

TEST_CASE("doubling the input load doubles the displacement") {
  Grid g = build_grid({8, 8, 1.0, 1.0});
  ResolvedBoundary b1 = resolve_boundary(g, pull_spec(-2.0, -1.0));
  ResolvedBoundary b2 = resolve_boundary(g, pull_spec(-4.0, -1.0));
  ElementField chi = random_binary(g, 9);
  MechMaterial mat;
  Eigen::VectorXd u1 = solve_state_mech(g, chi, mat, b1, kDirect);
  Eigen::VectorXd u2 = solve_state_mech(g, chi, mat, b2, kDirect);
  CHECK((u2 - 2.0 * u1).norm() <= 1e-12 * u2.norm());
}

TEST_CASE("input and output work agree through the adjoint pair") {
  Grid g = build_grid({16, 16, 1.0, 1.0});
  ResolvedBoundary bcs = resolve_boundary(g, pull_spec(-2.0, -1.0));
  ElementField chi = random_binary(g, 3);
  MechState st = solve_mech_pair(g, chi, MechMaterial{}, bcs, kDirect);
  CHECK(std::abs(st.l_in_v - st.l_out_u) <= 1e-8 * std::abs(st.l_out_u));
  // Energy identity: a(u,u) computed from the stress samples equals the
  // input work.
  MechMaterial mat;
  double energy = 0.0;
  for (int e = 0; e < st.sigma.n_elems; ++e)
    energy += g.h * g.h * compliance_A(mat, chi[e]) *
              stress_pair_mean(st.sigma, st.sigma, mat.nu, e);
  CHECK(energy == doctest::Approx(st.l_in_u).epsilon(1e-8));
}

TEST_CASE("uniform design matches the dense factorization reference") {
  Grid g = build_grid({4, 4, 1.0, 1.0});
  ResolvedBoundary bcs = resolve_boundary(g, pull_spec(-2.0, -1.0));
  MechMaterial mat;
  ElementField chi = uniform(g, 1.0);
  Eigen::VectorXd u = solve_state_mech(g, chi, mat, bcs, kDirect);

  std::vector<double> young(16, 1.0);  // 1/A(1) = e_max
  Eigen::VectorXd rhs = boundary_load(g, bcs, LoadRole::input);
  Eigen::VectorXd ref = oracle::dense_solve_mech(g, young, mat.nu,
                                                 bcs.fixed_dofs,
                                                 bcs.fixed_vals, rhs);
  CHECK((u - ref).norm() <= 1e-10 * ref.norm());

  // Same cross-check for the heat path.
  BoundarySpec hs;
  hs.segments.push_back({Side::left, 0.4, 0.6, BcKind::temperature, 0.0});
  ResolvedBoundary hbcs = resolve_boundary(g, hs);
  HeatMaterial hmat;
  Eigen::VectorXd T = solve_heat_state(g, chi, hmat, hbcs, kDirect);
  std::vector<double> kappa(16, 10.0);
  Eigen::VectorXd qload = volume_source_load(g, ElementField(16, 1.0));
  Eigen::VectorXd Tref = oracle::dense_solve_heat(g, kappa, hbcs.fixed_dofs,
                                                  hbcs.fixed_vals, qload);
  CHECK((T - Tref).norm() <= 1e-10 * Tref.norm());
}

TEST_CASE("iterative and direct engines agree to solver tolerance") {
  Grid g = build_grid({12, 12, 1.0, 1.0});
  ResolvedBoundary bcs = resolve_boundary(g, pull_spec(-2.0, -1.0));
  ElementField chi = random_binary(g, 17);
  MechMaterial mat;
  SolveReport rep;
  LinearSystem sys = assemble(
      g, [&] {
        ElementField c(chi.size());
        for (std::size_t e = 0; e < chi.size(); ++e)
          c[e] = 1.0 / compliance_A(mat, chi[e]);
        return c;
      }(), bcs, mat.nu);
  Eigen::VectorXd rhs = boundary_load(g, bcs, LoadRole::input);
  Eigen::VectorXd xi = solve_linear(sys, rhs, {}, nullptr, &rep);
  Eigen::VectorXd xd = solve_linear(sys, rhs, kDirect);
  CHECK(rep.iterations > 0);
  CHECK(rep.rel_residual <= 1e-9);
  CHECK((xi - xd).norm() <= 1e-6 * xd.norm());
}

TEST_CASE("compliance is nondecreasing under nested refinement") {
  MechMaterial mat;
  double prev = -1.0;
  for (int n : {20, 40}) {
    Grid g = build_grid({n, n, 1.0, 1.0});
    ResolvedBoundary bcs = resolve_boundary(g, pull_spec(-2.0, 0.0));
    Eigen::VectorXd u = solve_state_mech(g, uniform(g, 1.0), mat, bcs,
                                         kDirect);
    Eigen::VectorXd f = boundary_load(g, bcs, LoadRole::input);
    double compliance = f.dot(u);
    CHECK(compliance > 0.0);
    if (prev >= 0.0) CHECK(compliance >= prev * (1.0 - 1e-10));
    prev = compliance;
  }
}

}  // TEST_SUITE
