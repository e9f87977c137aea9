#include "topopt/optimizer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace topopt {

ElementField gradient_step(const ElementField& chi, const ElementField& d,
                           double r) {
  if (chi.size() != d.size())
    throw usage_error("gradient_step: field sizes differ");
  ElementField out(chi.size());
  for (size_t e = 0; e < chi.size(); ++e) out[e] = chi[e] - r * d[e];
  return out;
}

ElementField project_volume(const ElementField& chi_bar, double beta,
                            ConstraintMode mode) {
  const size_t n = chi_bar.size();
  for (double x : chi_bar)
    if (!std::isfinite(x))
      throw domain_error("project_volume: field must be finite");
  // Cell budget; the epsilon guards against 0.3*N landing just below an
  // integer.
  const size_t K = static_cast<size_t>(
      std::floor(beta * static_cast<double>(n) + 1e-12));

  ElementField out(n, 0.0);
  if (K == 0) return out;

  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (chi_bar[a] != chi_bar[b]) return chi_bar[a] > chi_bar[b];
    return a < b;
  });

  if (mode == ConstraintMode::equality) {
    for (size_t k = 0; k < K; ++k) out[order[k]] = 1.0;
    return out;
  }
  // Inequality: threshold at the (K+1)-th largest value and keep the strict
  // superlevel set, so ties at the threshold drop out and the volume bound
  // is never exceeded.
  const double c = K < n ? chi_bar[order[K]] : chi_bar[order[n - 1]] - 1.0;
  for (size_t e = 0; e < n; ++e)
    if (chi_bar[e] > c) out[e] = 1.0;
  return out;
}

double r_min_init(const ElementField& d) {
  double m = 0.0;
  for (double x : d) m = std::max(m, std::abs(x));
  return 0.5 / std::max(m, 1e-12);
}

LineSearchResult line_search(const ElementField& chi_k, double L_k,
                             const ElementField& d, double beta,
                             ConstraintMode mode, double delta,
                             double cell_area, const TrialEval& eval,
                             double r_max_cap, int max_steps) {
  LineSearchResult res;
  res.chi = chi_k;
  res.L = L_k;

  double dmax = 0.0;
  for (double x : d) dmax = std::max(dmax, std::abs(x));
  if (dmax == 0.0) {
    res.zero_direction = true;
    return res;
  }

  // A tight initial bracket keeps accepted steps near the smallest move that
  // flips the extreme-sensitivity cells, so a run refines detail over many
  // iterations instead of exhausting the descent in a few bulk moves; the
  // bracket widens below whenever it is too small to move anything.
  double r_min = r_min_init(d);
  double r_max = r_max_cap > 0.0 ? r_max_cap : 2.0 * r_min;
  r_min = std::min(r_min, r_max);
  const double tie_tol = 1e-14 * std::abs(L_k);

  for (int step = 0; step < max_steps; ++step) {
    const double r = 0.5 * (r_min + r_max);
    res.r = r;
    const ElementField chi_bar =
        project_volume(gradient_step(chi_k, d, r), beta, mode);

    if (chi_bar == chi_k) {
      // Step too small to move a single cell past the threshold.
      r_min = r;
      if (r_max - r_min <= 1e-12 * r_max) r_max *= 10.0;
      continue;
    }

    auto [L_bar, payload] = eval(chi_bar);
    ++res.trials;
    if (L_bar < L_k - tie_tol) {
      res.chi = chi_bar;
      res.L = L_bar;
      res.accepted = true;
      res.payload = std::move(payload);
      return res;
    }
    r_max = r;
    if (L_bar > L_k + tie_tol) {
      double moved = 0.0;
      for (size_t e = 0; e < chi_bar.size(); ++e)
        moved += std::abs(chi_bar[e] - chi_k[e]);
      if (moved * cell_area <= delta) return res;  // decrease needs < delta
    }
  }
  return res;
}

namespace {

double field_volume(const ElementField& chi) {
  double s = 0.0;
  for (double x : chi) s += x;
  return chi.empty() ? 0.0 : s / static_cast<double>(chi.size());
}

void check_feasible(const ElementField& chi, const PenaltyParams& p) {
  const double n = static_cast<double>(chi.size());
  const double target = std::floor(p.beta * n + 1e-12);
  double ones = 0.0;
  for (double x : chi) {
    if (x != 0.0 && x != 1.0)
      throw solver_error("optimizer: projected iterate is not binary");
    ones += x;
  }
  if (p.constraint == ConstraintMode::inequality ? ones > target
                                                 : ones != target)
    throw solver_error("optimizer: projected iterate violates the volume "
                       "constraint");
}

struct LoopHooks {
  // Evaluate at the current design and return (self-consistent L, payload).
  std::function<std::pair<double, std::shared_ptr<void>>(const ElementField&)>
      base_eval;
  // Descent field at the current design given the payload's states.
  std::function<ElementField(const ElementField&, const std::shared_ptr<void>&)>
      descent;
  // Frozen-state trial evaluation given the base payload.
  std::function<std::pair<double, std::shared_ptr<void>>(
      const ElementField&, const std::shared_ptr<void>&)>
      trial_eval;
  // Self-consistent total from a trial payload.
  std::function<double(const std::shared_ptr<void>&)> fresh_total;
  // History row pieces from an accepted payload.
  std::function<double(const ElementField&, const std::shared_ptr<void>&)>
      physical;
  std::function<double(const std::shared_ptr<void>&)> perimeter;
};

RunResult descent_loop(const Grid& grid, const PenaltyParams& params,
                       const ElementField& chi0, const LoopHooks& hooks,
                       const IterateCallback& on_iterate) {
  if (static_cast<int>(chi0.size()) != grid.n_elems())
    throw usage_error("optimizer: initial design size does not match grid");
  for (double x : chi0)
    if (!(x >= 0.0) || !(x <= 1.0))
      throw domain_error("optimizer: initial design outside [0,1]");

  const auto t_start = std::chrono::steady_clock::now();
  auto seconds_since = [](std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
  };

  RunResult run;
  run.chi = chi0;
  run.termination = "iteration budget";

  ElementField chi = chi0;
  auto [L, payload] = hooks.base_eval(chi);
  ++run.total_evals;

  const double cell_area = grid.h * grid.h;
  int stalls = 0;
  int accepted_iters = 0;

  for (int outer = 0; outer < params.max_outer_iters; ++outer) {
    const auto t_iter = std::chrono::steady_clock::now();
    const ElementField d = hooks.descent(chi, payload);

    // Frozen states for every trial in this search come from the current
    // payload; the inner minimum term is re-solved per trial inside
    // trial_eval.
    TrialEval trial = [&](const ElementField& chi_bar) {
      return hooks.trial_eval(chi_bar, payload);
    };

    bool accepted = false;
    LineSearchResult ls;
    double L_next = L;
    std::shared_ptr<void> payload_next;
    double r_cap = 0.0;
    int eval_count = 0;

    // A frozen-state decrease almost always survives the self-consistent
    // re-evaluation; when it does not, cap the step and search again.
    for (int attempt = 0; attempt < 8; ++attempt) {
      ls = line_search(chi, L, d, params.beta, params.constraint, params.delta,
                       cell_area, trial, r_cap);
      eval_count += ls.trials;
      run.total_evals += ls.trials;
      run.line_search_steps += std::max(0, ls.trials - 1);
      if (ls.zero_direction || !ls.accepted) break;
      const double fresh = hooks.fresh_total(ls.payload);
      if (fresh < L - 1e-14 * std::abs(L)) {
        accepted = true;
        L_next = fresh;
        payload_next = ls.payload;
        break;
      }
      r_cap = ls.r;  // retry below the step that failed the re-evaluation
    }

    if (ls.zero_direction) {
      run.termination = "converged";
      break;
    }
    if (!accepted) {
      if (++stalls >= 2) {
        run.termination = "converged";
        break;
      }
      continue;
    }

    stalls = 0;
    chi = ls.chi;
    check_feasible(chi, params);
    L = L_next;
    payload = payload_next;
    ++accepted_iters;

    IterateRecord rec;
    rec.iter = accepted_iters;
    rec.L = L;
    rec.J = hooks.physical(chi, payload);
    rec.perimeter = hooks.perimeter(payload);
    rec.volume = field_volume(chi);
    rec.r = ls.r;
    rec.trials = eval_count;
    rec.seconds = seconds_since(t_iter);
    if (!run.history.empty() && !(rec.L < run.history.back().L))
      throw solver_error("optimizer: objective failed to decrease strictly");
    run.history.push_back(rec);
    if (on_iterate) on_iterate(rec, chi);
  }

  run.chi = chi;
  run.L = L;
  run.J = hooks.physical(chi, payload);
  run.perimeter = hooks.perimeter(payload);
  run.volume = field_volume(chi);
  run.seconds = seconds_since(t_start);
  return run;
}

}  // namespace

RunResult optimize_mech(const Grid& grid, const ResolvedBoundary& bcs,
                        const MechMaterial& mat, const PenaltyParams& params,
                        const ElementField& chi0, const SolverOptions& opts,
                        const IterateCallback& on_iterate) {
  validate_params(params, false);
  if (bcs.dofs_per_node != 2)
    throw usage_error("optimize_mech: boundary is not elastic");
  const KernelSpec kernel = make_kernel(params.eps, grid.h);

  LoopHooks hooks;
  hooks.base_eval = [&](const ElementField& chi) {
    const ElementField chi_eps = convolve(grid, chi, kernel);
    auto g = std::make_shared<GEval>(eval_G(chi_eps, grid, mat, bcs, opts));
    // Self-consistent total at chi: mutual term from the inner states plus
    // the perimeter (penalty residual vanishes by construction).
    auto ev = std::make_shared<MechEval>(
        eval_L_mech(chi, g->sigma, g->rho, params, grid, mat, kernel, bcs,
                    opts, g.get()));
    return std::make_pair(ev->fresh_total, std::static_pointer_cast<void>(ev));
  };
  hooks.descent = [&](const ElementField& chi,
                      const std::shared_ptr<void>& p) {
    const auto& ev = *std::static_pointer_cast<MechEval>(p);
    return descent_field_mech(chi, ev.inner.sigma, ev.inner.rho, params, grid,
                              mat, kernel);
  };
  hooks.trial_eval = [&](const ElementField& chi_bar,
                         const std::shared_ptr<void>& p) {
    const auto& base = *std::static_pointer_cast<MechEval>(p);
    auto ev = std::make_shared<MechEval>(
        eval_L_mech(chi_bar, base.inner.sigma, base.inner.rho, params, grid,
                    mat, kernel, bcs, opts, &base.inner));
    const double total = ev->parts.total;
    return std::make_pair(total, std::static_pointer_cast<void>(ev));
  };
  hooks.fresh_total = [](const std::shared_ptr<void>& p) {
    return std::static_pointer_cast<MechEval>(p)->fresh_total;
  };
  hooks.physical = [](const ElementField&, const std::shared_ptr<void>& p) {
    return std::static_pointer_cast<MechEval>(p)->inner.l_out_u;
  };
  hooks.perimeter = [](const std::shared_ptr<void>& p) {
    return std::static_pointer_cast<MechEval>(p)->parts.perimeter;
  };

  return descent_loop(grid, params, chi0, hooks, on_iterate);
}

RunResult optimize_heat(const Grid& grid, const ResolvedBoundary& bcs,
                        const HeatMaterial& mat, const PenaltyParams& params,
                        const ElementField& chi0, const SolverOptions& opts,
                        const IterateCallback& on_iterate) {
  validate_params(params, true);
  if (bcs.dofs_per_node != 1)
    throw usage_error("optimize_heat: boundary is not thermal");
  const KernelSpec kernel = make_kernel(params.eps, grid.h);
  const double scale = params.lambda / (params.lambda + 2.0);

  struct HeatPayload {
    HeatEval ev;
    Eigen::VectorXd T;  // scaled field at this design
  };

  LoopHooks hooks;
  hooks.base_eval = [&](const ElementField& chi) {
    const HeatState st =
        solve_heat_pair(grid, chi, mat, bcs, params.lambda, opts);
    auto p = std::make_shared<HeatPayload>();
    p->ev = eval_L_heat(chi, st.T, params, grid, mat, kernel, bcs, opts,
                        nullptr, &st.T_star);
    p->T = scale * p->ev.T_star_inner;
    return std::make_pair(p->ev.fresh_total,
                          std::static_pointer_cast<void>(p));
  };
  hooks.descent = [&](const ElementField& chi,
                      const std::shared_ptr<void>& pv) {
    const auto& p = *std::static_pointer_cast<HeatPayload>(pv);
    return descent_field_heat(chi, p.T, p.ev.T_star_inner, params, grid, mat,
                              kernel);
  };
  hooks.trial_eval = [&](const ElementField& chi_bar,
                         const std::shared_ptr<void>& pv) {
    const auto& base = *std::static_pointer_cast<HeatPayload>(pv);
    auto p = std::make_shared<HeatPayload>();
    p->ev = eval_L_heat(chi_bar, base.T, params, grid, mat, kernel, bcs, opts,
                        nullptr, &base.ev.T_star_inner);
    p->T = scale * p->ev.T_star_inner;
    const double total = p->ev.parts.total;
    return std::make_pair(total, std::static_pointer_cast<void>(p));
  };
  hooks.fresh_total = [](const std::shared_ptr<void>& pv) {
    return std::static_pointer_cast<HeatPayload>(pv)->ev.fresh_total;
  };
  hooks.physical = [&](const ElementField& chi,
                       const std::shared_ptr<void>& pv) {
    const auto& p = *std::static_pointer_cast<HeatPayload>(pv);
    return physical_objective_heat(grid, chi, mat, bcs, p.T);
  };
  hooks.perimeter = [](const std::shared_ptr<void>& pv) {
    return std::static_pointer_cast<HeatPayload>(pv)->ev.parts.perimeter;
  };

  return descent_loop(grid, params, chi0, hooks, on_iterate);
}

}  // namespace topopt
