#pragma once

// Outer descent loops: explicit gradient step, volume-constrained threshold
// projection onto binary designs, bisection line search with a minimum-move
// termination measure, and the drivers for both physics.

#include <functional>
#include <memory>
#include <string>

#include "topopt/objective.hpp"

namespace topopt {

// chi - r*d, elementwise, no clamping (the projection restores feasibility).
ElementField gradient_step(const ElementField& chi, const ElementField& d,
                           double r);

// Nearest feasible binary field. Inequality mode: 1 exactly on {chi > c}
// with c the smallest threshold whose strict superlevel set fits the volume
// budget. Equality mode: exactly floor(beta*N) ones, ties broken by
// descending value then ascending element index.
ElementField project_volume(const ElementField& chi_bar, double beta,
                            ConstraintMode mode);

// Largest step that cannot reorder any two cells: 1/2 / max|d|, with the
// max floored at 1e-12 to stay finite.
double r_min_init(const ElementField& d);

// One objective evaluation at a trial design: total L plus an opaque
// payload the driver can reuse (fresh states).
using TrialEval =
    std::function<std::pair<double, std::shared_ptr<void>>(const ElementField&)>;

struct LineSearchResult {
  ElementField chi;   // accepted design, or chi_k when not accepted
  double L = 0.0;     // objective at chi
  int trials = 0;     // objective evaluations performed
  double r = 0.0;     // accepted (or last tried) step
  bool accepted = false;
  bool zero_direction = false;  // d == 0: nothing to do, converged signal
  std::shared_ptr<void> payload;  // from the accepted evaluation
};

// Bisection on r in [r_min, r_max]: a trial that projects back onto chi_k
// raises r_min (growing r_max tenfold when the interval is exhausted); a
// strict decrease is accepted; an increase lowers r_max and, if the trial
// moved at most delta in L^1, terminates with chi_k; ties lower r_max.
// At most max_steps bisection steps. r_max_cap (when positive) overrides
// the initial r_max.
LineSearchResult line_search(const ElementField& chi_k, double L_k,
                             const ElementField& d, double beta,
                             ConstraintMode mode, double delta,
                             double cell_area, const TrialEval& eval,
                             double r_max_cap = 0.0, int max_steps = 60);

struct IterateRecord {
  int iter = 0;        // 1-based accepted-iterate index
  double L = 0.0;      // self-consistent objective after the step
  double J = 0.0;      // physical objective
  double perimeter = 0.0;
  double volume = 0.0;  // fraction of material cells
  double r = 0.0;
  int trials = 0;      // objective evaluations in this iterate's search
  double seconds = 0.0;  // wall time of the iteration
};

struct RunResult {
  ElementField chi;
  std::vector<IterateRecord> history;
  std::string termination;  // "converged" or "iteration budget"
  long total_evals = 0;     // objective evaluations over all line searches
  long line_search_steps = 0;  // evaluations beyond each search's first
  double seconds = 0.0;
  // Final-design quantities (valid even when history is empty).
  double L = 0.0;
  double J = 0.0;
  double perimeter = 0.0;
  double volume = 0.0;
};

using IterateCallback =
    std::function<void(const IterateRecord&, const ElementField&)>;

// Penalty-method descent for the mechanism problem. chi0 may be relaxed;
// every later iterate is binary and volume-feasible. The callback runs once
// per accepted iterate.
RunResult optimize_mech(const Grid& grid, const ResolvedBoundary& bcs,
                        const MechMaterial& mat, const PenaltyParams& params,
                        const ElementField& chi0,
                        const SolverOptions& opts = {},
                        const IterateCallback& on_iterate = nullptr);

// Same loop for the heat functional.
RunResult optimize_heat(const Grid& grid, const ResolvedBoundary& bcs,
                        const HeatMaterial& mat, const PenaltyParams& params,
                        const ElementField& chi0,
                        const SolverOptions& opts = {},
                        const IterateCallback& on_iterate = nullptr);

}  // namespace topopt
