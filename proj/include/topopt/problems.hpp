#pragma once

// Built-in benchmark configurations and the plain-text config format
// (key = value lines, versioned, with repeated `bc` lines for boundary
// segments).

#include <optional>
#include <string>

#include "topopt/objective.hpp"

namespace topopt {

enum class Physics { mechanism, heat };

enum class InitKind { uniform, strip, file };

struct InitSpec {
  InitKind kind = InitKind::uniform;
  int axis = 1;          // strip: 0 bands along x, 1 bands along y
  double center = 0.5;   // strip center as a fraction of the axis length
  double width = 0.2;    // strip width as a fraction
  std::string path;      // density file (graymap or raw float64)
};

struct ProblemConfig {
  Physics physics = Physics::mechanism;
  GridSpec grid;
  BoundarySpec boundary;
  MechMaterial mech;     // used when physics == mechanism
  HeatMaterial heat;     // used when physics == heat
  PenaltyParams params;  // eps == 0 or delta == 0 mean grid defaults
  InitSpec init;
};

// Force inverter: unit square, corner clamps and centered ports on the
// left/right edges, horizontal input/output loads.
ProblemConfig model_problem_1();

// Gripper: 2x1 domain, input port on the left edge, jaw pair around a notch
// on the right edge pulling apart (minimization closes them).
ProblemConfig model_problem_2();

// Design-dependent heat dissipation on the unit square: strong conductor in
// the material phase, strong source in the void phase, one cold segment on
// the left edge, horizontal strip start.
ProblemConfig heat_benchmark();

// mech1 / mech2 / heat; nullopt for anything else.
std::optional<ProblemConfig> builtin_config(const std::string& name);

// Parse/serialize the config document. parse_config reports errors with
// origin:line:column; apply_key is the shared assignment path also used for
// command-line overrides (its location string takes the place of line/col).
ProblemConfig parse_config(const std::string& text, const std::string& origin);
void apply_key(ProblemConfig& cfg, const std::string& key,
               const std::string& value, const std::string& where);
std::string serialize_config(const ProblemConfig& cfg);

ProblemConfig load_config(const std::string& path);
void save_config(const ProblemConfig& cfg, const std::string& path);

// Rescale to nx columns, preserving the aspect ratio (and square cells);
// everything that is not mesh-derived stays untouched.
void scale_mesh(ProblemConfig& cfg, int nx);

// Penalty parameters with grid defaults substituted: eps = h when unset,
// delta = one cell area when unset.
PenaltyParams effective_params(const ProblemConfig& cfg, const Grid& grid);

// Builds the grid and checks every component invariant (parameters,
// boundary resolution, initial design legality).
Grid validate_config(const ProblemConfig& cfg);

ElementField initial_design(const ProblemConfig& cfg, const Grid& grid);

// Assemble + one state solve at the config's own resolution.
void dry_run(const ProblemConfig& cfg);

}  // namespace topopt
