#include "topopt/problems.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "topopt/fem.hpp"
#include "topopt/io.hpp"

namespace topopt {

namespace {

Segment seg(Side side, double s0, double s1, BcKind kind, double v1 = 0.0,
            double v2 = 0.0, LoadRole role = LoadRole::input) {
  Segment s;
  s.side = side;
  s.s0 = s0;
  s.s1 = s1;
  s.kind = kind;
  s.v1 = v1;
  s.v2 = v2;
  s.role = role;
  return s;
}

MechMaterial benchmark_elastic() {
  MechMaterial m;
  m.e_max = 5000.0 * 8.0 / 3.0;
  m.e_min = 1e-5 * m.e_max;
  m.nu = 0.3;
  return m;
}

}  // namespace

ProblemConfig model_problem_1() {
  ProblemConfig cfg;
  cfg.physics = Physics::mechanism;
  cfg.grid = {400, 400, 1.0, 1.0};
  cfg.mech = benchmark_elastic();
  cfg.params.lambda = 1.0;
  cfg.params.gamma = 0.1;
  cfg.params.beta = 0.3;
  // Ports span 1/20 of their edge; clamps take the matching corner slivers.
  cfg.boundary.segments = {
      seg(Side::left, 0.00, 0.05, BcKind::clamp),
      seg(Side::left, 0.95, 1.00, BcKind::clamp),
      seg(Side::left, 0.475, 0.525, BcKind::traction, -2.0, 0.0,
          LoadRole::input),
      seg(Side::right, 0.475, 0.525, BcKind::traction, -1.0, 0.0,
          LoadRole::output),
  };
  return cfg;
}

ProblemConfig model_problem_2() {
  ProblemConfig cfg;
  cfg.physics = Physics::mechanism;
  cfg.grid = {600, 300, 2.0, 1.0};
  cfg.mech = benchmark_elastic();
  cfg.params.lambda = 1.0;
  cfg.params.gamma = 0.1;
  cfg.params.beta = 0.3;
  // The jaw pair sits around a notch at mid-height of the right edge; the
  // dummy loads pull the jaws apart, so minimizing closes the grip.
  cfg.boundary.segments = {
      seg(Side::left, 0.00, 0.05, BcKind::clamp),
      seg(Side::left, 0.95, 1.00, BcKind::clamp),
      seg(Side::left, 0.475, 0.525, BcKind::traction, 1.0, 0.0,
          LoadRole::input),
      seg(Side::right, 0.40, 0.45, BcKind::traction, 0.0, -1.0,
          LoadRole::output),
      seg(Side::right, 0.55, 0.60, BcKind::traction, 0.0, 1.0,
          LoadRole::output),
  };
  return cfg;
}

ProblemConfig heat_benchmark() {
  ProblemConfig cfg;
  cfg.physics = Physics::heat;
  cfg.grid = {600, 600, 1.0, 1.0};
  cfg.params.lambda = 0.1;
  cfg.params.gamma = 0.1;
  cfg.params.beta = 0.4;
  cfg.boundary.segments = {
      seg(Side::left, 0.40, 0.60, BcKind::temperature, 0.0),
  };
  cfg.init.kind = InitKind::strip;
  cfg.init.axis = 1;
  cfg.init.center = 0.5;
  cfg.init.width = 0.2;
  return cfg;
}

std::optional<ProblemConfig> builtin_config(const std::string& name) {
  if (name == "mech1") return model_problem_1();
  if (name == "mech2") return model_problem_2();
  if (name == "heat") return heat_benchmark();
  return std::nullopt;
}

namespace {

[[noreturn]] void fail_at(const std::string& where, const std::string& msg) {
  throw config_error(where + ": " + msg);
}

double parse_double(const std::string& v, const std::string& where) {
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (end != v.c_str() + v.size() || v.empty())
    fail_at(where, "expected a number, got `" + v + "`");
  return x;
}

int parse_int(const std::string& v, const std::string& where) {
  char* end = nullptr;
  const long x = std::strtol(v.c_str(), &end, 10);
  if (end != v.c_str() + v.size() || v.empty())
    fail_at(where, "expected an integer, got `" + v + "`");
  return static_cast<int>(x);
}

Segment parse_bc(const std::string& value, const std::string& where) {
  std::istringstream in(value);
  std::vector<std::string> tok;
  for (std::string t; in >> t;) tok.push_back(t);
  if (tok.size() < 4) fail_at(where, "bc needs `side s0 s1 kind ...`");

  static const std::map<std::string, Side> sides = {
      {"left", Side::left},
      {"right", Side::right},
      {"bottom", Side::bottom},
      {"top", Side::top}};
  static const std::map<std::string, BcKind> kinds = {
      {"clamp", BcKind::clamp},
      {"roller", BcKind::roller},
      {"traction", BcKind::traction},
      {"temperature", BcKind::temperature},
      {"flux", BcKind::flux}};

  Segment s;
  auto side = sides.find(tok[0]);
  if (side == sides.end()) fail_at(where, "unknown side `" + tok[0] + "`");
  s.side = side->second;
  s.s0 = parse_double(tok[1], where);
  s.s1 = parse_double(tok[2], where);
  auto kind = kinds.find(tok[3]);
  if (kind == kinds.end())
    fail_at(where, "unknown bc kind `" + tok[3] + "`");
  s.kind = kind->second;

  size_t want = 4;  // clamp, roller
  if (s.kind == BcKind::temperature || s.kind == BcKind::flux) want = 5;
  if (s.kind == BcKind::traction) want = 6;
  if (tok.size() < want ||
      tok.size() > want + (s.kind == BcKind::traction ? 1 : 0))
    fail_at(where, "wrong number of values for `" + tok[3] + "`");
  if (want >= 5) s.v1 = parse_double(tok[4], where);
  if (want >= 6) s.v2 = parse_double(tok[5], where);
  if (tok.size() == 7) {
    if (tok[6] == "input")
      s.role = LoadRole::input;
    else if (tok[6] == "output")
      s.role = LoadRole::output;
    else
      fail_at(where, "load role must be `input` or `output`");
  }
  return s;
}

// Parser bookkeeping shared between key sources.
struct SeenKeys {
  std::set<std::string> keys;
  bool has(const std::string& k) const { return keys.count(k) > 0; }
};

}  // namespace

void apply_key(ProblemConfig& cfg, const std::string& key,
               const std::string& value, const std::string& where) {
  auto num = [&] { return parse_double(value, where); };
  auto integer = [&] { return parse_int(value, where); };

  if (key == "schema_version") {
    if (integer() != 1) fail_at(where, "unsupported schema_version");
  } else if (key == "physics") {
    if (value == "mechanism")
      cfg.physics = Physics::mechanism;
    else if (value == "heat")
      cfg.physics = Physics::heat;
    else
      fail_at(where, "physics must be `mechanism` or `heat`");
  } else if (key == "nx") {
    cfg.grid.nx = integer();
  } else if (key == "ny") {
    cfg.grid.ny = integer();
  } else if (key == "lx") {
    cfg.grid.lx = num();
  } else if (key == "ly") {
    cfg.grid.ly = num();
  } else if (key == "e_max") {
    cfg.mech.e_max = num();
  } else if (key == "e_min") {
    cfg.mech.e_min = num();
  } else if (key == "nu") {
    cfg.mech.nu = num();
  } else if (key == "interp") {
    if (value == "linear_compliance")
      cfg.mech.interp = MechInterp::linear_compliance;
    else if (value == "linear_stiffness")
      cfg.mech.interp = MechInterp::linear_stiffness;
    else if (value == "power_mean")
      cfg.mech.interp = MechInterp::power_mean;
    else
      fail_at(where, "interp must be linear_compliance, linear_stiffness or "
                     "power_mean");
  } else if (key == "kappa1") {
    cfg.heat.kappa1 = num();
  } else if (key == "kappa2") {
    cfg.heat.kappa2 = num();
  } else if (key == "q1") {
    cfg.heat.q1 = num();
  } else if (key == "q2") {
    cfg.heat.q2 = num();
  } else if (key == "kappa_interp") {
    if (value == "linear")
      cfg.heat.interp = HeatInterp::linear;
    else if (value == "power_mean")
      cfg.heat.interp = HeatInterp::power_mean;
    else
      fail_at(where, "kappa_interp must be linear or power_mean");
  } else if (key == "p") {
    cfg.mech.p = cfg.heat.p = num();
  } else if (key == "lambda") {
    cfg.params.lambda = num();
  } else if (key == "gamma") {
    cfg.params.gamma = num();
  } else if (key == "eps") {
    cfg.params.eps = num();
  } else if (key == "beta") {
    cfg.params.beta = num();
  } else if (key == "delta") {
    cfg.params.delta = num();
  } else if (key == "constraint") {
    if (value == "inequality")
      cfg.params.constraint = ConstraintMode::inequality;
    else if (value == "equality")
      cfg.params.constraint = ConstraintMode::equality;
    else
      fail_at(where, "constraint must be `inequality` or `equality`");
  } else if (key == "formulation") {
    if (value == "stress")
      cfg.params.formulation = Formulation::stress;
    else if (value == "displacement")
      cfg.params.formulation = Formulation::displacement_adjoint;
    else
      fail_at(where, "formulation must be `stress` or `displacement`");
  } else if (key == "max_iters") {
    cfg.params.max_outer_iters = integer();
  } else if (key == "init") {
    if (value == "uniform")
      cfg.init.kind = InitKind::uniform;
    else if (value == "strip")
      cfg.init.kind = InitKind::strip;
    else if (value == "file")
      cfg.init.kind = InitKind::file;
    else
      fail_at(where, "init must be uniform, strip or file");
  } else if (key == "init_axis") {
    if (value == "x")
      cfg.init.axis = 0;
    else if (value == "y")
      cfg.init.axis = 1;
    else
      fail_at(where, "init_axis must be `x` or `y`");
  } else if (key == "init_center") {
    cfg.init.center = num();
  } else if (key == "init_width") {
    cfg.init.width = num();
  } else if (key == "init_file") {
    cfg.init.path = value;
  } else if (key == "bc") {
    cfg.boundary.segments.push_back(parse_bc(value, where));
  } else {
    fail_at(where, "unknown key `" + key + "`");
  }
}

ProblemConfig parse_config(const std::string& text,
                           const std::string& origin) {
  ProblemConfig cfg;
  SeenKeys seen;
  bool saw_lambda = false;

  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  char loc[512];
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos)
      line.erase(hash);

    size_t col = line.find_first_not_of(" \t\r");
    if (col == std::string::npos) continue;
    std::snprintf(loc, sizeof loc, "%s:%d:%d", origin.c_str(), lineno,
                  static_cast<int>(col) + 1);

    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      fail_at(loc, "expected `key = value`");
    std::string key = line.substr(col, eq - col);
    key.erase(key.find_last_not_of(" \t") + 1);
    if (key.empty() || key.find_first_of(" \t") != std::string::npos)
      fail_at(loc, "malformed key");

    std::string value = line.substr(eq + 1);
    value.erase(0, value.find_first_not_of(" \t"));
    value.erase(value.find_last_not_of(" \t\r") + 1);

    apply_key(cfg, key, value, loc);
    seen.keys.insert(key);
    if (key == "lambda") saw_lambda = true;
  }

  for (const char* k : {"schema_version", "physics", "nx", "ny", "beta"})
    if (!seen.has(k))
      throw config_error(origin + ": missing required key `" +
                         std::string(k) + "`");

  // The unstated side length defaults to whatever keeps the cells square.
  if (cfg.grid.nx > 0 && cfg.grid.ny > 0) {
    if (!seen.has("ly"))
      cfg.grid.ly = cfg.grid.lx * cfg.grid.ny / cfg.grid.nx;
    else if (!seen.has("lx"))
      cfg.grid.lx = cfg.grid.ly * cfg.grid.nx / cfg.grid.ny;
  }

  if (!saw_lambda) {
    if (cfg.physics == Physics::heat)
      cfg.params.lambda = 0.1;
    else
      cfg.params.lambda =
          cfg.params.formulation == Formulation::displacement_adjoint ? 25.0 : 1.0;
  }
  return cfg;
}

std::string serialize_config(const ProblemConfig& cfg) {
  std::ostringstream out;
  char buf[64];
  auto put = [&](const char* key, double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << key << " = " << buf << "\n";
  };

  out << "schema_version = 1\n";
  out << "physics = "
      << (cfg.physics == Physics::heat ? "heat" : "mechanism") << "\n";
  out << "nx = " << cfg.grid.nx << "\n";
  out << "ny = " << cfg.grid.ny << "\n";
  put("lx", cfg.grid.lx);
  put("ly", cfg.grid.ly);
  if (cfg.physics == Physics::mechanism) {
    put("e_max", cfg.mech.e_max);
    put("e_min", cfg.mech.e_min);
    put("nu", cfg.mech.nu);
    out << "interp = "
        << (cfg.mech.interp == MechInterp::linear_compliance
                ? "linear_compliance"
                : cfg.mech.interp == MechInterp::linear_stiffness
                      ? "linear_stiffness"
                      : "power_mean")
        << "\n";
    if (cfg.mech.interp == MechInterp::power_mean) put("p", cfg.mech.p);
  } else {
    put("kappa1", cfg.heat.kappa1);
    put("kappa2", cfg.heat.kappa2);
    put("q1", cfg.heat.q1);
    put("q2", cfg.heat.q2);
    out << "kappa_interp = "
        << (cfg.heat.interp == HeatInterp::linear ? "linear" : "power_mean")
        << "\n";
    if (cfg.heat.interp == HeatInterp::power_mean) put("p", cfg.heat.p);
  }
  put("lambda", cfg.params.lambda);
  put("gamma", cfg.params.gamma);
  put("eps", cfg.params.eps);
  put("beta", cfg.params.beta);
  put("delta", cfg.params.delta);
  out << "constraint = "
      << (cfg.params.constraint == ConstraintMode::equality ? "equality"
                                                            : "inequality")
      << "\n";
  if (cfg.physics == Physics::mechanism)
    out << "formulation = "
        << (cfg.params.formulation == Formulation::displacement_adjoint
                ? "displacement"
                : "stress")
        << "\n";
  out << "max_iters = " << cfg.params.max_outer_iters << "\n";

  switch (cfg.init.kind) {
    case InitKind::uniform:
      out << "init = uniform\n";
      break;
    case InitKind::strip:
      out << "init = strip\n";
      out << "init_axis = " << (cfg.init.axis == 0 ? "x" : "y") << "\n";
      put("init_center", cfg.init.center);
      put("init_width", cfg.init.width);
      break;
    case InitKind::file:
      out << "init = file\n";
      out << "init_file = " << cfg.init.path << "\n";
      break;
  }

  for (const Segment& s : cfg.boundary.segments) {
    static const char* side_names[] = {"left", "right", "bottom", "top"};
    out << "bc = " << side_names[static_cast<int>(s.side)];
    std::snprintf(buf, sizeof buf, " %.17g %.17g", s.s0, s.s1);
    out << buf;
    switch (s.kind) {
      case BcKind::clamp:
        out << " clamp";
        break;
      case BcKind::roller:
        out << " roller";
        break;
      case BcKind::temperature:
      case BcKind::flux:
        out << (s.kind == BcKind::temperature ? " temperature" : " flux");
        std::snprintf(buf, sizeof buf, " %.17g", s.v1);
        out << buf;
        break;
      case BcKind::traction:
        std::snprintf(buf, sizeof buf, " %.17g %.17g", s.v1, s.v2);
        out << " traction" << buf
            << (s.role == LoadRole::output ? " output" : " input");
        break;
    }
    out << "\n";
  }
  return out.str();
}

ProblemConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw config_error("cannot open config: " + path);
  std::ostringstream text;
  text << f.rdbuf();
  ProblemConfig cfg = parse_config(text.str(), path);
  validate_config(cfg);
  return cfg;
}

void save_config(const ProblemConfig& cfg, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw config_error("cannot open for writing: " + path);
  f << serialize_config(cfg);
  if (!f) throw config_error("write failed: " + path);
}

void scale_mesh(ProblemConfig& cfg, int nx) {
  if (nx <= 0) throw config_error("scale_mesh: nx must be positive");
  const double ratio = cfg.grid.ly / cfg.grid.lx;
  cfg.grid.nx = nx;
  cfg.grid.ny = static_cast<int>(std::lround(nx * ratio));
}

PenaltyParams effective_params(const ProblemConfig& cfg, const Grid& grid) {
  PenaltyParams p = cfg.params;
  if (p.eps == 0.0) p.eps = grid.h;
  if (p.delta == 0.0) p.delta = grid.h * grid.h;
  return p;
}

Grid validate_config(const ProblemConfig& cfg) {
  const Grid grid = build_grid(cfg.grid);
  validate_params(effective_params(cfg, grid), cfg.physics == Physics::heat);

  if (cfg.physics == Physics::mechanism) {
    if (!(cfg.mech.e_max > 0.0) || !(cfg.mech.e_min > 0.0) ||
        cfg.mech.e_min > cfg.mech.e_max)
      throw config_error("material: need 0 < e_min <= e_max");
    if (!(cfg.mech.nu > -1.0) || !(cfg.mech.nu < 0.5))
      throw config_error("material: nu must lie in (-1, 0.5)");
  } else {
    if (!(cfg.heat.kappa1 > 0.0) || !(cfg.heat.kappa2 > 0.0))
      throw config_error("material: conductivities must be positive");
  }

  const ResolvedBoundary bcs = resolve_boundary(grid, cfg.boundary);
  const int want = cfg.physics == Physics::mechanism ? 2 : 1;
  if (bcs.dofs_per_node != want)
    throw config_error("boundary kinds do not match the configured physics");

  if (cfg.init.kind == InitKind::strip) {
    if (cfg.init.axis != 0 && cfg.init.axis != 1)
      throw config_error("init: strip axis must be x or y");
    if (!(cfg.init.width > 0.0) ||
        cfg.init.center - 0.5 * cfg.init.width < -1e-12 ||
        cfg.init.center + 0.5 * cfg.init.width > 1.0 + 1e-12)
      throw config_error("init: strip must lie inside the domain");
  }
  if (cfg.init.kind == InitKind::file && cfg.init.path.empty())
    throw config_error("init: missing init_file");
  return grid;
}

ElementField initial_design(const ProblemConfig& cfg, const Grid& grid) {
  switch (cfg.init.kind) {
    case InitKind::uniform:
      return ElementField(grid.n_elems(), cfg.params.beta);
    case InitKind::strip: {
      ElementField chi(grid.n_elems(), 0.0);
      const double len = cfg.init.axis == 0 ? grid.lx : grid.ly;
      const double lo = (cfg.init.center - 0.5 * cfg.init.width) * len;
      const double hi = (cfg.init.center + 0.5 * cfg.init.width) * len;
      for (int e = 0; e < grid.n_elems(); ++e) {
        const double c =
            cfg.init.axis == 0 ? grid.centroid_x(e) : grid.centroid_y(e);
        if (c >= lo && c <= hi) chi[e] = 1.0;
      }
      return chi;
    }
    case InitKind::file:
      return read_design(cfg.init.path, grid);
  }
  throw usage_error("initial_design: unreachable");
}

void dry_run(const ProblemConfig& cfg) {
  const Grid grid = validate_config(cfg);
  const ResolvedBoundary bcs = resolve_boundary(grid, cfg.boundary);
  const PenaltyParams params = effective_params(cfg, grid);
  const ElementField chi0 = initial_design(cfg, grid);
  if (cfg.physics == Physics::mechanism) {
    const KernelSpec kernel = make_kernel(params.eps, grid.h);
    solve_state_mech(grid, convolve(grid, chi0, kernel), cfg.mech, bcs);
  } else {
    solve_heat_state(grid, chi0, cfg.heat, bcs);
  }
}

}  // namespace topopt
