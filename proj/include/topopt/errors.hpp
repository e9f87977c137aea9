#pragma once

#include <stdexcept>
#include <string>

namespace topopt {

// Error taxonomy. Every failure mode maps onto one of these so callers
// (CLI, bindings, tests) can translate them uniformly.

// Invalid problem setup: bad grid dimensions, malformed config files,
// boundary conditions that leave the system singular, ...
struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A value outside the mathematical domain of an operation
// (density outside [0,1], nonpositive stiffness, ...).
struct domain_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Inconsistent data handed to the assembler (nonpositive element
// coefficient, size mismatch).
struct assembly_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Linear solver breakdown or failure to reach the requested tolerance.
struct solver_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad command-line usage (unknown subcommand, missing argument).
struct usage_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace topopt
