#pragma once

// Artifact files: 8-bit binary graymaps and raw float64 fields for density
// snapshots, plus the run history CSV and summary document.

#include <string>
#include <vector>

#include "topopt/grid.hpp"
#include "topopt/optimizer.hpp"

namespace topopt {

// Binary graymap (P5, maxval 255): material is black, void is white, image
// row 0 is the top row of the domain. gray = round(255 * (1 - chi)).
void write_pgm(const std::string& path, const ElementField& chi, int nx,
               int ny);

// Inverse of write_pgm: chi = 1 - gray/255. Accepts '#' comments in the
// header; maxval must be 255.
ElementField read_pgm(const std::string& path, int& nx, int& ny);

// Raw little-endian float64, row-major from the bottom row (the in-memory
// field layout).
void write_raw(const std::string& path, const ElementField& chi);
ElementField read_raw(const std::string& path, size_t n_expected);

// Loads a density field from either format (sniffs the P5 magic) and checks
// it against the grid resolution and the [0, 1] range.
ElementField read_design(const std::string& path, const Grid& grid);

// One row per accepted iterate. With timings off the seconds column is
// written as 0.000 so identical runs produce identical bytes.
void write_history_csv(const std::string& path,
                       const std::vector<IterateRecord>& rows, bool timings);

// Small structured summary of a finished run.
void write_summary_json(const std::string& path, const RunResult& run);

}  // namespace topopt
