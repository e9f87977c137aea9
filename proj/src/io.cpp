#include "topopt/io.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace topopt {

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw config_error("cannot open for writing: " + path);
  return f;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw config_error("cannot open for reading: " + path);
  return f;
}

// Next whitespace-delimited header token, skipping '#' comment lines.
std::string pgm_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  return tok;
}

}  // namespace

void write_pgm(const std::string& path, const ElementField& chi, int nx,
               int ny) {
  if (chi.size() != static_cast<size_t>(nx) * ny)
    throw usage_error("write_pgm: field size does not match resolution");
  auto f = open_out(path);
  f << "P5\n" << nx << " " << ny << "\n255\n";
  std::vector<unsigned char> row(nx);
  for (int j = ny - 1; j >= 0; --j) {
    const double* src = chi.data() + static_cast<size_t>(j) * nx;
    for (int i = 0; i < nx; ++i) {
      const double g = 255.0 * (1.0 - src[i]);
      row[i] = static_cast<unsigned char>(
          std::lround(std::min(255.0, std::max(0.0, g))));
    }
    f.write(reinterpret_cast<const char*>(row.data()), nx);
  }
  if (!f) throw config_error("write failed: " + path);
}

ElementField read_pgm(const std::string& path, int& nx, int& ny) {
  auto f = open_in(path);
  if (pgm_token(f) != "P5")
    throw config_error(path + ": not a binary graymap (P5)");
  try {
    nx = std::stoi(pgm_token(f));
    ny = std::stoi(pgm_token(f));
    if (std::stoi(pgm_token(f)) != 255)
      throw config_error(path + ": maxval must be 255");
  } catch (const std::invalid_argument&) {
    throw config_error(path + ": malformed graymap header");
  }
  if (nx <= 0 || ny <= 0) throw config_error(path + ": bad resolution");
  ElementField chi(static_cast<size_t>(nx) * ny);
  std::vector<unsigned char> row(nx);
  for (int j = ny - 1; j >= 0; --j) {
    f.read(reinterpret_cast<char*>(row.data()), nx);
    if (f.gcount() != nx) throw config_error(path + ": truncated pixel data");
    double* dst = chi.data() + static_cast<size_t>(j) * nx;
    for (int i = 0; i < nx; ++i) dst[i] = 1.0 - row[i] / 255.0;
  }
  return chi;
}

void write_raw(const std::string& path, const ElementField& chi) {
  auto f = open_out(path);
  f.write(reinterpret_cast<const char*>(chi.data()),
          static_cast<std::streamsize>(chi.size() * sizeof(double)));
  if (!f) throw config_error("write failed: " + path);
}

ElementField read_raw(const std::string& path, size_t n_expected) {
  auto f = open_in(path);
  ElementField chi(n_expected);
  f.read(reinterpret_cast<char*>(chi.data()),
         static_cast<std::streamsize>(n_expected * sizeof(double)));
  if (f.gcount() != static_cast<std::streamsize>(n_expected * sizeof(double)))
    throw config_error(path + ": file shorter than the grid");
  f.get();
  if (!f.eof()) throw config_error(path + ": file longer than the grid");
  return chi;
}

ElementField read_design(const std::string& path, const Grid& grid) {
  char magic[2] = {0, 0};
  open_in(path).read(magic, 2);
  ElementField chi;
  if (magic[0] == 'P' && magic[1] == '5') {
    int nx = 0, ny = 0;
    chi = read_pgm(path, nx, ny);
    if (nx != grid.nx || ny != grid.ny) {
      char buf[128];
      std::snprintf(buf, sizeof buf, "%s: resolution %dx%d, grid is %dx%d",
                    path.c_str(), nx, ny, grid.nx, grid.ny);
      throw config_error(buf);
    }
  } else {
    chi = read_raw(path, static_cast<size_t>(grid.n_elems()));
  }
  for (double x : chi)
    if (!(x >= 0.0) || !(x <= 1.0))
      throw config_error(path + ": densities must lie in [0, 1]");
  return chi;
}

void write_history_csv(const std::string& path,
                       const std::vector<IterateRecord>& rows, bool timings) {
  auto f = open_out(path);
  f << "iter,L,J,perimeter,volume,r,trials,seconds\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%d,%.12g,%.12g,%.12g,%.12g,%.12g,%d,%.3f\n",
                  r.iter, r.L, r.J, r.perimeter, r.volume, r.r, r.trials,
                  timings ? r.seconds : 0.0);
    f << buf;
  }
  if (!f) throw config_error("write failed: " + path);
}

void write_summary_json(const std::string& path, const RunResult& run) {
  nlohmann::json doc{
      {"L", run.L},
      {"J", run.J},
      {"perimeter", run.perimeter},
      {"volume", run.volume},
      {"iterations", run.history.size()},
      {"evaluations", run.total_evals},
      {"line_search_steps", run.line_search_steps},
      {"termination", run.termination},
  };
  auto f = open_out(path);
  f << doc.dump(2) << "\n";
  if (!f) throw config_error("write failed: " + path);
}

}  // namespace topopt
