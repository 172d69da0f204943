#pragma once

// Sweep driver behind the precision-gain curves: evaluates the lossy
// interferometer pipeline over ranges of mean photon number, squeezing,
// displacement or transmissivity and writes deterministic, diff-able CSV
// files (17 significant digits, header row, '.' decimal separator).

#include <stdexcept>
#include <string>
#include <vector>

#include "gqfi/state.hpp"

namespace gqfi {

// File-system failures carry their own type so callers can map them to a
// distinct exit status.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class SweepMode { dsv, dsdv_fixed_alpha, dsdv_fixed_r, surface, custom };

// Axis and fixed-parameter bundle for one sweep.  The swept variable per
// mode:
//   dsv               n_bar in [axis_min, axis_max]; all photons squeezed
//   dsdv_fixed_alpha  n_bar in [axis_min, axis_max] at fixed per-mode
//                     |alpha|^2; points below the displacement floor
//                     2 * alpha2 are counted as skipped
//   dsdv_fixed_r      per-mode alpha in [axis_min, axis_max] at fixed r
//   surface           r_a, r_b in [0, asinh(sqrt(n_bar / 2))], per-mode
//                     |alpha_j|^2 = n_bar / 2 - sinh^2(r_j); negative
//                     displacement budgets are skipped
//   custom            eta in [axis_min, axis_max] at fixed alpha2, r_fixed
struct SweepSpec {
  SweepMode mode = SweepMode::dsv;
  std::vector<double> etas = {0.6, 0.8, 0.9, 0.95, 1.0};
  double axis_min = 0.1;
  double axis_max = 1e4;
  int n_points = 60;
  bool log_axis = true;       // log-spaced sweep axis
  double alpha2 = 10.0;       // per-mode |alpha|^2 (dsdv_fixed_alpha, custom)
  double r_fixed = 1.0;       // per-mode squeezing (dsdv_fixed_r, custom)
  double n_bar = 100.0;       // fixed total mean photon number (surface)
  int grid_size = 40;         // surface resolution per axis
  std::string output_path = "sweep.csv";
  bool single_file = false;   // merge eta curves, adding an eta column
  bool gnuplot_stub = false;  // also emit a companion .gp plotting script
};

// The documented per-mode defaults (axis ranges, eta sets, spacing).
SweepSpec default_spec(SweepMode mode);

// Throws std::invalid_argument on empty ranges or grids, transmissivities
// outside [0, 1], or a log axis that touches zero.
void validate(const SweepSpec& spec);

// One curve (or surface) at a single transmissivity; `eta` is ignored in
// custom mode, where the sweep axis is the transmissivity itself.  Rows
// hold the named columns in order; `skipped` counts infeasible points.
struct SweepResult {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  int skipped = 0;
};

SweepResult run_sweep(const SweepSpec& spec, double eta);

// Runs every transmissivity in the spec and writes one CSV per eta (the
// path gains an _eta<value> suffix) or one merged file with a leading eta
// column when single_file is set; custom mode always writes exactly one
// file.  Optionally writes a gnuplot stub next to the data.  Throws
// IoError when a file cannot be written.
struct SweepFiles {
  std::vector<std::string> paths;
  int skipped = 0;
};

SweepFiles write_sweep(const SweepSpec& spec);

// Parses a file written by write_sweep; numeric values round-trip
// bit-exactly.  Throws IoError if the file cannot be read and
// std::runtime_error if it is malformed.
SweepResult read_sweep_csv(const std::string& path);

// The CSV number format used throughout: %.17g.
std::string csv_number(double value);

}  // namespace gqfi
