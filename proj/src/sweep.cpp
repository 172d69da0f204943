#include "gqfi/sweep.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "gqfi/qfi.hpp"

namespace gqfi {

namespace {

// Feasibility slack for displacement budgets that land a rounding error
// below zero (grid edges where sinh^2 r exhausts the per-mode mean).
constexpr double kBudgetSlack = 1e-9;

double axis_point(const SweepSpec& spec, int index) {
  if (spec.n_points == 1) {
    return spec.axis_min;
  }
  const double t = double(index) / double(spec.n_points - 1);
  if (spec.log_axis) {
    return spec.axis_min * std::pow(spec.axis_max / spec.axis_min, t);
  }
  return spec.axis_min + t * (spec.axis_max - spec.axis_min);
}

// Squeezing that puts n_bar photons into a squeezed-vacuum pair.
double squeeze_for(double n_bar) {
  return std::asinh(std::sqrt(0.5 * n_bar));
}

ProductStateParams aligned_point(double alpha_abs, double r_a, double r_b) {
  ProductStateParams p;
  p.alpha_abs_a = p.alpha_abs_b = alpha_abs;
  p.r_a = r_a;
  p.r_b = r_b;
  return optimal_phases(p);
}

PrecisionReport report_at(const ProductStateParams& params, double eta) {
  ChannelConfig cfg;
  cfg.eta_a = cfg.eta_b = eta;
  return precision_report(params, cfg);
}

void append_report(std::vector<double>& row, const PrecisionReport& rep) {
  row.push_back(rep.n_bar);
  row.push_back(rep.qfi);
  row.push_back(rep.j_ratio);
  row.push_back(rep.delta_phi_bound);
}

SweepResult sweep_dsv(const SweepSpec& spec, double eta) {
  SweepResult result;
  result.columns = {"n_bar", "qfi", "j_ratio", "delta_phi_bound"};
  for (int i = 0; i < spec.n_points; ++i) {
    const double target = axis_point(spec, i);
    const PrecisionReport rep =
        report_at(aligned_point(0.0, squeeze_for(target), squeeze_for(target)),
                  eta);
    std::vector<double> row;
    append_report(row, rep);
    result.rows.push_back(std::move(row));
  }
  return result;
}

SweepResult sweep_dsdv_fixed_alpha(const SweepSpec& spec, double eta) {
  SweepResult result;
  result.columns = {"n_bar", "r",
                    "qfi",   "j_ratio",
                    "delta_phi_bound", "delta_j"};
  const double floor = 2.0 * spec.alpha2;
  for (int i = 0; i < spec.n_points; ++i) {
    const double target = axis_point(spec, i);
    // Per-mode squeezed photons left after the fixed displacement.
    double budget = 0.5 * (target - floor);
    if (budget < -kBudgetSlack * std::max(1.0, target)) {
      ++result.skipped;
      continue;
    }
    budget = std::max(budget, 0.0);
    const double r = std::asinh(std::sqrt(budget));
    const PrecisionReport rep =
        report_at(aligned_point(std::sqrt(spec.alpha2), r, r), eta);
    // Precision gap to the pure squeezed-vacuum input of equal mean.
    const double j_dsv =
        report_at(aligned_point(0.0, squeeze_for(rep.n_bar),
                                squeeze_for(rep.n_bar)),
                  eta)
            .j_ratio;
    std::vector<double> row = {rep.n_bar, r, rep.qfi, rep.j_ratio,
                               rep.delta_phi_bound, j_dsv - rep.j_ratio};
    result.rows.push_back(std::move(row));
  }
  return result;
}

SweepResult sweep_dsdv_fixed_r(const SweepSpec& spec, double eta) {
  SweepResult result;
  result.columns = {"alpha", "n_bar", "qfi", "j_ratio", "delta_phi_bound"};
  for (int i = 0; i < spec.n_points; ++i) {
    const double alpha = axis_point(spec, i);
    const PrecisionReport rep =
        report_at(aligned_point(alpha, spec.r_fixed, spec.r_fixed), eta);
    std::vector<double> row = {alpha};
    append_report(row, rep);
    result.rows.push_back(std::move(row));
  }
  return result;
}

SweepResult sweep_surface(const SweepSpec& spec, double eta) {
  SweepResult result;
  result.columns = {"r_a", "r_b",    "n_bar",
                    "qfi", "j_ratio", "delta_phi_bound"};
  const double half_mean = 0.5 * spec.n_bar;
  const double r_max = std::asinh(std::sqrt(half_mean));
  for (int ia = 0; ia < spec.grid_size; ++ia) {
    for (int ib = 0; ib < spec.grid_size; ++ib) {
      const double r_a = spec.grid_size == 1
                             ? 0.0
                             : r_max * ia / double(spec.grid_size - 1);
      const double r_b = spec.grid_size == 1
                             ? 0.0
                             : r_max * ib / double(spec.grid_size - 1);
      double budget_a = half_mean - std::sinh(r_a) * std::sinh(r_a);
      double budget_b = half_mean - std::sinh(r_b) * std::sinh(r_b);
      const double slack = kBudgetSlack * std::max(1.0, half_mean);
      if (budget_a < -slack || budget_b < -slack) {
        ++result.skipped;
        continue;
      }
      budget_a = std::max(budget_a, 0.0);
      budget_b = std::max(budget_b, 0.0);
      ProductStateParams p;
      p.alpha_abs_a = std::sqrt(budget_a);
      p.alpha_abs_b = std::sqrt(budget_b);
      p.r_a = r_a;
      p.r_b = r_b;
      const PrecisionReport rep = report_at(optimal_phases(p), eta);
      std::vector<double> row = {r_a, r_b};
      append_report(row, rep);
      result.rows.push_back(std::move(row));
    }
  }
  return result;
}

SweepResult sweep_custom(const SweepSpec& spec) {
  SweepResult result;
  result.columns = {"eta", "n_bar", "qfi", "j_ratio", "delta_phi_bound"};
  const ProductStateParams p = aligned_point(std::sqrt(spec.alpha2),
                                             spec.r_fixed, spec.r_fixed);
  for (int i = 0; i < spec.n_points; ++i) {
    const double eta = axis_point(spec, i);
    std::vector<double> row = {eta};
    append_report(row, report_at(p, eta));
    result.rows.push_back(std::move(row));
  }
  return result;
}

void write_csv(const std::string& path, const SweepResult& result) {
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot open output file: " + path);
  }
  for (std::size_t c = 0; c < result.columns.size(); ++c) {
    out << (c ? "," : "") << result.columns[c];
  }
  out << "\n";
  for (const auto& row : result.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      out << (c ? "," : "") << csv_number(row[c]);
    }
    out << "\n";
  }
  out.flush();
  if (!out) {
    throw IoError("write failed: " + path);
  }
}

// fig.csv -> fig_eta0.9.csv
std::string eta_path(const std::string& base, double eta) {
  char tag[32];
  std::snprintf(tag, sizeof tag, "_eta%g", eta);
  const std::size_t dot = base.find_last_of('.');
  const std::size_t slash = base.find_last_of('/');
  if (dot == std::string::npos ||
      (slash != std::string::npos && dot < slash)) {
    return base + tag;
  }
  return base.substr(0, dot) + tag + base.substr(dot);
}

std::string stub_path(const std::string& base) {
  const std::size_t dot = base.find_last_of('.');
  const std::size_t slash = base.find_last_of('/');
  if (dot == std::string::npos ||
      (slash != std::string::npos && dot < slash)) {
    return base + ".gp";
  }
  return base.substr(0, dot) + ".gp";
}

void write_gnuplot_stub(const SweepSpec& spec,
                        const std::vector<std::string>& data_paths,
                        const std::vector<std::string>& columns) {
  const std::string path = stub_path(spec.output_path);
  std::ofstream out(path);
  if (!out) {
    throw IoError("cannot open output file: " + path);
  }
  std::size_t j_col = 1;
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (columns[c] == "j_ratio") {
      j_col = c + 1;  // gnuplot columns are 1-based
    }
  }
  out << "# precision-gain plot stub\n";
  out << "set datafile separator ','\n";
  out << "set key autotitle columnhead\n";
  if (spec.mode == SweepMode::surface) {
    out << "set dgrid3d " << spec.grid_size << "," << spec.grid_size << "\n";
    out << "splot '" << data_paths.front() << "' using 1:2:" << j_col
        << " with lines\n";
  } else {
    if (spec.log_axis) {
      out << "set logscale x\n";
    }
    out << "plot ";
    for (std::size_t i = 0; i < data_paths.size(); ++i) {
      out << (i ? ", " : "") << "'" << data_paths[i] << "' using 1:" << j_col
          << " with lines";
    }
    out << "\n";
  }
  out.flush();
  if (!out) {
    throw IoError("write failed: " + path);
  }
}

}  // namespace

SweepSpec default_spec(SweepMode mode) {
  SweepSpec spec;
  spec.mode = mode;
  switch (mode) {
    case SweepMode::dsv:
    case SweepMode::dsdv_fixed_alpha:
      break;  // log-spaced n_bar in [0.1, 1e4], the saturation-spread etas
    case SweepMode::dsdv_fixed_r:
      spec.axis_min = 0.0;
      spec.axis_max = 30.0;
      spec.log_axis = false;
      break;
    case SweepMode::surface:
      spec.etas = {0.9};
      spec.log_axis = false;
      break;
    case SweepMode::custom:
      spec.axis_min = 0.0;
      spec.axis_max = 1.0;
      spec.log_axis = false;
      spec.etas = {};
      break;
  }
  return spec;
}

void validate(const SweepSpec& spec) {
  if (spec.mode == SweepMode::surface) {
    if (spec.grid_size < 1) {
      throw std::invalid_argument("sweep: surface grid must be non-empty");
    }
    if (!(spec.n_bar > 0.0)) {
      throw std::invalid_argument(
          "sweep: surface mean photon number must be positive");
    }
  } else if (spec.n_points < 1) {
    throw std::invalid_argument("sweep: need at least one axis point");
  }
  if (!(spec.axis_max >= spec.axis_min)) {
    throw std::invalid_argument("sweep: axis range is empty");
  }
  if (spec.log_axis && !(spec.axis_min > 0.0)) {
    throw std::invalid_argument("sweep: log axis requires a positive start");
  }
  if (spec.mode == SweepMode::custom) {
    if (spec.axis_min < 0.0 || spec.axis_max > 1.0) {
      throw std::invalid_argument(
          "sweep: transmissivity axis must stay inside [0, 1]");
    }
  } else {
    if (spec.etas.empty()) {
      throw std::invalid_argument("sweep: transmissivity list is empty");
    }
    for (const double eta : spec.etas) {
      if (!(eta >= 0.0 && eta <= 1.0)) {
        std::ostringstream msg;
        msg << "sweep: transmissivity " << eta << " outside [0, 1]";
        throw std::invalid_argument(msg.str());
      }
    }
  }
  if (spec.alpha2 < 0.0) {
    throw std::invalid_argument("sweep: alpha^2 must be nonnegative");
  }
  if (spec.r_fixed < 0.0) {
    throw std::invalid_argument("sweep: squeezing must be nonnegative");
  }
  if (spec.axis_min < 0.0 &&
      (spec.mode == SweepMode::dsv ||
       spec.mode == SweepMode::dsdv_fixed_alpha ||
       spec.mode == SweepMode::dsdv_fixed_r)) {
    throw std::invalid_argument("sweep: axis must be nonnegative");
  }
}

SweepResult run_sweep(const SweepSpec& spec, double eta) {
  validate(spec);
  if (spec.mode != SweepMode::custom && !(eta >= 0.0 && eta <= 1.0)) {
    std::ostringstream msg;
    msg << "sweep: transmissivity " << eta << " outside [0, 1]";
    throw std::invalid_argument(msg.str());
  }
  switch (spec.mode) {
    case SweepMode::dsv:
      return sweep_dsv(spec, eta);
    case SweepMode::dsdv_fixed_alpha:
      return sweep_dsdv_fixed_alpha(spec, eta);
    case SweepMode::dsdv_fixed_r:
      return sweep_dsdv_fixed_r(spec, eta);
    case SweepMode::surface:
      return sweep_surface(spec, eta);
    case SweepMode::custom:
      return sweep_custom(spec);
  }
  throw std::invalid_argument("sweep: unknown mode");
}

SweepFiles write_sweep(const SweepSpec& spec) {
  validate(spec);
  SweepFiles files;
  std::vector<std::string> columns;
  if (spec.mode == SweepMode::custom) {
    const SweepResult result = run_sweep(spec, 1.0);
    columns = result.columns;
    files.skipped = result.skipped;
    write_csv(spec.output_path, result);
    files.paths.push_back(spec.output_path);
  } else if (spec.single_file) {
    SweepResult merged;
    merged.columns = {"eta"};
    for (const double eta : spec.etas) {
      SweepResult result = run_sweep(spec, eta);
      if (merged.columns.size() == 1) {
        merged.columns.insert(merged.columns.end(), result.columns.begin(),
                              result.columns.end());
      }
      files.skipped += result.skipped;
      for (auto& row : result.rows) {
        std::vector<double> merged_row = {eta};
        merged_row.insert(merged_row.end(), row.begin(), row.end());
        merged.rows.push_back(std::move(merged_row));
      }
    }
    columns = merged.columns;
    write_csv(spec.output_path, merged);
    files.paths.push_back(spec.output_path);
  } else {
    for (const double eta : spec.etas) {
      const SweepResult result = run_sweep(spec, eta);
      columns = result.columns;
      files.skipped += result.skipped;
      const std::string path = eta_path(spec.output_path, eta);
      write_csv(path, result);
      files.paths.push_back(path);
    }
  }
  if (spec.gnuplot_stub) {
    write_gnuplot_stub(spec, files.paths, columns);
    files.paths.push_back(stub_path(spec.output_path));
  }
  return files;
}

SweepResult read_sweep_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open sweep file: " + path);
  }
  SweepResult result;
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error("sweep file has no header: " + path);
  }
  std::istringstream header(line);
  std::string cell;
  while (std::getline(header, cell, ',')) {
    result.columns.push_back(cell);
  }
  while (std::getline(in, line)) {
    if (line.empty()) {
      continue;
    }
    std::istringstream fields(line);
    std::vector<double> row;
    while (std::getline(fields, cell, ',')) {
      char* end = nullptr;
      const double value = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str()) {
        throw std::runtime_error("sweep file has a malformed number: " + cell);
      }
      row.push_back(value);
    }
    if (row.size() != result.columns.size()) {
      throw std::runtime_error("sweep file row width mismatch: " + path);
    }
    result.rows.push_back(std::move(row));
  }
  return result;
}

std::string csv_number(double value) {
  char buffer[40];
  std::snprintf(buffer, sizeof buffer, "%.17g", value);
  return buffer;
}

}  // namespace gqfi
