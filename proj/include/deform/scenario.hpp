#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "deform/common.hpp"
#include "deform/fields.hpp"
#include "deform/quadrature.hpp"

namespace deform {

// One experiment: a groupoid instance, configured fields on its deformation
// space, a deformation grid, and the checks to run against them.
//
// Check vocabulary (a scenario picks a nonempty subset):
//   associativity   (f*g)*h vs f*(g*h) at sampled points, per t
//   homomorphism    t-slices of f*g vs products of t-slices, per t
//   continuity      sup |(f*g)(x,xi,t) - (f*g)(x,xi,0)| at ramp probes, per t
//   kernel-oracle   lattice kernel composition vs the engine, per lattice
//   fourier         boundary fiber transform multiplicativity
//   seminorm        Schwartz seminorm scan of every configured field
//   support         declared conic supports vs sampled evaluations
struct Scenario {
  std::string name;              // [A-Za-z0-9._-]+, used in report rows
  std::string groupoid;          // instance registry key
  std::vector<FieldConfig> fields;
  std::vector<double> t_grid;    // strictly increasing, within [0, 1]
  QuadratureSpec quadrature;
  std::vector<std::string> checks;
  std::uint64_t seed = 1;
  std::vector<int> lattice_sizes{256, 512};  // kernel-oracle lattices
  int fourier_lattice = 256;
  double fourier_radius = 12.0;

  void validate() const;  // throws ConfigError naming the offending entry
};

const std::vector<std::string>& scenario_check_names();

// JSON round-trip. Parsing rejects unknown keys anywhere in the document
// (ConfigError names the key); unknown groupoid / family / check names
// surface the offending value the same way.
Scenario scenario_from_json(const std::string& text);
std::string scenario_to_json(const Scenario& s);

// Curated instances shipped with the tool, and lookup by name.
std::vector<Scenario> builtin_scenarios();
Scenario builtin_scenario(const std::string& name);

// One verdict. `pass` is always metric <= threshold; runtime_ms is wall
// time and is the only column that varies between identical runs.
struct ReportRow {
  std::string scenario;
  std::string check;
  double t = 0.0;
  int grid_size = 0;
  double metric = 0.0;
  double threshold = 0.0;
  bool pass = false;
  double runtime_ms = 0.0;
};

// Runs every configured check. Checks execute concurrently; every metric
// is a pure function of (scenario, seed), so the schedule never shows in
// the rows. Rows come back in canonical order (scenario, check, t, grid
// size). A quadrature that cannot reach its tolerance turns into failing
// rows (metric inf), never a crash.
std::vector<ReportRow> run_scenario(const Scenario& s);

bool all_rows_pass(const std::vector<ReportRow>& rows);

// CSV: header scenario,check,t,grid_size,metric,threshold,pass,runtime_ms,
// numbers as %.12g, pass as 1/0, LF line ends, canonically sorted rows.
std::string rows_to_csv(std::vector<ReportRow> rows);
std::vector<ReportRow> rows_from_csv(const std::string& text);

// Two-column series for plotting plus a fitted log-log slope in the header
// comment. kind picks the abscissa: "continuity-curve" reads (t, metric)
// from continuity rows, "convergence-curve" reads (lattice size, metric)
// from kernel-oracle rows. Fewer than three usable points: SeriesError.
std::string emit_series(const std::vector<ReportRow>& rows,
                        const std::string& kind);

// Least-squares slope of log y against log x; points need x, y > 0.
double loglog_slope(const std::vector<std::pair<double, double>>& pts);

}  // namespace deform
