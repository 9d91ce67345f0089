#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mirrorqed/errors.hpp"
#include "mirrorqed/spectrum.hpp"
#include "mirrorqed/temporal_modes.hpp"
#include "mirrorqed/wigner.hpp"

namespace mirrorqed {

/// Raised by the filter optimiser when the evaluation budget runs out before
/// the simplex has contracted; carries the best point seen.
class BudgetExhaustedError : public ConvergenceError {
 public:
  BudgetExhaustedError(const std::string& what, std::vector<double> best_x, double best_value)
      : ConvergenceError(what), best_x_(std::move(best_x)), best_value_(best_value) {}
  const std::vector<double>& best_x() const { return best_x_; }
  double best_value() const { return best_value_; }

 private:
  std::vector<double> best_x_;
  double best_value_;
};

struct AxisSpec {
  std::string name;
  double start = 0.0;
  double stop = 0.0;
  std::size_t points = 1;

  std::vector<double> values() const;
};

enum class DriveMode { critical, explicit_drive, none };

/// Resolved experiment configuration. Rates already converted to rad/s.
struct ExperimentConfig {
  SystemParams params;
  DriveMode drive = DriveMode::critical;
  std::optional<AxisSpec> sweep;
  std::optional<AxisSpec> sweep2;

  std::string filter_kind = "gaussian";  ///< boxcar, gaussian or spline
  double filter_width = 0.5;             ///< tau or xi in units of 1/Gamma_2
  double filter_range_lo = 0.1;
  double filter_range_hi = 3.0;
  std::size_t spline_nodes = 6;
  double spline_window = 3.0;  ///< units of 1/Gamma_2

  bool tomography_enabled = true;
  int order_cap = 6;
  std::size_t tomography_dim = 5;
  double noise_photons = 0.0;
  std::size_t shots = 0;  ///< 0 selects exact moments
  std::uint64_t seed = 1;

  std::size_t fock_cutoff = 10;
  double wigner_extent = 5.0;
  double wigner_step = 0.05;
  LogBase log_base = LogBase::natural;
  bool check_grid = true;

  std::size_t budget = 200;
  std::size_t restarts = 2;
  double simplex_tolerance = 1e-4;

  double reflection_span = 0.0;  ///< rad/s, 0 picks 5 Gamma_2
  std::size_t reflection_points = 401;
  double weak_omega_ratio = 0.01;  ///< weak drive as a fraction of Gamma_r
  double compensation_scale = 1.0;

  double mollow_tau_max = 8e-6;  ///< seconds
  std::size_t mollow_tau_points = 8192;
  double mollow_span = 0.0;  ///< rad/s, 0 picks 4 max(Omega, Gamma_1)
  std::size_t mollow_freqs = 801;

  std::string output_directory = "out";
  std::vector<std::string> formats{"csv"};

  std::string canonical;  ///< resolved config as sorted JSON, output block excluded
  std::string hash;       ///< FNV-1a 64 of `canonical`, hex
};

/// Parse and validate a JSON config. Unknown keys, wrong types and
/// out-of-range values raise ConfigError.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);
/// Recompute `canonical` and `hash` after programmatic edits.
void refresh_hash(ExperimentConfig& cfg);

/// Params with the drive selected by cfg.drive applied.
SystemParams driven_params(const ExperimentConfig& cfg);

/// Numeric columns plus a per-row status ("ok", "not_converged" or "error:<what>").
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  std::vector<std::string> status;

  void add(std::vector<double> row, std::string st = "ok");
  std::size_t column(const std::string& name) const;
};

struct FilterOptimum {
  std::string family;
  std::vector<double> parameters;
  double wln = 0.0;
  std::size_t evaluations = 0;
};

struct MollowResult {
  Table spectrum;  ///< f_hz_offset plus one psd column per variant
  std::vector<std::string> variants;
  std::vector<double> fitted_omega;  ///< rad/s, NaN where unresolved
  std::vector<double> drive_omega;
  std::vector<double> drive_delta;
  std::vector<double> coherent_flux;
};

struct DephasingMap {
  Table map;          ///< gamma_p_khz, gamma_n_over_gamma_r, best_xi, wln
  Table cut_gamma_p;  ///< gamma_n = first gamma_n axis value
  Table cut_gamma_n;  ///< gamma_p = first gamma_p axis value
};

struct CaptureDump {
  CMatrix rho_mode;
  cdouble coherent_amplitude{0.0, 0.0};
  Table summary;
};

/// Sweep checkpointing: completed rows are appended to `checkpoint_path`
/// and reused by a later run with the same config hash. `stop_after`
/// computes at most that many new points, mimicking an interruption.
struct RunControl {
  std::string checkpoint_path;
  std::optional<std::size_t> stop_after;
};

/// Thrown by a sweep cut short by RunControl::stop_after.
class InterruptedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace experiments {

/// Ideal-line state of the mode and the tomography pipeline for one filter.
struct PointResult {
  double wln_ideal = 0.0;
  double wln_pipeline = 0.0;
  double purity = 0.0;
  std::vector<double> populations;  ///< rho_00 .. rho_33
  double fidelity = 0.0;
  double photon_number = 0.0;
  bool grid_converged = true;
};

TemporalFilter build_filter(const std::string& kind, double width, const SystemParams& p);
PointResult evaluate_point(const ExperimentConfig& cfg, const SystemParams& driven, const TemporalFilter& f,
                           std::uint64_t seed);
/// WLN of the captured state, no tomography.
double ideal_wln(const ExperimentConfig& cfg, const SystemParams& driven, const TemporalFilter& f);

/// Derivative-free simplex maximisation with restarts. Deterministic in `seed`.
struct SimplexResult {
  std::vector<double> x;
  double value = 0.0;
  std::size_t evaluations = 0;
  bool converged = false;
};
SimplexResult nelder_mead_max(const std::function<double(const std::vector<double>&)>& f, std::vector<double> x0,
                              std::vector<double> step, std::size_t budget, std::size_t restarts, double tolerance,
                              std::uint64_t seed);

Table run_reflection_circle(const ExperimentConfig& cfg);
/// Summary of a reflection table: circle radius of the weak trace (algebraic
/// fit), compensated r at Delta = 0, min |r| on the critical trace, and
/// |r| at the resonant minimum drive.
Table reflection_summary(const ExperimentConfig& cfg, const Table& trace);
Table run_wln_sweep(const ExperimentConfig& cfg, const RunControl& ctl = {});
DephasingMap run_dephasing_map(const ExperimentConfig& cfg, const RunControl& ctl = {});
FilterOptimum optimize_filter(const ExperimentConfig& cfg);
Table run_qubit_state_curves(const ExperimentConfig& cfg);
MollowResult run_mollow(const ExperimentConfig& cfg);
CaptureDump run_capture(const ExperimentConfig& cfg);

/// CSV with two comment lines: the config hash and a timestamp.
void write_table_csv(const std::string& path, const Table& t, const ExperimentConfig& cfg,
                     const std::string& command);
void write_table_json(const std::string& path, const Table& t, const ExperimentConfig& cfg,
                      const std::string& command);

}  // namespace experiments
}  // namespace mirrorqed
