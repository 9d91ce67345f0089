#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mirrorqed/hilbert.hpp"
#include "mirrorqed/qubit_dynamics.hpp"

namespace mirrorqed {

enum class FilterKind { boxcar, gaussian, custom };

std::string to_string(FilterKind kind);

/// Normalised temporal envelope f(t) (units 1/sqrt(s)) defining the mode
/// a = \int f(t) a_out(t) dt.
///
/// Boxcar and Gaussian filters are evaluated in closed form; custom filters
/// are the piecewise-linear interpolant of their samples (norm and
/// cumulative norm are exact for that interpolant). The sample list is kept
/// for every kind so filters can be exported.
class TemporalFilter {
 public:
  FilterKind kind() const { return kind_; }
  /// tau (boxcar) or xi (gaussian); 0 for custom filters.
  double width() const { return width_; }
  double gamma_2() const { return gamma_2_; }
  double t_begin() const { return t_begin_; }
  double t_end() const { return t_end_; }
  double grid_step() const { return grid_step_; }
  const std::vector<double>& times() const { return times_; }
  const std::vector<cdouble>& values() const { return values_; }

  cdouble amplitude(double t) const;
  /// \int_{t_begin}^{t} |f|^2.
  double absorbed_norm(double t) const;
  /// \int f dt over the support.
  cdouble integral() const;
  /// Trapezoid estimate of \int |f|^2 on the stored samples.
  double sample_norm() const;

  friend TemporalFilter make_boxcar(double tau, double t_start, double gamma_2, std::size_t samples);
  friend TemporalFilter make_gaussian(double xi, double t_center, double gamma_2, std::size_t samples);
  friend TemporalFilter make_custom(std::vector<double> times, std::vector<cdouble> values);

 private:
  std::size_t segment(double t) const;

  FilterKind kind_ = FilterKind::custom;
  double width_ = 0.0;
  double center_ = 0.0;
  double gamma_2_ = 0.0;
  double amplitude_scale_ = 0.0;
  double t_begin_ = 0.0;
  double t_end_ = 0.0;
  double grid_step_ = 0.0;
  std::vector<double> times_;
  std::vector<cdouble> values_;
  std::vector<double> cumulative_;  // custom only: exact interpolant norm up to each node
};

/// f = sqrt(Gamma_2/tau) on [t_start, t_start + tau/Gamma_2].
TemporalFilter make_boxcar(double tau, double t_start, double gamma_2, std::size_t samples = 2001);
/// f = sqrt(Gamma_2) exp(-(t-tc)^2 Gamma_2^2 / 4 xi^2) / (2 pi xi^2)^{1/4},
/// support truncated at +-6 xi/Gamma_2.
TemporalFilter make_gaussian(double xi, double t_center, double gamma_2, std::size_t samples = 4001);
/// Piecewise-linear envelope through the samples, rescaled to unit norm.
TemporalFilter make_custom(std::vector<double> times, std::vector<cdouble> values);
/// Natural cubic spline through zero end points and `node_values` at equally
/// spaced interior nodes of [t_begin, t_end], resampled on `samples` points.
TemporalFilter make_spline(const std::vector<double>& node_values, double t_begin, double t_end,
                           std::size_t samples = 1201);

void write_filter_csv(const std::string& path, const TemporalFilter& f);
TemporalFilter read_filter_csv(const std::string& path);

struct SimOptions {
  std::size_t fock_cutoff = 10;  ///< capture-cavity basis size
  double step_factor = 0.01;     ///< h * max(Gamma_1, Gamma_2, |Omega|, |Delta|) <= step_factor
  /// h * max(|g|^2, sqrt(Gamma_r)|g|) <= coupling_step_factor
  double coupling_step_factor = 0.1;
  double norm_floor = 1e-8;
  std::optional<double> t_final;              ///< defaults to the filter end
  std::optional<CMatrix> initial_qubit;       ///< defaults to the analytic steady state
};

struct IntegratorReport {
  std::size_t steps = 0;
  double max_coupling = 0.0;  ///< sup |g(t)| over evaluated stages
  double trace_defect = 0.0;
  double min_eigenvalue = 0.0;
};

struct CaptureResult {
  CMatrix rho_mode;         ///< fock_cutoff x fock_cutoff, emission picture
  CMatrix rho_joint_final;  ///< qubit (x) cavity
  double capture_efficiency = 0.0;  ///< <a^dag a> of rho_mode
  IntegratorReport report;
};

/// Coupling of the fictitious absorbing cavity,
/// g(t) = -f(t) / sqrt(max(\int_{t_begin}^t |f|^2, norm_floor)).
cdouble capture_coupling(const TemporalFilter& filter, double t, double norm_floor = 1e-8);

/// Emission operator prefactor: a_out = a_in + emission_prefactor * sigma_-.
cdouble emission_prefactor(const SystemParams& p);

/// Qubit cascaded into an absorbing cavity; returns the state of the mode
/// defined by `filter` in the displaced frame (drive reflection removed).
CaptureResult simulate_capture(const SystemParams& p, const TemporalFilter& filter,
                               const SimOptions& opts = {});

struct LowOrderMoments {
  cdouble mean{0.0, 0.0};     ///< <a>
  double photon_number = 0.0;  ///< <a^dag a>
};

/// Independent route to <a> and <a^dag a> through the quantum regression
/// theorem on a uniform quadrature grid of `nodes` points.
LowOrderMoments moment_oracle_low_order(const SystemParams& p, const TemporalFilter& filter,
                                        std::size_t nodes = 2001,
                                        const std::optional<CMatrix>& initial_qubit = std::nullopt);

/// Drive contribution to the captured mode, beta = a_in \int f dt with
/// a_in = Omega e^{-i phi/2} / (2 sqrt(Gamma_r)).
cdouble coherent_amplitude(const SystemParams& p, const TemporalFilter& filter);

}  // namespace mirrorqed
