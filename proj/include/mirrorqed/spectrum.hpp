#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mirrorqed/qubit_dynamics.hpp"

namespace mirrorqed {

/// <sigma_+(t+tau) sigma_-(t)> on a uniform tau grid.
struct CorrelationTrace {
  std::vector<double> tau;  ///< seconds
  std::vector<cdouble> c;
  cdouble sigma_minus{0.0, 0.0};  ///< <sigma_-> of the reference state
  cdouble c_limit{0.0, 0.0};      ///< C(tau -> inf), the coherent part
  double excited_population = 0.0;
  double gamma_r = 0.0;
  bool resonant = false;  ///< Delta == 0, so the spectrum is even

  double step() const { return tau.size() > 1 ? tau[1] - tau[0] : 0.0; }
};

/// Incoherent fluorescence spectrum relative to the drive frequency.
struct Spectrum {
  std::vector<double> freqs;  ///< rad/s, strictly increasing
  std::vector<double> psd;    ///< photons per second per rad/s
  double coherent_flux = 0.0;    ///< Gamma_r |<sigma_->|^2, the delta peak
  double incoherent_flux = 0.0;  ///< trapezoid integral of psd
  double asymmetry = 0.0;        ///< max |S(w) - S(-w)| / peak before symmetrisation
};

struct PsdOptions {
  std::size_t n_freqs = 0;  ///< odd keeps w = 0 on the grid; 0 picks spacing pi / tau_max
  double omega_max = 0.0;      ///< 0 selects the Nyquist limit pi / dtau
};

struct RabiFit {
  double omega = 0.0;
  double omega_error = 0.0;  ///< one standard deviation from the residual curvature
  double residual_rms = 0.0;
  int iterations = 0;
};

struct CalibrationFit {
  double gain_db = 0.0;
  double intercept_sigma = 0.0;  ///< two standard errors of the intercept
  std::vector<std::pair<double, double>> points;  ///< (p_in_dbm, p_meas_dbm)
  std::vector<double> residuals;
};

struct PooledGain {
  double mean_db = 0.0;
  double two_sigma_db = 0.0;
  std::size_t runs = 0;
};

namespace spectrum {

inline constexpr double kHbar = 1.054571817e-34;

/// Quantum regression from the steady state, or from `initial` (2x2) when given.
CorrelationTrace two_time_correlation(const SystemParams& p, double tau_max, std::size_t n_points,
                                      const std::optional<CMatrix>& initial = std::nullopt);

/// S(w) = (Gamma_r/pi) Re int_0^inf e^{-i w tau} [C(tau) - C(inf)] dtau by
/// trapezoid quadrature. WindowError if the incoherent part has not decayed
/// below 1e-6 of its initial value at the end of the trace.
Spectrum psd(const CorrelationTrace& corr, const PsdOptions& opts = {});

/// Same spectrum from the Liouvillian resolvent, evaluated at `freqs`.
std::vector<double> model_psd(const SystemParams& p, const std::vector<double>& freqs);

/// Symmetric frequency grid [-omega_max, omega_max] with n points.
std::vector<double> frequency_grid(double omega_max, std::size_t n);

/// Positions of the outermost local maxima on either side of w = 0; empty
/// when the spectrum has no side peaks.
std::vector<double> sideband_positions(const Spectrum& s);

/// Least-squares fit of Omega with every other parameter of `p_init` held.
/// UnresolvedError when the best Omega is below Gamma_2, where the sidebands
/// have merged into the central peak.
RabiFit fit_rabi_from_psd(const Spectrum& s, const SystemParams& p_init);

/// 10 log10(hbar omega01 Omega^2 / (4 Gamma_r) / 1 mW), with omega01 in rad/s
/// and Omega, Gamma_r converted to cycles per second.
double rabi_to_power(double omega, double omega01, double gamma_r);

/// Unit-slope fit P_meas = P + G.
CalibrationFit fit_gain(const std::vector<std::pair<double, double>>& points);
PooledGain pool_gains(const std::vector<CalibrationFit>& runs);
/// "-121.73±0.01 dB" style.
std::string format_gain(double value_db, double error_db);

void write_spectrum_csv(const std::string& path, const Spectrum& s);
Spectrum read_spectrum_csv(const std::string& path);
void write_calibration_csv(const std::string& path, const std::vector<std::pair<double, double>>& points);
std::vector<std::pair<double, double>> read_calibration_csv(const std::string& path);

}  // namespace spectrum
}  // namespace mirrorqed
