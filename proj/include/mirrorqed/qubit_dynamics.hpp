#pragma once

#include <string>
#include <vector>

#include "mirrorqed/hilbert.hpp"

namespace mirrorqed {

/// Emitter, drive and line parameters. Every rate and frequency is angular
/// (rad/s); only configuration loading deals in MHz.
///
/// Invariants: gamma_1 = gamma_r + gamma_n, gamma_2 = gamma_1/2 + gamma_p,
/// gamma_1 >= 0, |phi| < pi/2. Measured parameter sets may carry slightly
/// negative gamma_n or gamma_p (they are fitted differences); such sets are
/// fine for closed-form quantities but `is_physical()` is false and the
/// time-domain simulations refuse them.
struct SystemParams {
  double delta = 0.0;    ///< drive detuning omega_p - omega_01
  double omega = 0.0;    ///< Rabi frequency
  double gamma_r = 0.0;  ///< radiative decay into the line
  double gamma_1 = 0.0;  ///< total relaxation
  double gamma_2 = 0.0;  ///< total decoherence
  double gamma_p = 0.0;  ///< pure dephasing
  double gamma_n = 0.0;  ///< non-radiative decay
  double phi = 0.0;      ///< impedance-mismatch phase
  double omega01 = 0.0;  ///< qubit transition, used only for absolute power

  /// Build from the independent loss channels; gamma_1 and gamma_2 derived.
  static SystemParams from_loss_rates(double gamma_r, double gamma_n, double gamma_p,
                                      double delta = 0.0, double omega = 0.0, double phi = 0.0);
  /// Build from measured gamma_1 / gamma_2; gamma_n and gamma_p derived.
  static SystemParams from_measured(double gamma_r, double gamma_1, double gamma_2,
                                    double delta = 0.0, double omega = 0.0, double phi = 0.0);

  void validate() const;
  bool is_physical() const;

  SystemParams with_drive(double new_delta, double new_omega) const;
};

/// Sample S1 as measured: Gamma_r/2pi = 1.110 MHz, Gamma_1/2pi = 1.103 MHz,
/// Gamma_2/2pi = 523 kHz, omega_01/2pi = 5.50703 GHz. Undriven, phi = 0.
SystemParams table_s1_params();
/// Lossless version of the same emitter: Gamma_1 = Gamma_r = 2pi*1.110 MHz,
/// Gamma_n = Gamma_p = 0, phi = 0.
SystemParams ideal_line_params();

inline constexpr double kTwoPi = 2.0 * kPi;
inline double mhz(double value) { return kTwoPi * 1e6 * value; }
inline double khz(double value) { return kTwoPi * 1e3 * value; }

struct QubitState {
  CMatrix rho;  ///< 2x2 in the {|0>, |1>} basis; rho(1,0) = <sigma_->
  cdouble sigma_minus{0.0, 0.0};
  double coherence = 0.0;
  double population_excited = 0.0;
  double purity = 1.0;

  static QubitState from_rho(const CMatrix& rho);
};

struct BoundaryModel {
  double r1 = 0.0;
  double t1 = 1.0;
  double beta = 1.0;
  double phi0 = 0.0;
  double gamma_r0 = 0.0;

  void validate() const;
};

namespace qubit {

/// Qubit operators in the {|0>, |1>} basis. sigma_z = |1><1| - |0><0|.
CMatrix sigma_minus();
CMatrix sigma_plus();
CMatrix sigma_z();
CMatrix sigma_x();

/// Superoperator D[c] acting on column-stacked density matrices.
CMatrix dissipator_superop(const CMatrix& c);
CMatrix hamiltonian_superop(const CMatrix& h);

CMatrix hamiltonian(const SystemParams& p);
/// L = -i[H, .] + Gamma_1 D[sigma_-] + (Gamma_p/2) D[sigma_z], 4x4.
CMatrix liouvillian(const SystemParams& p);

QubitState steady_state_analytic(const SystemParams& p);
/// Normalised kernel of the Liouvillian; RankError unless it is one-dimensional.
QubitState steady_state_numeric(const SystemParams& p);

cdouble reflection_coefficient(const SystemParams& p);
/// Weak-probe limit r = 1 - i Gamma_r e^{i phi} / (Delta + i Gamma_2).
cdouble reflection_weak_probe(const SystemParams& p);

struct DrivePoint {
  double delta = 0.0;
  double omega = 0.0;
};

/// Drive (Delta*, Omega*) at which the coherent reflection vanishes.
DrivePoint critical_drive(const SystemParams& p);
/// Resonant drive minimising |r|; there |r| = |sin phi|.
double resonant_min_reflection_drive(const SystemParams& p);

cdouble compensate_mismatch(cdouble r_meas, double phi, double scale = 1.07);

struct EffectiveCoupling {
  double gamma_r_eff = 0.0;
  double phi_eff = 0.0;
};

EffectiveCoupling mismatch_from_boundary(const BoundaryModel& b);

struct ReflectionPoint {
  double delta = 0.0;  ///< rad/s
  cdouble r{1.0, 0.0};
};

struct ReflectionFit {
  SystemParams params;
  double delta_offset = 0.0;
  double residual_norm = 0.0;
  double residual_rms = 0.0;
  bool residual_flag = false;
  int iterations = 0;
};

struct ReflectionFitOptions {
  int max_iterations = 500;
  double relative_cost_tolerance = 1e-12;
  /// rms of |r_i - model_i| above which `residual_flag` is raised.
  double residual_flag_rms = 0.02;
};

/// Damped least-squares fit of (phi, Gamma_r, Gamma_2, Delta offset).
/// With `weak_probe` false the full saturating model is fitted, holding the
/// guess's Omega and Gamma_1.
ReflectionFit fit_reflection(const std::vector<ReflectionPoint>& trace, bool weak_probe,
                             const SystemParams& guess, const ReflectionFitOptions& opts = {});

/// Gamma_p = sqrt(A_Phi |ln(2 pi f_IR t)|) * d omega_01 / d Phi.
double dephasing_from_flux_noise(double a_phi, double f_ir, double t_total, double slope);
/// d omega / d Phi (rad/s per flux quantum) of a symmetric transmon,
/// omega(Phi) = omega_max sqrt|cos(pi Phi/Phi_0)|, at operating point omega.
double transmon_flux_slope(double omega_max, double omega);

void write_spectroscopy_csv(const std::string& path, const std::vector<ReflectionPoint>& trace);
std::vector<ReflectionPoint> read_spectroscopy_csv(const std::string& path);

}  // namespace qubit
}  // namespace mirrorqed
