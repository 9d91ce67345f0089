#include "mirrorqed/qubit_dynamics.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "mirrorqed/csv.hpp"
#include "mirrorqed/errors.hpp"
#include "mirrorqed/least_squares.hpp"

namespace mirrorqed {

namespace {

bool finite_all(std::initializer_list<double> xs) {
  for (double x : xs) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

double relation_tolerance(double scale) { return 1e-9 * std::max(1.0, std::abs(scale)); }

}  // namespace

SystemParams SystemParams::from_loss_rates(double gamma_r, double gamma_n, double gamma_p,
                                           double delta, double omega, double phi) {
  SystemParams p;
  p.gamma_r = gamma_r;
  p.gamma_n = gamma_n;
  p.gamma_p = gamma_p;
  p.gamma_1 = gamma_r + gamma_n;
  p.gamma_2 = 0.5 * p.gamma_1 + gamma_p;
  p.delta = delta;
  p.omega = omega;
  p.phi = phi;
  p.validate();
  return p;
}

SystemParams SystemParams::from_measured(double gamma_r, double gamma_1, double gamma_2,
                                         double delta, double omega, double phi) {
  SystemParams p;
  p.gamma_r = gamma_r;
  p.gamma_1 = gamma_1;
  p.gamma_2 = gamma_2;
  p.gamma_n = gamma_1 - gamma_r;
  p.gamma_p = gamma_2 - 0.5 * gamma_1;
  p.delta = delta;
  p.omega = omega;
  p.phi = phi;
  p.validate();
  return p;
}

void SystemParams::validate() const {
  if (!finite_all({delta, omega, gamma_r, gamma_1, gamma_2, gamma_p, gamma_n, phi, omega01})) {
    throw ConfigError("SystemParams: all rates must be finite");
  }
  if (gamma_1 < 0.0 || gamma_2 < 0.0 || gamma_r < 0.0) {
    throw ConfigError("SystemParams: gamma_r, gamma_1, gamma_2 must be non-negative");
  }
  if (std::abs(gamma_1 - (gamma_r + gamma_n)) > relation_tolerance(gamma_1)) {
    throw ConfigError("SystemParams: gamma_1 != gamma_r + gamma_n");
  }
  if (std::abs(gamma_2 - (0.5 * gamma_1 + gamma_p)) > relation_tolerance(gamma_2)) {
    throw ConfigError("SystemParams: gamma_2 != gamma_1/2 + gamma_p");
  }
  if (std::abs(phi) >= 0.5 * kPi) throw ConfigError("SystemParams: |phi| must be below pi/2");
}

bool SystemParams::is_physical() const {
  const double tol = relation_tolerance(gamma_1);
  return gamma_n >= -tol && gamma_p >= -tol;
}

SystemParams SystemParams::with_drive(double new_delta, double new_omega) const {
  SystemParams p = *this;
  p.delta = new_delta;
  p.omega = new_omega;
  return p;
}

SystemParams table_s1_params() {
  SystemParams p = SystemParams::from_measured(mhz(1.110), mhz(1.103), mhz(0.523));
  p.omega01 = kTwoPi * 5.50703e9;
  return p;
}

SystemParams ideal_line_params() {
  SystemParams p = SystemParams::from_loss_rates(mhz(1.110), 0.0, 0.0);
  p.omega01 = kTwoPi * 5.50703e9;
  return p;
}

QubitState QubitState::from_rho(const CMatrix& rho) {
  QubitState s;
  s.rho = rho;
  s.sigma_minus = rho(1, 0);
  s.coherence = std::abs(rho(0, 1));
  s.population_excited = rho(1, 1).real();
  s.purity = (rho * rho).trace().real();
  return s;
}

void BoundaryModel::validate() const {
  if (!(r1 >= 0.0 && r1 < 1.0)) throw ConfigError("BoundaryModel: need 0 <= r1 < 1");
  if (!(t1 > 0.0 && t1 <= 1.0)) throw ConfigError("BoundaryModel: need 0 < t1 <= 1");
  if (!(beta > 0.0 && beta <= 1.0)) throw ConfigError("BoundaryModel: need 0 < beta <= 1");
  if (!finite_all({phi0, gamma_r0})) throw ConfigError("BoundaryModel: non-finite input");
}

namespace qubit {

CMatrix sigma_minus() {
  CMatrix m = CMatrix::Zero(2, 2);
  m(0, 1) = 1.0;
  return m;
}

CMatrix sigma_plus() { return sigma_minus().adjoint(); }

CMatrix sigma_z() {
  CMatrix m = CMatrix::Zero(2, 2);
  m(0, 0) = -1.0;
  m(1, 1) = 1.0;
  return m;
}

CMatrix sigma_x() { return hilbert::pauli_x(); }

CMatrix dissipator_superop(const CMatrix& c) {
  const auto n = static_cast<std::size_t>(c.rows());
  const CMatrix id = hilbert::identity(n);
  const CMatrix cdc = c.adjoint() * c;
  return hilbert::kron(c.conjugate(), c) - 0.5 * hilbert::kron(id, cdc) -
         0.5 * hilbert::kron(cdc.transpose(), id);
}

CMatrix hamiltonian_superop(const CMatrix& h) {
  const auto n = static_cast<std::size_t>(h.rows());
  const CMatrix id = hilbert::identity(n);
  return -kI * (hilbert::kron(id, h) - hilbert::kron(h.transpose(), id));
}

CMatrix hamiltonian(const SystemParams& p) {
  return -0.5 * p.delta * sigma_z() + 0.5 * p.omega * sigma_x();
}

CMatrix liouvillian(const SystemParams& p) {
  return hamiltonian_superop(hamiltonian(p)) + p.gamma_1 * dissipator_superop(sigma_minus()) +
         0.5 * p.gamma_p * dissipator_superop(sigma_z());
}

QubitState steady_state_analytic(const SystemParams& p) {
  const double g1 = p.gamma_1, g2 = p.gamma_2, om = p.omega, d = p.delta;
  const double den = om * om * g2 + g1 * (d * d + g2 * g2);
  if (den == 0.0 || !std::isfinite(den)) {
    throw DegenerateError("steady_state_analytic: Omega^2 Gamma_2 + Gamma_1(Delta^2 + Gamma_2^2) = 0");
  }
  const cdouble s = om * g1 * cdouble(d, -g2) / (2.0 * den);
  const double p11 = om * om * g2 / (2.0 * den);
  CMatrix rho(2, 2);
  rho << 1.0 - p11, std::conj(s), s, p11;
  return QubitState::from_rho(rho);
}

QubitState steady_state_numeric(const SystemParams& p) {
  const CMatrix l = liouvillian(p);
  const double scale = hilbert::max_abs(l);
  if (scale == 0.0) throw RankError("steady_state_numeric: Liouvillian vanishes identically");
  Eigen::JacobiSVD<CMatrix> svd(l / scale, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const Eigen::Index n = sv.size();
  if (sv[n - 1] > 1e-10 || sv[n - 2] < 1e-9) {
    throw RankError("steady_state_numeric: Liouvillian kernel is not one-dimensional (sigma_min=" +
                    std::to_string(sv[n - 1]) + ", next=" + std::to_string(sv[n - 2]) + ")");
  }
  CMatrix rho = hilbert::unvec(svd.matrixV().col(n - 1), 2);
  rho /= rho.trace();
  rho = 0.5 * (rho + rho.adjoint());
  return QubitState::from_rho(rho);
}

cdouble reflection_coefficient(const SystemParams& p) {
  const double g1 = p.gamma_1, g2 = p.gamma_2, om = p.omega, d = p.delta;
  const double den = om * om * g2 + g1 * (d * d + g2 * g2);
  if (den == 0.0 || !std::isfinite(den)) {
    throw DegenerateError("reflection_coefficient: zero denominator");
  }
  const cdouble line = p.gamma_r * std::exp(kI * p.phi);
  return 1.0 - kI * line * g1 * cdouble(d, -g2) / den;
}

cdouble reflection_weak_probe(const SystemParams& p) {
  const cdouble den(p.delta, p.gamma_2);
  if (std::abs(den) == 0.0) throw DegenerateError("reflection_weak_probe: Delta = Gamma_2 = 0");
  return 1.0 - kI * p.gamma_r * std::exp(kI * p.phi) / den;
}

DrivePoint critical_drive(const SystemParams& p) {
  const double t = std::tan(p.phi);
  const double bracket = p.gamma_r / std::cos(p.phi) - p.gamma_2 * (t * t + 1.0);
  if (bracket < 0.0 || p.gamma_1 < 0.0) {
    throw NoSolutionError("critical_drive: Gamma_r/cos(phi) < Gamma_2 (tan^2 phi + 1), mismatch too severe");
  }
  return {-p.gamma_2 * t, std::sqrt(p.gamma_1 * bracket)};
}

double resonant_min_reflection_drive(const SystemParams& p) {
  const double bracket = p.gamma_r / std::cos(p.phi) - p.gamma_2;
  if (bracket < 0.0) throw NoSolutionError("resonant drive cannot reach the |r| minimum");
  return std::sqrt(p.gamma_1 * bracket);
}

cdouble compensate_mismatch(cdouble r_meas, double phi, double scale) {
  if (!(scale > 0.0)) throw ConfigError("compensate_mismatch: scale must be > 0");
  return 1.0 - (1.0 - r_meas) * std::exp(-kI * phi) / scale;
}

EffectiveCoupling mismatch_from_boundary(const BoundaryModel& b) {
  b.validate();
  const cdouble round_trip = b.t1 * b.t1 * b.beta * b.beta * std::exp(2.0 * kI * b.phi0);
  const cdouble den = b.r1 + round_trip;
  if (std::abs(den) < 1e-300) throw DegenerateError("mismatch_from_boundary: r1 + t1^2 beta^2 e^{2i phi0} = 0");
  const cdouble eff = round_trip * b.gamma_r0 / den;
  return {std::abs(eff), std::arg(eff)};
}

ReflectionFit fit_reflection(const std::vector<ReflectionPoint>& trace, bool weak_probe,
                             const SystemParams& guess, const ReflectionFitOptions& opts) {
  if (trace.size() < 5) throw ConfigError("fit_reflection: need at least 5 points");
  const double unit = guess.gamma_r > 0.0 ? guess.gamma_r : 1.0;

  auto model = [&](const Eigen::VectorXd& x) {
    SystemParams q = guess;
    q.phi = x[0];
    q.gamma_r = x[1] * unit;
    q.gamma_2 = x[2] * unit;
    const double offset = x[3] * unit;
    Eigen::VectorXd res(2 * trace.size());
    for (std::size_t i = 0; i < trace.size(); ++i) {
      q.delta = trace[i].delta - offset;
      cdouble m;
      if (weak_probe) {
        m = 1.0 - kI * q.gamma_r * std::exp(kI * q.phi) / cdouble(q.delta, q.gamma_2);
      } else {
        const double den = q.omega * q.omega * q.gamma_2 +
                           q.gamma_1 * (q.delta * q.delta + q.gamma_2 * q.gamma_2);
        m = 1.0 - kI * q.gamma_r * std::exp(kI * q.phi) * q.gamma_1 * cdouble(q.delta, -q.gamma_2) / den;
      }
      const cdouble diff = trace[i].r - m;
      res[2 * i] = diff.real();
      res[2 * i + 1] = diff.imag();
    }
    return res;
  };

  Eigen::VectorXd x0(4);
  x0 << guess.phi, guess.gamma_r / unit, guess.gamma_2 / unit, 0.0;
  LeastSquaresOptions lso;
  lso.max_iterations = opts.max_iterations;
  lso.relative_cost_tolerance = opts.relative_cost_tolerance;
  const LeastSquaresResult ls = levenberg_marquardt(model, x0, lso);
  if (!ls.converged) {
    throw ConvergenceError("fit_reflection: residual still decreasing after " +
                           std::to_string(ls.iterations) + " iterations");
  }

  ReflectionFit fit;
  fit.params = guess;
  fit.params.phi = ls.x[0];
  fit.params.gamma_r = ls.x[1] * unit;
  fit.params.gamma_2 = ls.x[2] * unit;
  fit.params.gamma_n = fit.params.gamma_1 - fit.params.gamma_r;
  fit.params.gamma_p = fit.params.gamma_2 - 0.5 * fit.params.gamma_1;
  fit.delta_offset = ls.x[3] * unit;
  fit.iterations = ls.iterations;
  fit.residual_norm = std::sqrt(2.0 * ls.cost);
  fit.residual_rms = fit.residual_norm / std::sqrt(static_cast<double>(trace.size()));
  fit.residual_flag = fit.residual_rms > opts.residual_flag_rms;
  return fit;
}

double dephasing_from_flux_noise(double a_phi, double f_ir, double t_total, double slope) {
  if (!(a_phi > 0.0 && f_ir > 0.0 && t_total > 0.0)) {
    throw ConfigError("dephasing_from_flux_noise: A_Phi, f_IR and t must be positive");
  }
  const double arg = kTwoPi * f_ir * t_total;
  if (arg == 1.0) throw ConfigError("dephasing_from_flux_noise: 2 pi f_IR t must differ from 1");
  return std::sqrt(a_phi * std::abs(std::log(arg))) * std::abs(slope);
}

double transmon_flux_slope(double omega_max, double omega) {
  if (!(omega_max > 0.0 && omega > 0.0 && omega <= omega_max)) {
    throw ConfigError("transmon_flux_slope: need 0 < omega <= omega_max");
  }
  const double c = (omega / omega_max) * (omega / omega_max);  // cos(pi Phi / Phi0)
  const double x = std::acos(c);
  // d/dPhi [omega_max sqrt(cos(pi Phi))] = omega_max * pi sin(x) / (2 sqrt(cos x))
  return omega_max * kPi * std::sin(x) / (2.0 * std::sqrt(c));
}

void write_spectroscopy_csv(const std::string& path, const std::vector<ReflectionPoint>& trace) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  csv::write_row(out, std::vector<std::string>{"delta_hz", "re_r", "im_r"});
  for (const auto& pt : trace) {
    csv::write_row(out, std::vector<double>{pt.delta / kTwoPi, pt.r.real(), pt.r.imag()});
  }
}

std::vector<ReflectionPoint> read_spectroscopy_csv(const std::string& path) {
  const auto table = csv::read_numeric(path, {"delta_hz", "re_r", "im_r"});
  std::vector<ReflectionPoint> trace;
  trace.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    trace.push_back({row[0] * kTwoPi, cdouble(row[1], row[2])});
  }
  return trace;
}

}  // namespace qubit
}  // namespace mirrorqed
