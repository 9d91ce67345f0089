#include "mirrorqed/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "mirrorqed/csv.hpp"
#include "mirrorqed/errors.hpp"
#include "mirrorqed/least_squares.hpp"

namespace mirrorqed::spectrum {
namespace {

constexpr cdouble kI{0.0, 1.0};

}  // namespace

CorrelationTrace two_time_correlation(const SystemParams& p, double tau_max, std::size_t n_points,
                                      const std::optional<CMatrix>& initial) {
  p.validate();
  if (!(tau_max > 0.0) || n_points < 2) throw ConfigError("two_time_correlation needs tau_max > 0 and >= 2 points");
  const QubitState ss = qubit::steady_state_numeric(p);
  CMatrix ref = ss.rho;
  if (initial) {
    if (initial->rows() != 2 || initial->cols() != 2) throw ConfigError("initial qubit state must be 2x2");
    ref = *initial;
  }
  CorrelationTrace out;
  out.gamma_r = p.gamma_r;
  out.resonant = p.delta == 0.0;
  out.sigma_minus = ref(1, 0);
  out.excited_population = ref(1, 1).real();
  out.c_limit = std::conj(ss.sigma_minus) * ref(1, 0);

  const double dtau = tau_max / static_cast<double>(n_points - 1);
  const CMatrix step = hilbert::expm(qubit::liouvillian(p) * dtau);
  CVector x = hilbert::vec(qubit::sigma_minus() * ref);
  out.tau.resize(n_points);
  out.c.resize(n_points);
  for (std::size_t k = 0; k < n_points; ++k) {
    out.tau[k] = dtau * static_cast<double>(k);
    out.c[k] = x(2);  // Tr[sigma_+ X] = X(0,1)
    x = step * x;
  }
  return out;
}

std::vector<double> frequency_grid(double omega_max, std::size_t n) {
  if (!(omega_max > 0.0) || n < 3) throw ConfigError("frequency grid needs omega_max > 0 and >= 3 points");
  std::vector<double> w(n);
  const double dw = 2.0 * omega_max / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) w[i] = -omega_max + dw * static_cast<double>(i);
  // Exact mirror symmetry.
  for (std::size_t i = 0; i < n / 2; ++i) w[n - 1 - i] = -w[i];
  if (n % 2 == 1) w[n / 2] = 0.0;
  return w;
}

Spectrum psd(const CorrelationTrace& corr, const PsdOptions& opts) {
  const std::size_t n = corr.c.size();
  if (n < 2) throw ConfigError("psd needs a correlation with at least two points");
  const double dtau = corr.step();
  std::vector<cdouble> inc(n);
  double ref = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    inc[k] = corr.c[k] - corr.c_limit;
    ref = std::max(ref, std::abs(inc[k]));
  }
  if (ref > 0.0 && std::abs(inc.back()) > 1e-6 * std::max(std::abs(inc.front()), 1e-300) &&
      std::abs(inc.back()) > 1e-6 * ref)
    throw WindowError("correlation has not decayed by tau_max (|C(end)|/|C(0)| = " +
                      std::to_string(std::abs(inc.back()) / std::abs(inc.front())) + ")");

  Spectrum s;
  const double wmax = opts.omega_max > 0.0 ? opts.omega_max : kPi / dtau;
  std::size_t nf_auto = opts.n_freqs;
  if (nf_auto == 0) {
    // Spacing pi / tau_max: finer than any linewidth the trace can resolve.
    const double tmax = corr.tau.back();
    nf_auto = std::max<std::size_t>(2001, 2 * static_cast<std::size_t>(std::ceil(wmax * tmax / kPi)) + 1);
  }
  s.freqs = frequency_grid(wmax, nf_auto);
  s.psd.assign(s.freqs.size(), 0.0);
  const double pref = corr.gamma_r / kPi * dtau;
  const auto nf = static_cast<long>(s.freqs.size());
#pragma omp parallel for schedule(static)
  for (long i = 0; i < nf; ++i) {
    const double w = s.freqs[static_cast<std::size_t>(i)];
    const cdouble rot = std::exp(-kI * w * dtau);
    cdouble phase{1.0, 0.0};
    cdouble acc{0.0, 0.0};
    for (std::size_t k = 0; k < n; ++k) {
      const double weight = (k == 0 || k + 1 == n) ? 0.5 : 1.0;
      acc += weight * inc[k] * phase;
      // Re-anchor the phase now and then to keep rounding from accumulating.
      phase = (k % 256 == 255) ? std::exp(-kI * w * corr.tau[k + 1 < n ? k + 1 : k]) : phase * rot;
    }
    s.psd[static_cast<std::size_t>(i)] = pref * acc.real();
  }

  const std::size_t m = s.psd.size();
  const double peak = *std::max_element(s.psd.begin(), s.psd.end());
  double asym = 0.0;
  for (std::size_t i = 0; i < m / 2; ++i) asym = std::max(asym, std::abs(s.psd[i] - s.psd[m - 1 - i]));
  s.asymmetry = peak > 0.0 ? asym / peak : 0.0;
  if (corr.resonant) {
    for (std::size_t i = 0; i < m / 2; ++i) {
      const double avg = 0.5 * (s.psd[i] + s.psd[m - 1 - i]);
      s.psd[i] = avg;
      s.psd[m - 1 - i] = avg;
    }
  }
  double flux = 0.0;
  for (std::size_t i = 0; i + 1 < m; ++i) flux += 0.5 * (s.psd[i] + s.psd[i + 1]) * (s.freqs[i + 1] - s.freqs[i]);
  s.incoherent_flux = flux;
  s.coherent_flux = corr.gamma_r * corr.c_limit.real();
  return s;
}

std::vector<double> model_psd(const SystemParams& p, const std::vector<double>& freqs) {
  const QubitState ss = qubit::steady_state_numeric(p);
  const CVector rho_ss = hilbert::vec(ss.rho);
  const CVector trace_row = hilbert::vec(hilbert::identity(2));
  // Removing the stationary mode leaves the traceless dynamics untouched and
  // makes the resolvent regular at w = 0.
  const CMatrix l = qubit::liouvillian(p) - rho_ss * trace_row.adjoint();
  const CVector x0 = hilbert::vec((qubit::sigma_minus() - ss.sigma_minus * hilbert::identity(2)) * ss.rho);
  std::vector<double> out(freqs.size());
  for (std::size_t i = 0; i < freqs.size(); ++i) {
    const CMatrix shifted = l - kI * freqs[i] * CMatrix::Identity(4, 4);
    const CVector y = -shifted.partialPivLu().solve(x0);
    out[i] = p.gamma_r / kPi * y(2).real();
  }
  return out;
}

std::vector<double> sideband_positions(const Spectrum& s) {
  const std::size_t n = s.psd.size();
  std::vector<double> out;
  if (n < 3) return out;
  std::optional<std::size_t> lower, upper;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (!(s.psd[i] > s.psd[i - 1] && s.psd[i] >= s.psd[i + 1])) continue;
    if (s.freqs[i] < 0.0 && std::abs(s.freqs[i]) > 0.5 * (s.freqs[i + 1] - s.freqs[i])) {
      if (!lower) lower = i;
    } else if (s.freqs[i] > 0.0 && std::abs(s.freqs[i]) > 0.5 * (s.freqs[i] - s.freqs[i - 1])) {
      upper = i;
    }
  }
  if (lower) out.push_back(s.freqs[*lower]);
  if (upper) out.push_back(s.freqs[*upper]);
  return out;
}

RabiFit fit_rabi_from_psd(const Spectrum& s, const SystemParams& p_init) {
  p_init.validate();
  if (s.psd.size() < 4) throw ConfigError("fit_rabi_from_psd needs at least four spectral points");
  double scale = 0.0;
  for (double v : s.psd) scale = std::max(scale, std::abs(v));
  if (!(scale > 0.0)) throw UnresolvedError("fit_rabi_from_psd: spectrum is identically zero");

  std::vector<double> starts;
  if (p_init.omega > 0.0) starts.push_back(p_init.omega);
  const std::vector<double> sides = sideband_positions(s);
  for (double w : sides) {
    const double est = std::sqrt(std::max(w * w - p_init.delta * p_init.delta, 0.0));
    if (est > 0.0) starts.push_back(est);
  }
  if (starts.empty()) starts.push_back(std::max(p_init.gamma_2, p_init.gamma_r));

  const double unit = starts.front();
  auto residuals = [&](const Eigen::VectorXd& x) {
    const std::vector<double> m = model_psd(p_init.with_drive(p_init.delta, std::abs(x[0]) * unit), s.freqs);
    Eigen::VectorXd r(static_cast<Eigen::Index>(m.size()));
    for (std::size_t i = 0; i < m.size(); ++i) r[static_cast<Eigen::Index>(i)] = (m[i] - s.psd[i]) / scale;
    return r;
  };

  LeastSquaresResult best;
  best.cost = std::numeric_limits<double>::infinity();
  for (double start : starts) {
    LeastSquaresOptions o;
    o.relative_cost_tolerance = 1e-14;
    o.max_iterations = 200;
    LeastSquaresResult r = levenberg_marquardt(residuals, Eigen::VectorXd::Constant(1, start / unit), o);
    if (r.cost < best.cost) best = r;
  }
  if (!std::isfinite(best.cost)) throw ConvergenceError("fit_rabi_from_psd: no finite fit");

  RabiFit fit;
  fit.omega = std::abs(best.x[0]) * unit;
  fit.iterations = best.iterations;
  const Eigen::VectorXd r = residuals(best.x);
  const auto npts = static_cast<double>(r.size());
  fit.residual_rms = std::sqrt(r.squaredNorm() / npts) * scale;
  const double h = 1e-6 * std::max(1.0, std::abs(best.x[0]));
  Eigen::VectorXd xp = best.x, xm = best.x;
  xp[0] += h;
  xm[0] -= h;
  const Eigen::VectorXd jac = (residuals(xp) - residuals(xm)) / (2.0 * h);
  const double curvature = jac.squaredNorm();
  const double variance = r.squaredNorm() / std::max(npts - 1.0, 1.0);
  fit.omega_error = curvature > 0.0 ? std::sqrt(variance / curvature) * unit : std::numeric_limits<double>::infinity();
  if (fit.omega < p_init.gamma_2)
    throw UnresolvedError("fit_rabi_from_psd: Omega " + std::to_string(fit.omega) +
                          " rad/s is below Gamma_2; the Mollow sidebands are not resolved");
  return fit;
}

double rabi_to_power(double omega, double omega01, double gamma_r) {
  if (!(omega > 0.0) || !(omega01 > 0.0) || !(gamma_r > 0.0))
    throw ConfigError("rabi_to_power needs positive Omega, omega01 and Gamma_r");
  const double omega_hz = omega / kTwoPi;
  const double gamma_hz = gamma_r / kTwoPi;
  const double watts = kHbar * omega01 * omega_hz * omega_hz / (4.0 * gamma_hz);
  return 10.0 * std::log10(watts / 1e-3);
}

CalibrationFit fit_gain(const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 2) throw ConfigError("fit_gain needs at least two points");
  CalibrationFit fit;
  fit.points = points;
  const auto n = static_cast<double>(points.size());
  double sum = 0.0;
  for (const auto& [pin, pmeas] : points) sum += pmeas - pin;
  fit.gain_db = sum / n;
  double ss = 0.0;
  for (const auto& [pin, pmeas] : points) {
    const double res = pmeas - pin - fit.gain_db;
    fit.residuals.push_back(res);
    ss += res * res;
  }
  fit.intercept_sigma = 2.0 * std::sqrt(ss / (n - 1.0) / n);
  return fit;
}

PooledGain pool_gains(const std::vector<CalibrationFit>& runs) {
  if (runs.size() < 2) throw ConfigError("pool_gains needs at least two runs");
  PooledGain out;
  out.runs = runs.size();
  const auto n = static_cast<double>(runs.size());
  for (const auto& r : runs) out.mean_db += r.gain_db;
  out.mean_db /= n;
  double ss = 0.0;
  for (const auto& r : runs) ss += (r.gain_db - out.mean_db) * (r.gain_db - out.mean_db);
  out.two_sigma_db = 2.0 * std::sqrt(ss / (n - 1.0) / n);
  return out;
}

std::string format_gain(double value_db, double error_db) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f±%.2f dB", value_db, error_db);
  return buf;
}

void write_spectrum_csv(const std::string& path, const Spectrum& s) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  csv::write_row(out, std::vector<std::string>{"f_hz_offset", "psd"});
  for (std::size_t i = 0; i < s.freqs.size(); ++i)
    csv::write_row(out, std::vector<double>{s.freqs[i] / kTwoPi, s.psd[i]});
}

Spectrum read_spectrum_csv(const std::string& path) {
  const auto table = csv::read_numeric(path, {"f_hz_offset", "psd"});
  Spectrum s;
  for (const auto& row : table.rows) {
    s.freqs.push_back(row[0] * kTwoPi);
    s.psd.push_back(row[1]);
  }
  for (std::size_t i = 1; i < s.freqs.size(); ++i)
    if (!(s.freqs[i] > s.freqs[i - 1])) throw ConfigError("spectrum frequencies must increase: " + path);
  return s;
}

void write_calibration_csv(const std::string& path, const std::vector<std::pair<double, double>>& points) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  csv::write_row(out, std::vector<std::string>{"p_in_dbm", "p_meas_dbm"});
  for (const auto& [a, b] : points) csv::write_row(out, std::vector<double>{a, b});
}

std::vector<std::pair<double, double>> read_calibration_csv(const std::string& path) {
  const auto table = csv::read_numeric(path, {"p_in_dbm", "p_meas_dbm"});
  std::vector<std::pair<double, double>> pts;
  for (const auto& row : table.rows) pts.emplace_back(row[0], row[1]);
  return pts;
}

}  // namespace mirrorqed::spectrum
