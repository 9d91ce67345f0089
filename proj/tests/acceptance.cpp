// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "mirrorqed/experiments.hpp"
#include "mirrorqed/hilbert.hpp"
#include "mirrorqed/qubit_dynamics.hpp"
#include "mirrorqed/spectrum.hpp"
#include "mirrorqed/temporal_modes.hpp"
#include "mirrorqed/tomography.hpp"
#include "mirrorqed/wigner.hpp"

using namespace mirrorqed;
using namespace mirrorqed::experiments;

namespace {

struct Check {
  bool pass = true;
  std::string detail;

  void expect(bool ok, const char* fmt, ...) __attribute__((format(printf, 3, 4)));
};

void Check::expect(bool ok, const char* fmt, ...) {
  char buf[256];
  va_list args;
  va_start(args, fmt);
  std::vsnprintf(buf, sizeof buf, fmt, args);
  va_end(args);
  if (!detail.empty()) detail += "; ";
  detail += buf;
  if (!ok) {
    detail += " [x]";
    pass = false;
  }
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool near(double a, double b, double tol) { return std::abs(a - b) <= tol; }

// Golden-section extremum of a unimodal function on [a, b].
double golden(const std::function<double(double)>& f, double a, double b, bool maximise) {
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - g * (b - a), d = a + g * (b - a);
  auto better = [&](double x, double y) { return maximise ? f(x) > f(y) : f(x) < f(y); };
  for (int k = 0; k < 200 && b - a > 1e-13 * std::abs(b); ++k) {
    if (better(c, d)) {
      b = d;
    } else {
      a = c;
    }
    c = b - g * (b - a);
    d = a + g * (b - a);
  }
  return 0.5 * (a + b);
}

// Bisection for the sign change of f on [a, b].
double bisect(const std::function<bool(double)>& positive, double a, double b) {
  const bool pa = positive(a);
  for (int k = 0; k < 40; ++k) {
    const double m = 0.5 * (a + b);
    (positive(m) == pa ? a : b) = m;
  }
  return 0.5 * (a + b);
}

ExperimentConfig base_config(const std::string& json = "{}") { return parse_config(json); }

// Shared between criteria 5, 6 and 11.
struct Shared {
  bool have_gaussian = false;
  FilterOptimum gaussian;
  double boxcar_peak_tau = 0.0;
  double boxcar_peak_wln = 0.0;
};
Shared shared;

const FilterOptimum& gaussian_optimum() {
  if (!shared.have_gaussian) {
    ExperimentConfig c = base_config(
        R"({"filter": {"kind": "gaussian", "width": 0.4, "range": [0.1, 1.5]}, "optimizer": {"budget": 80, "restarts": 1, "tolerance": 1e-3}})");
    shared.gaussian = optimize_filter(c);
    shared.have_gaussian = true;
  }
  return shared.gaussian;
}

Check steady_state_equivalence() {
  Check c;
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    const double gr = mhz(0.2 + 2.0 * u(rng));
    SystemParams p = SystemParams::from_loss_rates(gr, gr * 0.2 * u(rng), gr * 0.3 * u(rng), gr * (6.0 * u(rng) - 3.0),
                                                   gr * 3.0 * u(rng), 0.6 * u(rng) - 0.3);
    const QubitState a = qubit::steady_state_analytic(p);
    const QubitState n = qubit::steady_state_numeric(p);
    worst = std::max(worst, hilbert::max_abs(a.rho - n.rho));
  }
  const double dt = seconds_since(t0);
  c.expect(worst < 1e-10, "max elementwise deviation %.2e over 100 points", worst);
  c.expect(dt < 1.0, "%.3f s", dt);
  return c;
}

Check coherence_maximum() {
  Check c;
  const SystemParams p = table_s1_params();
  auto coherence = [&](double om) { return qubit::steady_state_analytic(p.with_drive(0.0, om)).coherence; };
  const double om_star = golden(coherence, 0.01 * p.gamma_2, 20.0 * p.gamma_1, true);
  const double predicted = std::sqrt(p.gamma_1 * p.gamma_2);
  const double closed = std::sqrt(p.gamma_1 / (16.0 * p.gamma_2));
  const double peak = coherence(om_star);
  c.expect(near(om_star / predicted, 1.0, 1e-6), "argmax/sqrt(G1 G2) = %.8f", om_star / predicted);
  c.expect(near(peak, closed, 1e-10), "peak %.6f vs closed form %.6f", peak, closed);
  c.expect(near(peak, 0.3631, 1e-3), "peak %.4f vs 0.3631", peak);
  return c;
}

Check critical_power() {
  Check c;
  const SystemParams ideal = ideal_line_params();
  const qubit::DrivePoint ci = qubit::critical_drive(ideal);
  const double r_ideal = std::abs(qubit::reflection_coefficient(ideal.with_drive(ci.delta, ci.omega)));
  c.expect(r_ideal < 1e-10, "ideal |r| = %.1e", r_ideal);
  c.expect(near(ci.omega / (ideal.gamma_r / std::sqrt(2.0)), 1.0, 1e-9), "ideal Omega*/(Gr/sqrt2) = %.10f",
           ci.omega / (ideal.gamma_r / std::sqrt(2.0)));

  SystemParams mis = table_s1_params();
  mis.phi = 0.319;
  const qubit::DrivePoint cm = qubit::critical_drive(mis);
  const double r_mis = std::abs(qubit::reflection_coefficient(mis.with_drive(cm.delta, cm.omega)));
  c.expect(r_mis < 1e-10, "mismatched |r| = %.1e", r_mis);
  const double d_khz = std::abs(cm.delta) / kTwoPi / 1e3;
  c.expect(near(d_khz, 170.0, 5.0), "|Delta*|/2pi = %.1f kHz", d_khz);

  SystemParams lossless = ideal_line_params();
  lossless.phi = 0.319;
  auto r_res = [&](double om) { return std::abs(qubit::reflection_coefficient(lossless.with_drive(0.0, om))); };
  const double om_min = golden(r_res, 0.05 * lossless.gamma_r, 3.0 * lossless.gamma_r, false);
  c.expect(near(r_res(om_min), std::abs(std::sin(0.319)), 1e-3), "resonant min |r| %.5f vs |sin 0.319| %.5f",
           r_res(om_min), std::abs(std::sin(0.319)));
  return c;
}

Check single_photon_capture() {
  Check c;
  const auto t0 = std::chrono::steady_clock::now();
  const SystemParams p = ideal_line_params();
  std::vector<double> t;
  std::vector<cdouble> v;
  const int n = 20001;
  for (int k = 0; k < n; ++k) {
    const double tk = 20.0 / p.gamma_1 * k / (n - 1);
    t.push_back(tk);
    v.push_back(std::sqrt(p.gamma_1) * std::exp(-0.5 * p.gamma_1 * tk));
  }
  const TemporalFilter f = make_custom(t, v);
  CMatrix excited = CMatrix::Zero(2, 2);
  excited(1, 1) = 1.0;
  SimOptions opts;
  opts.initial_qubit = excited;
  const CaptureResult r = simulate_capture(p, f, opts);
  CMatrix one = CMatrix::Zero(r.rho_mode.rows(), r.rho_mode.cols());
  one(1, 1) = 1.0;
  const double fid = tomography::fidelity(r.rho_mode, one);
  const LowOrderMoments oracle = moment_oracle_low_order(p, f, 3001, excited);
  const double dt = seconds_since(t0);
  c.expect(near(r.capture_efficiency, 1.0, 1e-3), "<n> = %.6f", r.capture_efficiency);
  c.expect(fid >= 0.999, "F(|1>) = %.6f", fid);
  c.expect(near(oracle.photon_number, r.capture_efficiency, 1e-3), "regression oracle <n> = %.6f",
           oracle.photon_number);
  c.expect(dt < 10.0, "%.2f s", dt);
  return c;
}

Check wln_curves() {
  Check c;
  const auto t0 = std::chrono::steady_clock::now();
  const Table t = run_wln_sweep(base_config(
      R"({"filter": {"kind": "boxcar"}, "sweep": {"name": "tau", "start": 0.5, "stop": 4.3, "points": 20}})"));
  const double dt = seconds_since(t0);
  const std::size_t w = t.column("wln_ideal");
  std::size_t k = 0;
  for (std::size_t i = 0; i < t.rows.size(); ++i)
    if (t.rows[i][w] > t.rows[k][w]) k = i;
  double tau_peak = t.rows[k][0], wln_peak = t.rows[k][w];
  if (k > 0 && k + 1 < t.rows.size()) {
    // Vertex of the parabola through the maximum and its neighbours.
    const double y0 = t.rows[k - 1][w], y1 = t.rows[k][w], y2 = t.rows[k + 1][w];
    const double h = t.rows[k][0] - t.rows[k - 1][0];
    const double den = y0 - 2.0 * y1 + y2;
    if (den < 0.0) {
      const double s = 0.5 * (y0 - y2) / den;
      tau_peak += s * h;
      wln_peak = y1 - 0.25 * (y0 - y2) * s;
    }
  }
  shared.boxcar_peak_tau = tau_peak;
  shared.boxcar_peak_wln = wln_peak;
  c.expect(near(tau_peak, 2.1, 0.3), "boxcar peak tau %.3f", tau_peak);
  c.expect(wln_peak >= 0.03 && wln_peak <= 0.06, "boxcar peak WLN %.4f", wln_peak);

  const ExperimentConfig g = base_config(R"({"filter": {"kind": "gaussian", "width": 0.5}})");
  const SystemParams d = driven_params(g);
  const double w05 = ideal_wln(g, d, build_filter("gaussian", 0.5, d));
  c.expect(w05 >= 0.08, "gaussian xi=0.5 WLN %.4f", w05);
  const double ratio = gaussian_optimum().wln / wln_peak;
  c.expect(near(ratio, 2.0, 0.5), "gaussian/boxcar peak %.3f", ratio);
  c.expect(dt < 300.0, "20-point sweep %.1f s", dt);
  return c;
}

Check population_structure() {
  Check c;
  ExperimentConfig cfg = base_config(R"({"filter": {"kind": "boxcar"}})");
  const SystemParams d = driven_params(cfg);
  SimOptions opts;
  opts.fock_cutoff = cfg.fock_cutoff;
  auto populations = [&](double tau) {
    const CMatrix rho = simulate_capture(d, build_filter("boxcar", tau, d), opts).rho_mode;
    return std::vector<double>{rho(0, 0).real(), rho(1, 1).real(), rho(2, 2).real()};
  };
  const std::vector<double> pop = populations(shared.boxcar_peak_tau);
  c.expect(near(pop[1] / pop[0], 2.0, 0.3), "at tau %.2f rho11/rho00 %.3f", shared.boxcar_peak_tau, pop[1] / pop[0]);
  c.expect(near(pop[1] / pop[2], 4.0, 0.6), "rho11/rho22 %.3f", pop[1] / pop[2]);
  const double cross = bisect(
      [&](double tau) {
        const auto q = populations(tau);
        return q[1] > q[0];
      },
      0.3, 2.0);
  const double onset =
      bisect([&](double tau) { return ideal_wln(cfg, d, build_filter("boxcar", tau, d)) > 0.0; }, 0.3, 2.0);
  c.expect(near(onset, cross, 0.25), "WLN onset tau %.3f, rho00=rho11 at tau %.3f", onset, cross);
  return c;
}

Check pipeline_fidelity() {
  Check c;
  struct Case {
    const char* kind;
    double width;
  };
  double worst_exact = 1.0;
  for (Case k : {Case{"boxcar", 1.0}, Case{"boxcar", 2.0}, Case{"gaussian", 0.3}, Case{"gaussian", 0.5}}) {
    ExperimentConfig cfg = base_config();
    cfg.filter_kind = k.kind;
    cfg.filter_width = k.width;
    cfg.check_grid = false;
    const SystemParams d = driven_params(cfg);
    worst_exact = std::min(worst_exact, evaluate_point(cfg, d, build_filter(k.kind, k.width, d), 1).fidelity);
  }
  c.expect(worst_exact >= 0.999, "exact moments min F %.5f", worst_exact);
  for (Case k : {Case{"boxcar", 2.0}, Case{"gaussian", 0.5}}) {
    ExperimentConfig cfg = base_config();
    cfg.filter_kind = k.kind;
    cfg.filter_width = k.width;
    cfg.check_grid = false;
    cfg.noise_photons = 1.0;
    cfg.shots = 1000000;
    const SystemParams d = driven_params(cfg);
    const double f = evaluate_point(cfg, d, build_filter(k.kind, k.width, d), 7).fidelity;
    c.expect(f >= 0.99, "%s %.1f noisy (n_h=1, 1e6 shots) F %.5f", k.kind, k.width, f);
  }
  return c;
}

// Radial quadrature of |W| for |1>, W(r) = (2/pi)(4r^2 - 1)exp(-2r^2).
double single_photon_abs_integral() {
  const int n = 20000;
  const double rmax = 8.0, h = rmax / n;
  double s = 0.0;
  for (int k = 0; k <= n; ++k) {
    const double r = k * h;
    const double f = 2.0 * kPi * r * std::abs((2.0 / kPi) * (4.0 * r * r - 1.0) * std::exp(-2.0 * r * r));
    s += f * (k == 0 || k == n ? 1.0 : (k % 2 ? 4.0 : 2.0));
  }
  return s * h / 3.0;
}

Check wigner_correctness() {
  Check c;
  const std::size_t dim = 12;
  CMatrix vac = CMatrix::Zero(dim, dim), one = CMatrix::Zero(dim, dim);
  vac(0, 0) = 1.0;
  one(1, 1) = 1.0;
  const double wv = wigner::wigner_point(vac, 0.0).real();
  const double w1 = wigner::wigner_point(one, 0.0).real();
  c.expect(near(wv, 2.0 / kPi, 1e-6) && near(w1, -2.0 / kPi, 1e-6), "W_vac(0)=%.8f W_1(0)=%.8f", wv, w1);
  const WignerGrid g = wigner::wigner_grid(one);
  c.expect(near(g.normalization, 1.0, 1e-3), "int W = %.6f", g.normalization);
  const double oracle = std::log(single_photon_abs_integral());
  const double wln1 = wigner::wln(g);
  c.expect(near(oracle, 0.3548, 1e-3), "radial quadrature WLN %.5f", oracle);
  c.expect(near(wln1, oracle, 1e-3), "grid WLN(|1>) %.5f", wln1);

  CVector psi = CVector::Zero(dim);
  psi(0) = std::sqrt(0.6);
  psi(1) = std::sqrt(0.4);
  const CMatrix sup = psi * psi.adjoint();
  const double base = wigner::wln(sup, 5.0, 0.05);
  CMatrix rot = sup;
  for (Eigen::Index i = 0; i < rot.rows(); ++i)
    for (Eigen::Index j = 0; j < rot.cols(); ++j) rot(i, j) *= std::exp(kI * 0.9 * double(i - j));
  const CMatrix shifted = tomography::displace_state(sup, cdouble(0.8, -0.5)).rho;
  const double wr = wigner::wln(rot, 5.0, 0.05);
  const double ws = wigner::wln(shifted, 6.0, 0.05);
  c.expect(near(wr, base, 1e-3) && near(ws, base, 1e-3), "WLN %.5f rotated %.5f displaced %.5f", base, wr, ws);
  return c;
}

Check dephasing_sensitivity() {
  Check c;
  const auto t0 = std::chrono::steady_clock::now();
  const DephasingMap m = run_dephasing_map(base_config(
      R"({"filter": {"kind": "gaussian", "width": 0.5, "range": [0.2, 1.2]},
          "sweep": {"name": "gamma_p_khz", "start": 0, "stop": 25, "points": 2},
          "sweep2": {"name": "gamma_n_over_gamma_r", "start": 0, "stop": 0.023, "points": 2}})"));
  const double dt = seconds_since(t0);
  const std::size_t gp = m.map.column("gamma_p_khz"), gn = m.map.column("gamma_n_over_gamma_r"),
                    w = m.map.column("wln");
  double lossless = NAN, dephased = NAN, lossy = NAN;
  for (const auto& r : m.map.rows) {
    if (r[gp] == 0.0 && r[gn] == 0.0) lossless = r[w];
    if (r[gp] == 25.0 && r[gn] == 0.0) dephased = r[w];
    if (r[gp] == 0.0 && r[gn] == 0.023) lossy = r[w];
  }
  c.expect(near(dephased / lossless, 0.5, 0.1), "Gp=25 kHz: WLN %.4f = %.3f x lossless %.4f", dephased,
           dephased / lossless, lossless);
  c.expect(near(lossy, 0.07, 0.015), "Gn=0.023 Gr: WLN %.4f", lossy);
  c.expect(dt < 600.0, "%.1f s", dt);
  return c;
}

Check calibration_chain() {
  Check c;
  const double p = spectrum::rabi_to_power(mhz(5.75), mhz(5507.03), mhz(1.110));
  c.expect(near(p, -172.7, 0.05), "rabi_to_power %.2f dBm vs -172.7", p);

  const SystemParams s1 = table_s1_params().with_drive(0.0, mhz(5.75));
  const CorrelationTrace corr = spectrum::two_time_correlation(s1, 8e-6, 8192);
  PsdOptions o;
  o.omega_max = mhz(20.0);
  o.n_freqs = 801;
  Spectrum s = spectrum::psd(corr, o);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> noise(0.0, 0.02);
  for (double& v : s.psd) v *= 1.0 + noise(rng);
  const RabiFit f = spectrum::fit_rabi_from_psd(s, s1.with_drive(0.0, mhz(6.5)));
  c.expect(near(f.omega / s1.omega, 1.0, 0.02), "5.75 MHz Mollow fit ratio %.4f", f.omega / s1.omega);

  const char* opts = R"("mollow": {"tau_max_us": 15, "span_mhz": 6, "freqs": 401})";
  const MollowResult mis =
      run_mollow(base_config(std::string(R"({"params": {"preset": "table_s1", "phi": 0.319}, )") + opts + "}"));
  const MollowResult ideal = run_mollow(base_config(std::string("{") + opts + "}"));
  const double rm = mis.fitted_omega.back() / table_s1_params().gamma_1;
  const double ri = ideal.fitted_omega.back() / ideal_line_params().gamma_1;
  c.expect(near(rm, 0.74, 0.02), "mismatch Omega_m/G1 %.4f", rm);
  c.expect(near(ri, 0.707, 0.01), "no mismatch Omega_m/G1 %.4f", ri);
  return c;
}

Check filter_optimisation() {
  Check c;
  const auto t0 = std::chrono::steady_clock::now();
  const FilterOptimum& g = gaussian_optimum();
  c.expect(near(g.parameters[0], 0.5, 0.1), "gaussian xi* %.3f WLN %.4f", g.parameters[0], g.wln);
  const FilterOptimum s = optimize_filter(base_config(
      R"({"filter": {"kind": "spline", "spline_nodes": 6, "spline_window": 3.0}, "optimizer": {"budget": 400, "restarts": 1, "tolerance": 1e-3}})"));
  c.expect(s.wln <= g.wln + 0.005, "6-node spline WLN %.4f (%zu evaluations)", s.wln, s.evaluations);
  c.expect(true, "%.1f s", seconds_since(t0));
  return c;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    Check (*run)();
  };
  const std::vector<Criterion> criteria = {
      {"steady-state equivalence", steady_state_equivalence},
      {"coherence maximum", coherence_maximum},
      {"critical power", critical_power},
      {"single-photon capture", single_photon_capture},
      {"WLN curves", wln_curves},
      {"population structure", population_structure},
      {"pipeline fidelity", pipeline_fidelity},
      {"Wigner correctness", wigner_correctness},
      {"dephasing sensitivity", dephasing_sensitivity},
      {"calibration chain", calibration_chain},
      {"filter optimisation", filter_optimisation},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Check c;
    try {
      c = criteria[i].run();
    } catch (const std::exception& e) {
      c.pass = false;
      c.detail = std::string("exception: ") + e.what();
    }
    if (!c.pass) ++failed;
    std::printf("%s %zu %s: %s\n", c.pass ? "PASS" : "FAIL", i + 1, criteria[i].name, c.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
