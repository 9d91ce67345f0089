#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <random>

#include "mirrorqed/errors.hpp"
#include "mirrorqed/qubit_dynamics.hpp"

using namespace mirrorqed;

namespace {

SystemParams mismatched_s1() {
  SystemParams p = table_s1_params();
  p.phi = 0.319;
  return p;
}

// Coherent output field from the steady state: a_out = a_in - i sqrt(Gamma_r e^{i phi}) <sigma_->.
cdouble reflection_from_state(const SystemParams& p, const QubitState& s) {
  cdouble a_in = p.omega / (2.0 * std::sqrt(p.gamma_r) * std::exp(kI * (0.5 * p.phi)));
  cdouble a_out = a_in - kI * std::sqrt(p.gamma_r) * std::exp(kI * (0.5 * p.phi)) * s.sigma_minus;
  return a_out / a_in;
}

}  // namespace

TEST(SystemParams, DerivedRatesAndPresets) {
  SystemParams s1 = table_s1_params();
  EXPECT_NEAR(s1.gamma_n / kTwoPi, -7e3, 1.0);
  EXPECT_NEAR(s1.gamma_p / kTwoPi, 523e3 - 551.5e3, 1.0);
  EXPECT_FALSE(s1.is_physical());
  EXPECT_NO_THROW(s1.validate());
  SystemParams ideal = ideal_line_params();
  EXPECT_TRUE(ideal.is_physical());
  EXPECT_DOUBLE_EQ(ideal.gamma_2, 0.5 * ideal.gamma_1);
}

TEST(SystemParams, ValidationRejectsBadInput) {
  SystemParams p = ideal_line_params();
  p.phi = 1.6;
  EXPECT_THROW(p.validate(), ConfigError);
  p = ideal_line_params();
  p.gamma_2 *= 1.1;
  EXPECT_THROW(p.validate(), ConfigError);
  p = ideal_line_params();
  p.omega = std::nan("");
  EXPECT_THROW(p.validate(), ConfigError);
}

TEST(SteadyState, AnalyticMatchesLiouvillianKernel) {
  SystemParams base = SystemParams::from_loss_rates(mhz(1.1), mhz(0.05), mhz(0.08));
  for (double d : {-3.0, -0.7, 0.0, 0.4, 2.5}) {
    for (double o : {0.05, 0.7, 1.9}) {
      SystemParams p = base.with_drive(d * base.gamma_r, o * base.gamma_r);
      QubitState a = qubit::steady_state_analytic(p);
      QubitState n = qubit::steady_state_numeric(p);
      EXPECT_LT(hilbert::max_abs(a.rho - n.rho), 1e-10) << d << " " << o;
      // Liouvillian annihilates the analytic state.
      CVector lv = qubit::liouvillian(p) * hilbert::vec(a.rho);
      EXPECT_LT(lv.cwiseAbs().maxCoeff() / p.gamma_r, 1e-12);
    }
  }
}

TEST(SteadyState, UndrivenIsGround) {
  QubitState s = qubit::steady_state_analytic(ideal_line_params());
  EXPECT_NEAR(std::abs(s.rho(0, 0) - 1.0), 0.0, 1e-15);
  EXPECT_DOUBLE_EQ(s.coherence, 0.0);
}

TEST(SteadyState, CoherenceMaximumOverDrive) {
  SystemParams p = table_s1_params();
  double best = 0.0;
  for (int k = 1; k <= 4000; ++k) {
    double o = 2.0 * p.gamma_r * k / 4000.0;
    best = std::max(best, qubit::steady_state_numeric(p.with_drive(0.0, o)).coherence);
  }
  EXPECT_NEAR(best, 0.36307, 5e-5);
}

TEST(Reflection, WeakProbeLimit) {
  SystemParams p = mismatched_s1();
  for (double d : {-2.0, 0.0, 0.3, 1.5}) {
    SystemParams q = p.with_drive(d * p.gamma_r, 1e-5 * p.gamma_r);
    EXPECT_LT(std::abs(qubit::reflection_coefficient(q) - qubit::reflection_weak_probe(q)), 1e-9);
  }
}

TEST(Reflection, MatchesOutputFieldOfSteadyState) {
  SystemParams p = mismatched_s1();
  for (double o : {0.2, 0.7, 1.5}) {
    SystemParams q = p.with_drive(0.3 * p.gamma_r, o * p.gamma_r);
    cdouble expect = reflection_from_state(q, qubit::steady_state_numeric(q));
    EXPECT_LT(std::abs(qubit::reflection_coefficient(q) - expect), 1e-10);
  }
}

TEST(Reflection, CriticalDriveCancelsReflection) {
  SystemParams p = mismatched_s1();
  qubit::DrivePoint c = qubit::critical_drive(p);
  EXPECT_NEAR(std::abs(c.delta) / kTwoPi, 170e3, 5e3);
  cdouble r = qubit::reflection_coefficient(p.with_drive(c.delta, c.omega));
  EXPECT_LT(std::abs(r), 1e-12);
  // Cancellation is isolated: nearby drives reflect.
  EXPECT_GT(std::abs(qubit::reflection_coefficient(p.with_drive(c.delta, 1.05 * c.omega))), 1e-3);
}

TEST(Reflection, CriticalDriveWithoutSolution) {
  SystemParams p = SystemParams::from_loss_rates(mhz(1.0), mhz(1.5), mhz(0.5));
  EXPECT_THROW(qubit::critical_drive(p), NoSolutionError);
}

TEST(Reflection, IdealAndLosslessCriticalDrive) {
  SystemParams ideal = ideal_line_params();
  EXPECT_NEAR(qubit::critical_drive(ideal).omega / ideal.gamma_r, 1.0 / std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(qubit::critical_drive(ideal).delta, 0.0, 1e-9);
  SystemParams lossless = ideal;
  lossless.phi = 0.319;
  EXPECT_NEAR(qubit::critical_drive(lossless).omega / lossless.gamma_r, 0.7061, 5e-4);
}

TEST(Reflection, ResonantMinimumEqualsSinPhi) {
  SystemParams p = ideal_line_params();
  p.phi = 0.319;
  double o = qubit::resonant_min_reflection_drive(p);
  double rmin = std::abs(qubit::reflection_coefficient(p.with_drive(0.0, o)));
  EXPECT_NEAR(rmin, std::abs(std::sin(p.phi)), 1e-12);
  for (double s : {0.98, 1.02})
    EXPECT_GT(std::abs(qubit::reflection_coefficient(p.with_drive(0.0, s * o))), rmin);
  EXPECT_NEAR(o / p.gamma_r, 0.7431, 1e-3);
  EXPECT_NEAR(rmin, 0.3136, 1e-3);
}

TEST(Reflection, MismatchCompensationRecoversMatchedLine) {
  SystemParams matched = table_s1_params();
  SystemParams measured = matched;
  measured.gamma_r *= 1.07;
  measured.phi = 0.319;
  for (double d : {-1.0, 0.2, 0.9}) {
    cdouble rm = qubit::reflection_coefficient(measured.with_drive(d * matched.gamma_r, 0.4 * matched.gamma_r));
    cdouble r0 = qubit::reflection_coefficient(matched.with_drive(d * matched.gamma_r, 0.4 * matched.gamma_r));
    EXPECT_LT(std::abs(qubit::compensate_mismatch(rm, 0.319, 1.07) - r0), 1e-12);
  }
}

TEST(Reflection, BoundaryModelLimitsAndExample) {
  BoundaryModel none{0.0, 1.0, 0.9, 0.7, mhz(1.0)};
  auto e0 = qubit::mismatch_from_boundary(none);
  EXPECT_NEAR(e0.gamma_r_eff / mhz(1.0), 1.0, 1e-12);
  EXPECT_NEAR(e0.phi_eff, 0.0, 1e-12);

  BoundaryModel b{0.18, std::sqrt(1.0 - 0.18 * 0.18), 0.94, 0.98, mhz(1.0)};
  auto e = qubit::mismatch_from_boundary(b);
  EXPECT_NEAR(e.gamma_r_eff / mhz(1.0), 1.0632, 1e-3);
  EXPECT_NEAR(e.phi_eff, 0.2086, 1e-3);
  cdouble loop = b.t1 * b.t1 * b.beta * b.beta * std::exp(kI * (2.0 * b.phi0));
  cdouble w = loop * b.gamma_r0 / (b.r1 + loop);
  EXPECT_NEAR(std::abs(w), e.gamma_r_eff, 1e-9 * std::abs(w));
  EXPECT_NEAR(std::arg(w), e.phi_eff, 1e-12);
}

TEST(ReflectionFit, RecoversWeakProbeParameters) {
  SystemParams truth = mismatched_s1();
  const double offset = khz(35.0);
  std::vector<qubit::ReflectionPoint> trace;
  std::mt19937_64 rng(7);
  std::normal_distribution<double> noise(0.0, 1e-4);
  for (int k = -60; k <= 60; ++k) {
    double d = 3.0 * truth.gamma_r * k / 60.0;
    SystemParams q = truth.with_drive(d - offset, 0.0);
    trace.push_back({d, qubit::reflection_weak_probe(q) + cdouble(noise(rng), noise(rng))});
  }
  SystemParams guess = SystemParams::from_loss_rates(mhz(1.0), 0.0, mhz(0.1));
  auto fit = qubit::fit_reflection(trace, true, guess);
  EXPECT_NEAR(fit.params.phi, truth.phi, 1e-3);
  EXPECT_NEAR(fit.params.gamma_r / truth.gamma_r, 1.0, 1e-3);
  EXPECT_NEAR(fit.params.gamma_2 / truth.gamma_2, 1.0, 1e-3);
  EXPECT_NEAR((fit.delta_offset - offset) / truth.gamma_r, 0.0, 1e-3);
  EXPECT_FALSE(fit.residual_flag);
}

TEST(ReflectionFit, FlagsModelMismatch) {
  std::vector<qubit::ReflectionPoint> trace;
  for (int k = -40; k <= 40; ++k) {
    double d = mhz(3.0) * k / 40.0;
    // Two resonances: a single-emitter model cannot describe this.
    cdouble r = 1.0 - kI * mhz(1.0) / (d - mhz(1.2) + kI * mhz(0.5)) - kI * mhz(1.0) / (d + mhz(1.2) + kI * mhz(0.5));
    trace.push_back({d, r});
  }
  SystemParams guess = SystemParams::from_loss_rates(mhz(1.0), 0.0, mhz(0.1));
  try {
    auto fit = qubit::fit_reflection(trace, true, guess);
    EXPECT_TRUE(fit.residual_flag);
  } catch (const ConvergenceError&) {
    SUCCEED();
  }
}

TEST(FluxNoise, DephasingOrderOfMagnitude) {
  double slope = qubit::transmon_flux_slope(mhz(5507.03), mhz(5100.0));
  EXPECT_GT(slope, 0.0);
  // Numerical derivative of omega(Phi) = omega_max sqrt(cos(pi Phi)).
  double phi0 = std::acos(std::pow(5100.0 / 5507.03, 2)) / kPi;
  auto w = [](double x) { return mhz(5507.03) * std::sqrt(std::cos(kPi * x)); };
  double num = -(w(phi0 + 1e-7) - w(phi0 - 1e-7)) / 2e-7;
  EXPECT_NEAR(slope / num, 1.0, 1e-6);
  for (double t : {1e-5, 1e-4, 1e-3}) {
    double g = qubit::dephasing_from_flux_noise(4e-12, 1.0, t, slope);
    EXPECT_GT(g / kTwoPi, 20e3);
    EXPECT_LT(g / kTwoPi, 32e3);
  }
  EXPECT_EQ(qubit::dephasing_from_flux_noise(4e-12, 1.0, 1e-4, 0.0), 0.0);
  EXPECT_NEAR(qubit::dephasing_from_flux_noise(16e-12, 1.0, 1e-4, slope),
              2.0 * qubit::dephasing_from_flux_noise(4e-12, 1.0, 1e-4, slope), 1e-9);
}

TEST(SpectroscopyCsv, RoundTrip) {
  std::vector<qubit::ReflectionPoint> trace{{mhz(-1.0), {0.25, -0.125}}, {0.0, {1.0 / 3.0, 0.0}}, {mhz(2.0), {-0.5, 1e-17}}};
  std::string path = ::testing::TempDir() + "spec_roundtrip.csv";
  qubit::write_spectroscopy_csv(path, trace);
  auto back = qubit::read_spectroscopy_csv(path);
  ASSERT_EQ(back.size(), trace.size());
  for (std::size_t k = 0; k < trace.size(); ++k) {
    EXPECT_NEAR(back[k].delta, trace[k].delta, 1e-9 * std::abs(trace[k].delta) + 1e-12);
    EXPECT_EQ(back[k].r, trace[k].r);
  }
  std::remove(path.c_str());
  EXPECT_THROW(qubit::read_spectroscopy_csv("/nonexistent/file.csv"), ConfigError);
}
