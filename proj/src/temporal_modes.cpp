#include "mirrorqed/temporal_modes.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "mirrorqed/csv.hpp"
#include "mirrorqed/errors.hpp"

namespace mirrorqed {

namespace {

constexpr double kGaussianSupport = 6.0;

double interval_norm(cdouble a, cdouble b, double h) {
  return h * (std::norm(a) + std::real(a * std::conj(b)) + std::norm(b)) / 3.0;
}

}  // namespace

std::string to_string(FilterKind kind) {
  switch (kind) {
    case FilterKind::boxcar:
      return "boxcar";
    case FilterKind::gaussian:
      return "gaussian";
    case FilterKind::custom:
      return "custom";
  }
  return "custom";
}

std::size_t TemporalFilter::segment(double t) const {
  auto it = std::upper_bound(times_.begin(), times_.end(), t);
  std::size_t k = static_cast<std::size_t>(it - times_.begin());
  if (k == 0) return 0;
  return std::min(k - 1, times_.size() - 2);
}

cdouble TemporalFilter::amplitude(double t) const {
  if (t < t_begin_ || t > t_end_) return {0.0, 0.0};
  switch (kind_) {
    case FilterKind::boxcar:
      return {amplitude_scale_, 0.0};
    case FilterKind::gaussian: {
      double x = (t - center_) * gamma_2_ / width_;
      return {amplitude_scale_ * std::exp(-0.25 * x * x), 0.0};
    }
    case FilterKind::custom: {
      std::size_t k = segment(t);
      double h = times_[k + 1] - times_[k];
      double s = (t - times_[k]) / h;
      return values_[k] + (values_[k + 1] - values_[k]) * s;
    }
  }
  return {0.0, 0.0};
}

double TemporalFilter::absorbed_norm(double t) const {
  if (t <= t_begin_) return 0.0;
  t = std::min(t, t_end_);
  switch (kind_) {
    case FilterKind::boxcar:
      return amplitude_scale_ * amplitude_scale_ * (t - t_begin_);
    case FilterKind::gaussian: {
      // |f|^2 is a normal density with standard deviation xi / Gamma_2.
      double sd = width_ / gamma_2_;
      auto cdf = [&](double u) { return 0.5 * std::erfc(-(u - center_) / (sd * std::sqrt(2.0))); };
      return cdf(t) - cdf(t_begin_);
    }
    case FilterKind::custom: {
      std::size_t k = segment(t);
      double h = t - times_[k];
      return cumulative_[k] + interval_norm(values_[k], amplitude(t), h);
    }
  }
  return 0.0;
}

cdouble TemporalFilter::integral() const {
  switch (kind_) {
    case FilterKind::boxcar:
      return {amplitude_scale_ * (t_end_ - t_begin_), 0.0};
    case FilterKind::gaussian: {
      double sd = width_ / gamma_2_;
      double full = amplitude_scale_ * 2.0 * sd * std::sqrt(kPi);
      return {full * std::erf(kGaussianSupport / 2.0), 0.0};
    }
    case FilterKind::custom: {
      cdouble acc{0.0, 0.0};
      for (std::size_t k = 0; k + 1 < times_.size(); ++k)
        acc += 0.5 * (values_[k] + values_[k + 1]) * (times_[k + 1] - times_[k]);
      return acc;
    }
  }
  return {0.0, 0.0};
}

double TemporalFilter::sample_norm() const {
  double acc = 0.0;
  for (std::size_t k = 0; k + 1 < times_.size(); ++k)
    acc += 0.5 * (std::norm(values_[k]) + std::norm(values_[k + 1])) * (times_[k + 1] - times_[k]);
  return acc;
}

TemporalFilter make_boxcar(double tau, double t_start, double gamma_2, std::size_t samples) {
  if (!(tau > 0.0) || !(gamma_2 > 0.0) || !std::isfinite(t_start))
    throw ConfigError("boxcar filter needs tau > 0 and gamma_2 > 0");
  samples = std::max<std::size_t>(samples, 2);
  TemporalFilter f;
  f.kind_ = FilterKind::boxcar;
  f.width_ = tau;
  f.gamma_2_ = gamma_2;
  f.t_begin_ = t_start;
  f.t_end_ = t_start + tau / gamma_2;
  f.center_ = 0.5 * (f.t_begin_ + f.t_end_);
  f.amplitude_scale_ = std::sqrt(gamma_2 / tau);
  f.grid_step_ = (f.t_end_ - f.t_begin_) / static_cast<double>(samples - 1);
  for (std::size_t k = 0; k < samples; ++k) {
    double t = k + 1 == samples ? f.t_end_ : f.t_begin_ + f.grid_step_ * static_cast<double>(k);
    f.times_.push_back(t);
    f.values_.emplace_back(f.amplitude_scale_, 0.0);
  }
  return f;
}

TemporalFilter make_gaussian(double xi, double t_center, double gamma_2, std::size_t samples) {
  if (!(xi > 0.0) || !(gamma_2 > 0.0) || !std::isfinite(t_center))
    throw ConfigError("gaussian filter needs xi > 0 and gamma_2 > 0");
  samples = std::max<std::size_t>(samples, 3);
  TemporalFilter f;
  f.kind_ = FilterKind::gaussian;
  f.width_ = xi;
  f.gamma_2_ = gamma_2;
  f.center_ = t_center;
  f.t_begin_ = t_center - kGaussianSupport * xi / gamma_2;
  f.t_end_ = t_center + kGaussianSupport * xi / gamma_2;
  f.amplitude_scale_ = std::sqrt(gamma_2) / std::pow(2.0 * kPi * xi * xi, 0.25);
  f.grid_step_ = (f.t_end_ - f.t_begin_) / static_cast<double>(samples - 1);
  for (std::size_t k = 0; k < samples; ++k) {
    double t = k + 1 == samples ? f.t_end_ : f.t_begin_ + f.grid_step_ * static_cast<double>(k);
    f.times_.push_back(t);
    f.values_.push_back(f.amplitude(t));
  }
  return f;
}

TemporalFilter make_custom(std::vector<double> times, std::vector<cdouble> values) {
  if (times.size() != values.size() || times.size() < 2)
    throw ConfigError("custom filter needs at least two (t, f) samples");
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (!std::isfinite(times[k]) || !std::isfinite(values[k].real()) || !std::isfinite(values[k].imag()))
      throw ConfigError("custom filter samples must be finite");
    if (k > 0 && !(times[k] > times[k - 1]))
      throw ConfigError("custom filter times must be strictly increasing");
  }
  TemporalFilter f;
  f.kind_ = FilterKind::custom;
  f.times_ = std::move(times);
  f.values_ = std::move(values);
  f.t_begin_ = f.times_.front();
  f.t_end_ = f.times_.back();
  f.grid_step_ = (f.t_end_ - f.t_begin_) / static_cast<double>(f.times_.size() - 1);
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < f.times_.size(); ++k)
    total += interval_norm(f.values_[k], f.values_[k + 1], f.times_[k + 1] - f.times_[k]);
  if (!(total > 0.0)) throw ConfigError("custom filter has zero norm");
  double scale = 1.0 / std::sqrt(total);
  for (auto& v : f.values_) v *= scale;
  f.cumulative_.assign(f.times_.size(), 0.0);
  for (std::size_t k = 0; k + 1 < f.times_.size(); ++k)
    f.cumulative_[k + 1] =
        f.cumulative_[k] + interval_norm(f.values_[k], f.values_[k + 1], f.times_[k + 1] - f.times_[k]);
  f.center_ = 0.5 * (f.t_begin_ + f.t_end_);
  return f;
}

TemporalFilter make_spline(const std::vector<double>& node_values, double t_begin, double t_end,
                           std::size_t samples) {
  if (node_values.empty() || !(t_end > t_begin))
    throw ConfigError("spline filter needs interior nodes and a non-empty window");
  // Knots: zero at both ends, node_values in between.
  std::vector<double> y;
  y.push_back(0.0);
  y.insert(y.end(), node_values.begin(), node_values.end());
  y.push_back(0.0);
  const std::size_t n = y.size();
  const double h = (t_end - t_begin) / static_cast<double>(n - 1);
  // Natural spline second derivatives via the tridiagonal system.
  std::vector<double> m(n, 0.0), c(n, 0.0), d(n, 0.0);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    double rhs = 6.0 * (y[i + 1] - 2.0 * y[i] + y[i - 1]) / (h * h);
    double diag = 4.0;
    if (i > 1) {
      diag -= c[i - 1];
      rhs -= d[i - 1];
    }
    c[i] = 1.0 / diag;
    d[i] = rhs / diag;
  }
  for (std::size_t i = n - 2; i >= 1; --i) {
    m[i] = d[i] - (i + 2 < n ? c[i] * m[i + 1] : 0.0);
    if (i == 1) break;
  }
  samples = std::max<std::size_t>(samples, n);
  std::vector<double> times(samples);
  std::vector<cdouble> values(samples);
  for (std::size_t k = 0; k < samples; ++k) {
    double t = t_begin + (t_end - t_begin) * static_cast<double>(k) / static_cast<double>(samples - 1);
    std::size_t i = std::min(static_cast<std::size_t>((t - t_begin) / h), n - 2);
    double a = (t_begin + h * static_cast<double>(i + 1) - t) / h;
    double b = 1.0 - a;
    double v = a * y[i] + b * y[i + 1] + ((a * a * a - a) * m[i] + (b * b * b - b) * m[i + 1]) * h * h / 6.0;
    times[k] = t;
    values[k] = {v, 0.0};
  }
  return make_custom(std::move(times), std::move(values));
}

void write_filter_csv(const std::string& path, const TemporalFilter& f) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write filter file: " + path);
  os << "# filter " << to_string(f.kind()) << '\n';
  csv::write_row(os, std::vector<std::string>{"t_seconds", "re_f", "im_f"});
  for (std::size_t k = 0; k < f.times().size(); ++k)
    csv::write_row(os, std::vector<double>{f.times()[k], f.values()[k].real(), f.values()[k].imag()});
}

TemporalFilter read_filter_csv(const std::string& path) {
  auto table = csv::read_numeric(path, {"t_seconds", "re_f", "im_f"});
  std::vector<double> t;
  std::vector<cdouble> v;
  for (const auto& row : table.rows) {
    t.push_back(row[0]);
    v.emplace_back(row[1], row[2]);
  }
  return make_custom(std::move(t), std::move(v));
}

cdouble capture_coupling(const TemporalFilter& filter, double t, double norm_floor) {
  if (t < filter.t_begin() || t > filter.t_end()) return {0.0, 0.0};
  double absorbed = std::max(filter.absorbed_norm(t), norm_floor);
  return -filter.amplitude(t) / std::sqrt(absorbed);
}

cdouble emission_prefactor(const SystemParams& p) {
  return -kI * std::exp(kI * (0.5 * p.phi)) * std::sqrt(p.gamma_r);
}

CaptureResult simulate_capture(const SystemParams& p, const TemporalFilter& filter, const SimOptions& opts) {
  p.validate();
  if (!p.is_physical())
    throw ConfigError("capture simulation needs non-negative gamma_n and gamma_p");
  if (opts.fock_cutoff < 2) throw ConfigError("fock_cutoff must be at least 2");
  if (!(opts.step_factor > 0.0) || !(opts.coupling_step_factor > 0.0) || !(opts.norm_floor > 0.0))
    throw ConfigError("step factors and norm_floor must be positive");

  const std::size_t nc = opts.fock_cutoff;
  const std::size_t dim = 2 * nc;
  const double gamma_n = std::max(p.gamma_n, 0.0);
  const double gamma_p = std::max(p.gamma_p, 0.0);
  const cdouble kappa = emission_prefactor(p);

  const CMatrix sm = qubit::sigma_minus();

  // Effective non-Hermitian Hamiltonian
  //   Heff = A (x) I + x(t) sigma_- (x) b^dag - (i/2)|c(t)|^2 I (x) n,
  // applied block-wise: rows q*nc + m hold qubit level q, cavity level m.
  const CMatrix a_q = qubit::hamiltonian(p) - 0.5 * kI * (std::norm(kappa) + gamma_n) * (qubit::sigma_plus() * sm);
  Eigen::VectorXd sq(nc), nn(dim);
  for (std::size_t m = 0; m < nc; ++m) {
    sq(m) = std::sqrt(static_cast<double>(m));
    nn(m) = nn(m + nc) = static_cast<double>(m);
  }
  const auto N = static_cast<Eigen::Index>(nc);
  const auto D = static_cast<Eigen::Index>(dim);

  // (I (x) b) X, row shift with sqrt(m+1) weights inside each qubit block.
  auto lower = [&](const CMatrix& x, CMatrix& out, cdouble c) {
    for (Eigen::Index q = 0; q < 2; ++q)
      out.middleRows(q * N, N - 1).noalias() += c * (sq.tail(N - 1).asDiagonal() * x.middleRows(q * N + 1, N - 1));
  };
  // (sigma_- (x) I) X: qubit block row 1 moves to row 0.
  auto decay = [&](const CMatrix& x, CMatrix& out, cdouble c) { out.topRows(N) += c * x.bottomRows(N); };
  auto jump_left = [&](const CMatrix& x, cdouble c2) {
    CMatrix out = CMatrix::Zero(D, D);
    decay(x, out, kappa);
    lower(x, out, c2);
    return out;
  };

  auto rhs = [&](const CMatrix& rho, cdouble c2) -> CMatrix {
    // Cavity jump amplitude c2 = conj(g); cascade strength x = -i kappa conj(c2).
    const cdouble x = -kI * kappa * std::conj(c2);
    CMatrix hr(D, D);
    hr.topRows(N) = a_q(0, 0) * rho.topRows(N) + a_q(0, 1) * rho.bottomRows(N);
    hr.bottomRows(N) = a_q(1, 0) * rho.topRows(N) + a_q(1, 1) * rho.bottomRows(N);
    // x sigma_- b^dag: raise the qubit-1 rows into the qubit-0 block.
    hr.block(1, 0, N - 1, D).noalias() += x * (sq.tail(N - 1).asDiagonal() * rho.block(N, 0, N - 1, D));
    hr.noalias() += (-0.5 * kI * std::norm(c2)) * (nn.asDiagonal() * rho);
    CMatrix out = -kI * hr + kI * hr.adjoint();
    CMatrix lr = jump_left(rho, c2);
    CMatrix lrd = lr.adjoint();
    out += jump_left(lrd, c2).adjoint();
    if (gamma_n > 0.0) out.topLeftCorner(N, N) += gamma_n * rho.bottomRightCorner(N, N);
    if (gamma_p > 0.0) {
      out.topRightCorner(N, N) -= gamma_p * rho.topRightCorner(N, N);
      out.bottomLeftCorner(N, N) -= gamma_p * rho.bottomLeftCorner(N, N);
    }
    return out;
  };

  CMatrix rho_q = opts.initial_qubit ? *opts.initial_qubit : qubit::steady_state_analytic(p).rho;
  if (rho_q.rows() != 2 || rho_q.cols() != 2) throw ConfigError("initial qubit state must be 2x2");
  CMatrix vac = CMatrix::Zero(nc, nc);
  vac(0, 0) = 1.0;
  CMatrix rho = hilbert::kron(rho_q, vac);

  const double t_start = filter.t_begin();
  const double t_stop = std::max(filter.t_end(), opts.t_final.value_or(filter.t_end()));
  const double base_rate = std::max({p.gamma_1, p.gamma_2, std::abs(p.omega), std::abs(p.delta), 1e-30});
  const double sqrt_gr = std::sqrt(p.gamma_r);

  IntegratorReport report;
  auto coupling = [&](double t) {
    cdouble g = capture_coupling(filter, t, opts.norm_floor);
    report.max_coupling = std::max(report.max_coupling, std::abs(g));
    return std::conj(g);
  };

  double t = t_start;
  while (t < t_stop) {
    double end = t < filter.t_end() ? filter.t_end() : t_stop;
    cdouble c0 = coupling(t);
    double g2 = std::norm(c0);
    double coupling_rate = std::max(g2, sqrt_gr * std::sqrt(g2));
    double h = std::min(opts.step_factor / base_rate, opts.coupling_step_factor / coupling_rate);
    const bool last = t + h >= end - 1e-12 * h;
    if (last) h = end - t;
    cdouble c_mid = coupling(t + 0.5 * h);
    cdouble c1 = coupling(t + h);
    CMatrix k1 = rhs(rho, c0);
    CMatrix k2 = rhs(rho + (0.5 * h) * k1, c_mid);
    CMatrix k3 = rhs(rho + (0.5 * h) * k2, c_mid);
    CMatrix k4 = rhs(rho + h * k3, c1);
    rho += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    t = last ? end : t + h;
    ++report.steps;
    if (!rho.allFinite()) throw IntegratorError("capture integration produced non-finite values");
  }

  rho = 0.5 * (rho + rho.adjoint()).eval();
  cdouble tr = hilbert::trace(rho);
  report.trace_defect = std::abs(tr - 1.0);
  if (report.trace_defect > 1e-5) throw IntegratorError("capture integration trace defect too large");
  report.min_eigenvalue = hilbert::min_eigenvalue(rho);
  if (report.min_eigenvalue < -1e-6) throw IntegratorError("capture integration lost positivity");

  CaptureResult result;
  result.rho_joint_final = rho;
  CMatrix mode = hilbert::trace_out_first(rho, 2, nc);
  mode /= hilbert::trace(mode);
  result.rho_mode = 0.5 * (mode + mode.adjoint());
  result.capture_efficiency = std::real(hilbert::trace(hilbert::number(nc) * result.rho_mode));
  result.report = report;
  return result;
}

LowOrderMoments moment_oracle_low_order(const SystemParams& p, const TemporalFilter& filter, std::size_t nodes,
                                        const std::optional<CMatrix>& initial_qubit) {
  p.validate();
  nodes = std::max<std::size_t>(nodes, 3);
  const double t0 = filter.t_begin();
  const double h = (filter.t_end() - t0) / static_cast<double>(nodes - 1);
  const CMatrix lv = qubit::liouvillian(p);
  const CMatrix step = hilbert::expm(lv * h);
  const CMatrix sm = qubit::sigma_minus();
  const cdouble kappa = emission_prefactor(p);

  std::vector<cdouble> f(nodes);
  std::vector<double> w(nodes, h);
  w.front() = w.back() = 0.5 * h;
  for (std::size_t i = 0; i < nodes; ++i) f[i] = filter.amplitude(t0 + h * static_cast<double>(i));

  CMatrix rho = initial_qubit ? *initial_qubit : qubit::steady_state_analytic(p).rho;
  CVector state = hilbert::vec(rho);

  LowOrderMoments out;
  cdouble mean{0.0, 0.0};
  cdouble diag_sum{0.0, 0.0};
  cdouble off_sum{0.0, 0.0};
  for (std::size_t j = 0; j < nodes; ++j) {
    CMatrix rj = hilbert::unvec(state, 2);
    mean += w[j] * f[j] * rj(1, 0);
    // X = sigma_- rho(t_j) propagated forward; Tr[sigma_+ X] = X(0,1).
    CVector x = hilbert::vec(sm * rj);
    for (std::size_t i = j; i < nodes; ++i) {
      cdouble c = x(2);  // column-major: element (0,1)
      cdouble term = w[i] * w[j] * std::conj(f[i]) * f[j] * c;
      if (i == j)
        diag_sum += term;
      else
        off_sum += term;
      x = step * x;
    }
    state = step * state;
  }
  out.mean = kappa * mean;
  // Pairs with t_i < t_j are the complex conjugates of the mirrored terms.
  out.photon_number = p.gamma_r * std::real(diag_sum + off_sum + std::conj(off_sum));
  return out;
}

cdouble coherent_amplitude(const SystemParams& p, const TemporalFilter& filter) {
  cdouble a_in = p.omega * std::exp(-kI * (0.5 * p.phi)) / (2.0 * std::sqrt(p.gamma_r));
  return a_in * filter.integral();
}

}  // namespace mirrorqed
