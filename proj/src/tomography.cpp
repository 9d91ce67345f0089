#include "mirrorqed/tomography.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "mirrorqed/csv.hpp"
#include "mirrorqed/least_squares.hpp"

namespace mirrorqed {

cdouble MomentSet::at(int m, int n) const {
  auto it = entries.find({m, n});
  if (it == entries.end()) throw ConfigError("moment (" + std::to_string(m) + "," + std::to_string(n) + ") missing");
  return it->second;
}

std::optional<double> MomentSet::sigma(int m, int n) const {
  auto it = sigmas.find({m, n});
  if (it == sigmas.end()) return std::nullopt;
  return it->second;
}

void MomentSet::set(int m, int n, cdouble value, std::optional<double> err) {
  entries[{m, n}] = value;
  if (err) sigmas[{m, n}] = *err;
}

void MomentSet::validate(double tol) const {
  if (!has(0, 0) || std::abs(at(0, 0) - 1.0) > tol) throw ConfigError("moment (0,0) must equal 1");
  for (const auto& [key, value] : entries) {
    auto mirror = entries.find({key.second, key.first});
    if (mirror != entries.end() && std::abs(mirror->second - std::conj(value)) > tol)
      throw ConfigError("moments violate the Hermitian-pair symmetry");
  }
}

namespace tomography {
namespace {

double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// a^dag^m a^n on the dim-level block; exact for states supported there.
CMatrix normal_product(int m, int n, std::size_t dim) {
  CMatrix a = hilbert::destroy(dim);
  CMatrix out = hilbert::identity(dim);
  for (int k = 0; k < n; ++k) out = a * out;
  CMatrix ad = a.adjoint();
  for (int k = 0; k < m; ++k) out = ad * out;
  return out;
}

// <alpha|rho|alpha> for the coherent state |alpha>.
double husimi_kernel(const CMatrix& rho, cdouble alpha) {
  const auto d = rho.rows();
  CVector c(d);
  c(0) = std::exp(-0.5 * std::norm(alpha));
  for (Eigen::Index k = 1; k < d; ++k) c(k) = c(k - 1) * alpha / std::sqrt(static_cast<double>(k));
  return std::real(c.dot(rho * c));
}

struct MomentSums {
  // sums[m][n] = sum over shots of conj(S)^m S^n.
  std::vector<std::vector<cdouble>> sums;
  std::size_t count = 0;
};

MomentSums empty_sums(int order) {
  MomentSums s;
  s.sums.assign(order + 1, std::vector<cdouble>(order + 1, {0.0, 0.0}));
  return s;
}

void accumulate(MomentSums& acc, cdouble x, int order) {
  std::vector<cdouble> up(order + 1), cp(order + 1);
  up[0] = cp[0] = 1.0;
  for (int k = 1; k <= order; ++k) {
    up[k] = up[k - 1] * x;
    cp[k] = cp[k - 1] * std::conj(x);
  }
  for (int m = 0; m <= order; ++m)
    for (int n = 0; m + n <= order; ++n) acc.sums[m][n] += cp[m] * up[n];
  ++acc.count;
}

void add_into(MomentSums& acc, const MomentSums& other, int order) {
  for (int m = 0; m <= order; ++m)
    for (int n = 0; m + n <= order; ++n) acc.sums[m][n] += other.sums[m][n];
  acc.count += other.count;
}

std::vector<MomentSums> block_sums(const std::vector<cdouble>& records, int blocks, int order) {
  std::vector<MomentSums> out(blocks, empty_sums(order));
  const std::size_t n = records.size();
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t b = i * static_cast<std::size_t>(blocks) / n;
    accumulate(out[b], records[i], order);
  }
  return out;
}

using Table = std::vector<std::vector<cdouble>>;

Table means(const MomentSums& s, int order) {
  Table t(order + 1, std::vector<cdouble>(order + 1, {0.0, 0.0}));
  for (int m = 0; m <= order; ++m)
    for (int n = 0; m + n <= order; ++n) t[m][n] = s.sums[m][n] / static_cast<double>(s.count);
  return t;
}

// <S^dag^m S^n> = sum_{j,k} C(m,j) C(n,k) <a^dag^j a^k> N_{m-j,n-k}, solved upward in j + k.
Table unscramble(const Table& signal, const Table& noise, int order) {
  Table a(order + 1, std::vector<cdouble>(order + 1, {0.0, 0.0}));
  for (int total = 0; total <= order; ++total) {
    for (int m = 0; m <= total; ++m) {
      int n = total - m;
      cdouble v = signal[m][n];
      for (int j = 0; j <= m; ++j)
        for (int k = 0; k <= n; ++k) {
          if (j == m && k == n) continue;
          v -= binomial(m, j) * binomial(n, k) * a[j][k] * noise[m - j][n - k];
        }
      a[m][n] = v;
    }
  }
  return a;
}

struct Objective {
  std::vector<CMatrix> ops;
  std::vector<cdouble> targets;
  std::vector<double> weights;
  std::size_t dim = 0;

  double cost(const CMatrix& t, CMatrix* grad) const {
    CMatrix x = t.adjoint() * t;
    const double trx = std::real(x.trace());
    CMatrix rho = x / trx;
    double c = 0.0;
    CMatrix k = CMatrix::Zero(dim, dim);
    for (std::size_t i = 0; i < ops.size(); ++i) {
      cdouble r = (rho.cwiseProduct(ops[i].transpose())).sum() - targets[i];
      c += weights[i] * std::norm(r);
      if (grad) k += (weights[i] * std::conj(r)) * ops[i];
    }
    if (grad) {
      CMatrix kh = 0.5 * (k + k.adjoint());
      cdouble mean = (rho.cwiseProduct(kh.transpose())).sum();
      CMatrix q = kh - mean * CMatrix::Identity(dim, dim);
      CMatrix mm = q * t.adjoint();
      // d cost / d Re T_ij = 4 Re M_ji / tr X, d cost / d Im T_ij = -4 Im M_ji / tr X.
      CMatrix g = CMatrix::Zero(dim, dim);
      for (std::size_t i = 0; i < dim; ++i)
        for (std::size_t j = 0; j <= i; ++j) g(i, j) = (4.0 / trx) * std::conj(mm(j, i));
      *grad = g;
    }
    return c;
  }
};

double real_dot(const CMatrix& a, const CMatrix& b) { return std::real((a.conjugate().cwiseProduct(b)).sum()); }

}  // namespace

MomentSet moments_from_state(const CMatrix& rho, int order_cap) {
  const auto dim = static_cast<std::size_t>(rho.rows());
  MomentSet out;
  out.order_cap = order_cap;
  CMatrix a = hilbert::destroy(dim);
  std::vector<CMatrix> lower(order_cap + 1);
  lower[0] = rho;
  // Tr[rho a^dag^m a^n] = Tr[a^n rho a^dag^m].
  for (int n = 1; n <= order_cap; ++n) lower[n] = a * lower[n - 1];
  for (int n = 0; n <= order_cap; ++n) {
    CMatrix x = lower[n];
    for (int m = 0; m + n <= order_cap; ++m) {
      out.set(m, n, x.trace());
      x = x * a.adjoint();
    }
  }
  out.entries[{0, 0}] = 1.0;
  return out;
}

MomentSet shift_moments(const MomentSet& moments, cdouble beta) {
  auto ipow = [](cdouble z, int e) {
    cdouble r{1.0, 0.0};
    for (int i = 0; i < e; ++i) r *= z;
    return r;
  };
  MomentSet out;
  out.order_cap = moments.order_cap;
  for (int m = 0; m <= moments.order_cap; ++m) {
    for (int n = 0; m + n <= moments.order_cap; ++n) {
      if (!moments.has(m, n)) continue;
      cdouble v{0.0, 0.0};
      double var = 0.0;
      bool have_sigma = true;
      for (int j = 0; j <= m; ++j) {
        for (int k = 0; k <= n; ++k) {
          if (!moments.has(j, k)) throw ConfigError("shift_moments: lower-order moment missing");
          const cdouble c = binomial(m, j) * binomial(n, k) * ipow(-std::conj(beta), m - j) * ipow(-beta, n - k);
          v += c * moments.at(j, k);
          if (j + k == 0) continue;
          if (const auto s = moments.sigma(j, k))
            var += std::norm(c) * *s * *s;
          else
            have_sigma = false;
        }
      }
      if (have_sigma && (m + n) > 0)
        out.set(m, n, v, std::sqrt(var));
      else
        out.set(m, n, v);
    }
  }
  out.entries[{0, 0}] = 1.0;
  return out;
}

RecordBatch synthesize_records(const CMatrix& rho, double noise_photons, std::size_t shots, std::uint64_t seed) {
  if (!(noise_photons >= 0.0) || shots == 0) throw ConfigError("synthesize_records needs noise_photons >= 0 and shots > 0");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  const double mean_n = std::max(0.0, std::real((hilbert::number(static_cast<std::size_t>(rho.rows())) * rho).trace()));
  const double s = std::max(2.0, 1.5 * (mean_n + 1.0));
  // Bound of Q/g for proposal g = exp(-|alpha|^2/s)/(pi s) from a polar scan.
  double bound = 0.0;
  const double radius = 8.0 * std::sqrt(s);
  for (int i = 0; i <= 400; ++i) {
    double r = radius * i / 400.0;
    for (int j = 0; j < 96; ++j) {
      cdouble alpha = std::polar(r, 2.0 * kPi * j / 96.0);
      bound = std::max(bound, s * husimi_kernel(rho, alpha) * std::exp(r * r / s));
    }
  }
  bound *= 1.25;

  const double proposal_sd = std::sqrt(0.5 * s);
  const double noise_sd = std::sqrt(0.5 * noise_photons);
  auto noise = [&]() { return cdouble(noise_sd * normal(rng), noise_sd * normal(rng)); };

  RecordBatch out;
  out.signal.reserve(shots);
  out.background.reserve(shots);
  while (out.signal.size() < shots) {
    cdouble alpha(proposal_sd * normal(rng), proposal_sd * normal(rng));
    double ratio = s * husimi_kernel(rho, alpha) * std::exp(std::norm(alpha) / s);
    if (ratio > bound) throw NumericalError("Husimi rejection bound violated");
    if (uniform(rng) * bound <= ratio) out.signal.push_back(alpha + noise());
  }
  std::normal_distribution<double> vac(0.0, std::sqrt(0.5));
  for (std::size_t k = 0; k < shots; ++k) out.background.push_back(cdouble(vac(rng), vac(rng)) + noise());
  return out;
}

MomentSet moments_from_records(const RecordBatch& batch, const MomentEstimateOptions& opts) {
  const int order = opts.order_cap;
  if (order < 1 || opts.resamples < 2) throw ConfigError("moment estimation needs order_cap >= 1 and resamples >= 2");
  const int blocks = std::max(2, opts.blocks);
  if (batch.signal.size() < static_cast<std::size_t>(blocks) || batch.background.size() < static_cast<std::size_t>(blocks))
    throw IllConditionedError("too few records for the requested bootstrap blocks");

  std::vector<MomentSums> sig_blocks = block_sums(batch.signal, blocks, order);
  std::vector<MomentSums> bg_blocks = block_sums(batch.background, blocks, order);
  MomentSums sig_all = empty_sums(order), bg_all = empty_sums(order);
  for (int b = 0; b < blocks; ++b) {
    add_into(sig_all, sig_blocks[b], order);
    add_into(bg_all, bg_blocks[b], order);
  }
  const Table noise = means(bg_all, order);
  const Table point = unscramble(means(sig_all, order), noise, order);

  // Pre-drawn block choices per resample keep the result schedule independent.
  std::vector<std::vector<int>> picks(opts.resamples, std::vector<int>(2 * blocks));
  {
    std::mt19937_64 rng(opts.seed);
    std::uniform_int_distribution<int> pick(0, blocks - 1);
    for (auto& row : picks)
      for (auto& v : row) v = pick(rng);
  }
  std::vector<Table> boot(opts.resamples);
  std::vector<Table> boot_noise(opts.resamples);
#pragma omp parallel for schedule(static)
  for (int r = 0; r < opts.resamples; ++r) {
    MomentSums s = empty_sums(order), g = empty_sums(order);
    for (int b = 0; b < blocks; ++b) {
      add_into(s, sig_blocks[picks[r][b]], order);
      add_into(g, bg_blocks[picks[r][blocks + b]], order);
    }
    boot_noise[r] = means(g, order);
    boot[r] = unscramble(means(s, order), boot_noise[r], order);
  }

  auto spread = [&](const std::vector<Table>& tables, int m, int n) {
    cdouble mean{0.0, 0.0};
    for (const auto& t : tables) mean += t[m][n];
    mean /= static_cast<double>(tables.size());
    double var = 0.0;
    for (const auto& t : tables) var += std::norm(t[m][n] - mean);
    return std::sqrt(var / static_cast<double>(tables.size() - 1));
  };

  for (int k = 1; 2 * k <= order; ++k) {
    double nk = std::real(noise[k][k]);
    if (!(nk > 0.0) || spread(boot_noise, k, k) > opts.max_noise_relative_error * nk)
      throw IllConditionedError("background moment of order " + std::to_string(2 * k) + " is not resolved");
  }

  MomentSet out;
  out.order_cap = order;
  for (int m = 0; m <= order; ++m)
    for (int n = 0; m + n <= order; ++n) out.set(m, n, point[m][n], spread(boot, m, n));
  out.set(0, 0, 1.0, 0.0);
  return out;
}

namespace {

Objective build_objective(const MomentSet& moments, std::size_t dim, const MleOptions& opts) {
  if (dim < 2) throw ConfigError("reconstruction dimension must be at least 2");
  Objective obj;
  obj.dim = dim;
  for (const auto& [key, value] : moments.entries) {
    if (key.first == 0 && key.second == 0) continue;
    obj.ops.push_back(normal_product(key.first, key.second, dim));
    obj.targets.push_back(value);
    double w = 1.0;
    if (opts.use_sigmas) {
      if (auto s = moments.sigma(key.first, key.second)) w = 1.0 / std::pow(std::max(*s, opts.sigma_floor), 2);
    }
    obj.weights.push_back(w);
  }
  if (obj.ops.empty()) throw ConfigError("no moments to fit");
  return obj;
}

CMatrix unpack_lower(const Eigen::VectorXd& x, std::size_t dim) {
  CMatrix t = CMatrix::Zero(dim, dim);
  Eigen::Index k = 0;
  for (std::size_t i = 0; i < dim; ++i)
    for (std::size_t j = 0; j <= i; ++j, k += 2) t(i, j) = cdouble(x(k), x(k + 1));
  return t;
}

Eigen::VectorXd pack_lower(const CMatrix& t) {
  const auto dim = static_cast<std::size_t>(t.rows());
  Eigen::VectorXd x(dim * (dim + 1));
  Eigen::Index k = 0;
  for (std::size_t i = 0; i < dim; ++i)
    for (std::size_t j = 0; j <= i; ++j, k += 2) {
      x(k) = t(i, j).real();
      x(k + 1) = t(i, j).imag();
    }
  return x;
}

// Starting point: unconstrained linear least squares for rho (minimum-norm,
// Hermitian, unit trace), clipped to the PSD cone and mixed with a little
// of the maximally mixed state so that T starts at full rank.
CMatrix initial_factor(const Objective& obj) {
  const std::size_t d = obj.dim;
  const std::size_t nres = obj.ops.size();
  // Unknowns: Hermitian rho in a real basis (d^2 parameters).
  std::vector<CMatrix> basis;
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      CMatrix e = CMatrix::Zero(d, d);
      if (i == j) {
        e(i, i) = 1.0;
        basis.push_back(e);
      } else {
        e(i, j) = e(j, i) = 1.0;
        basis.push_back(e);
        e(i, j) = kI;
        e(j, i) = -kI;
        basis.push_back(e);
      }
    }
  const auto nb = static_cast<Eigen::Index>(basis.size());
  Eigen::MatrixXd a(2 * nres + 1, nb);
  Eigen::VectorXd y(2 * nres + 1);
  for (std::size_t r = 0; r < nres; ++r) {
    const double sw = std::sqrt(obj.weights[r]);
    for (Eigen::Index k = 0; k < nb; ++k) {
      cdouble v = (basis[k].cwiseProduct(obj.ops[r].transpose())).sum();
      a(2 * r, k) = sw * v.real();
      a(2 * r + 1, k) = sw * v.imag();
    }
    y(2 * r) = sw * obj.targets[r].real();
    y(2 * r + 1) = sw * obj.targets[r].imag();
  }
  // Trace row, weighted like the largest moment weight.
  double wmax = *std::max_element(obj.weights.begin(), obj.weights.end());
  for (Eigen::Index k = 0; k < nb; ++k) a(2 * nres, k) = std::sqrt(wmax) * std::real(basis[k].trace());
  y(2 * nres) = std::sqrt(wmax);
  Eigen::VectorXd c = a.completeOrthogonalDecomposition().solve(y);
  CMatrix rho = CMatrix::Zero(d, d);
  for (Eigen::Index k = 0; k < nb; ++k) rho += c(k) * basis[k];
  Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (rho + rho.adjoint()));
  Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
  if (!(ev.sum() > 0.0)) return CMatrix::Identity(d, d) / std::sqrt(double(d));
  ev /= ev.sum();
  CMatrix start = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
  start = 0.95 * start + 0.05 * CMatrix::Identity(d, d) / double(d);
  // T lower triangular with T^dag T = start: reverse-order Cholesky.
  CMatrix flip = CMatrix::Zero(d, d);
  for (std::size_t i = 0; i < d; ++i) flip(i, d - 1 - i) = 1.0;
  Eigen::LLT<CMatrix> llt(flip * start * flip);
  CMatrix upper_l = llt.matrixL();
  // start = flip L L^dag flip = (flip L flip)(flip L flip)^dag; U = flip L flip is
  // upper triangular, so T = U^dag is lower triangular with T^dag T = start.
  CMatrix u = flip * upper_l * flip;
  return u.adjoint();
}

}  // namespace

double mle_cost(const MomentSet& moments, const CMatrix& t, CMatrix* gradient, const MleOptions& opts) {
  Objective obj = build_objective(moments, static_cast<std::size_t>(t.rows()), opts);
  return obj.cost(t, gradient);
}

ReconstructionResult mle_reconstruct(const MomentSet& moments, std::size_t dim, const MleOptions& opts) {
  const Objective obj = build_objective(moments, dim, opts);
  const std::size_t nres = obj.ops.size();
  std::vector<double> sqrt_w(nres);
  for (std::size_t i = 0; i < nres; ++i) sqrt_w[i] = std::sqrt(obj.weights[i]);
  // Moments with m + n <= order_cap leave some directions touching the top
  // Fock level undetermined; a weak penalty on its population selects the
  // member of the optimal set with the least weight at the cutoff.
  const double w_max = *std::max_element(obj.weights.begin(), obj.weights.end());
  const double sqrt_penalty = std::sqrt(opts.top_level_penalty * w_max);

  auto residuals = [&](const Eigen::VectorXd& x) {
    CMatrix t = unpack_lower(x, dim);
    CMatrix xm = t.adjoint() * t;
    CMatrix rho = xm / std::real(xm.trace());
    Eigen::VectorXd r(2 * nres + 1);
    r(2 * nres) = sqrt_penalty * std::real(rho(dim - 1, dim - 1));
    for (std::size_t i = 0; i < nres; ++i) {
      cdouble d = (rho.cwiseProduct(obj.ops[i].transpose())).sum() - obj.targets[i];
      r(2 * i) = sqrt_w[i] * d.real();
      r(2 * i + 1) = sqrt_w[i] * d.imag();
    }
    return r;
  };

  LeastSquaresOptions lso;
  lso.max_iterations = opts.max_iterations;
  lso.relative_cost_tolerance = opts.relative_tolerance;
  lso.jacobian_step = 1e-7;
  // Plain Levenberg damping: the gauge directions of T make diag(J^T J)
  // a poor scale.
  lso.marquardt_scaling = false;
  double scale = 0.0;
  for (std::size_t i = 0; i < nres; ++i) scale += obj.weights[i] * std::norm(obj.targets[i]);
  lso.absolute_cost_tolerance = 1e-16 * std::max(scale, 1.0);
  LeastSquaresResult fit = levenberg_marquardt(residuals, pack_lower(initial_factor(obj)), lso);

  ReconstructionResult res;
  CMatrix t = unpack_lower(fit.x, dim);
  CMatrix g;
  res.cost = obj.cost(t, &g);
  res.gradient_norm = std::sqrt(real_dot(g, g));
  CMatrix x = t.adjoint() * t;
  res.rho = x / std::real(x.trace());
  res.rho = 0.5 * (res.rho + res.rho.adjoint()).eval();
  res.iterations = fit.iterations;
  // The iteration cap ends the search; it is only an error away from a
  // stationary point.
  if (!fit.converged && !(res.gradient_norm <= 1e-6 * std::max(1.0, res.cost)))
    throw MleConvergenceError("MLE reached the iteration cap away from a stationary point", res);
  return res;
}

double fidelity(const CMatrix& a, const CMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ConfigError("fidelity needs equal dimensions");
  Eigen::SelfAdjointEigenSolver<CMatrix> ea(0.5 * (a + a.adjoint()));
  Eigen::VectorXd sv = ea.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  CMatrix sa = ea.eigenvectors() * sv.asDiagonal() * ea.eigenvectors().adjoint();
  CMatrix m = sa * b * sa;
  Eigen::SelfAdjointEigenSolver<CMatrix> em(0.5 * (m + m.adjoint()), Eigen::EigenvaluesOnly);
  return em.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
}

StateSummary state_summary(const CMatrix& rho) {
  StateSummary s;
  for (Eigen::Index k = 0; k < rho.rows(); ++k) s.populations.push_back(std::real(rho(k, k)));
  s.purity = std::real((rho * rho).trace());
  for (Eigen::Index k = 0; k + 1 < rho.rows(); ++k) s.coherences.push_back(rho(k, k + 1));
  return s;
}

DisplacedState displace_state(const CMatrix& rho, cdouble beta, std::size_t padding) {
  const auto dim = static_cast<std::size_t>(rho.rows());
  FockSpace space{dim, dim + padding};
  space.validate();
  CMatrix a = hilbert::destroy(space.working_dim);
  CMatrix d = hilbert::expm(beta * a.adjoint() - std::conj(beta) * a);
  CMatrix big = d * hilbert::pad(rho, space.working_dim) * d.adjoint();
  CMatrix out = hilbert::crop(big, dim);
  const double kept = std::real(out.trace()) / std::real(rho.trace());
  DisplacedState res;
  res.leakage = 1.0 - kept;
  if (res.leakage > 1e-4)
    throw TruncationError("displacement leaks " + std::to_string(res.leakage) + " of the trace out of the block");
  res.rho = out / std::real(out.trace());
  return res;
}

void write_moments_csv(const std::string& path, const MomentSet& moments) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write moments file: " + path);
  csv::write_row(os, std::vector<std::string>{"m", "n", "re", "im", "sigma"});
  for (const auto& [key, value] : moments.entries) {
    double sig = moments.sigma(key.first, key.second).value_or(std::nan(""));
    csv::write_row(os, std::vector<double>{double(key.first), double(key.second), value.real(), value.imag(), sig});
  }
}

MomentSet read_moments_csv(const std::string& path) {
  auto table = csv::read_numeric(path, {"m", "n", "re", "im", "sigma"});
  MomentSet out;
  out.order_cap = 0;
  for (const auto& row : table.rows) {
    int m = static_cast<int>(row[0]), n = static_cast<int>(row[1]);
    if (m < 0 || n < 0 || m != row[0] || n != row[1]) throw ConfigError("moment indices must be non-negative integers");
    std::optional<double> sig;
    if (std::isfinite(row[4])) sig = row[4];
    out.set(m, n, {row[2], row[3]}, sig);
    out.order_cap = std::max(out.order_cap, m + n);
  }
  return out;
}

void write_records_csv(const std::string& path, const RecordBatch& batch) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write records file: " + path);
  csv::write_row(os, std::vector<std::string>{"shot_index", "re_S", "im_S", "is_background"});
  for (std::size_t k = 0; k < batch.signal.size(); ++k)
    csv::write_row(os, std::vector<double>{double(k), batch.signal[k].real(), batch.signal[k].imag(), 0.0});
  for (std::size_t k = 0; k < batch.background.size(); ++k)
    csv::write_row(os, std::vector<double>{double(k), batch.background[k].real(), batch.background[k].imag(), 1.0});
}

RecordBatch read_records_csv(const std::string& path) {
  auto table = csv::read_numeric(path, {"shot_index", "re_S", "im_S", "is_background"});
  RecordBatch out;
  for (const auto& row : table.rows) {
    cdouble v{row[1], row[2]};
    if (row[3] == 0.0)
      out.signal.push_back(v);
    else if (row[3] == 1.0)
      out.background.push_back(v);
    else
      throw ConfigError("is_background must be 0 or 1");
  }
  return out;
}

}  // namespace tomography
}  // namespace mirrorqed
