#include "mirrorqed/hilbert.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "mirrorqed/errors.hpp"

namespace mirrorqed {

FockSpace FockSpace::with_padding(std::size_t dim, std::size_t padding) {
  FockSpace s{dim, dim + padding};
  s.validate();
  return s;
}

void FockSpace::validate() const {
  if (dim < 2 || working_dim < dim) {
    throw ConfigError("FockSpace requires working_dim >= dim >= 2 (got dim=" + std::to_string(dim) +
                      ", working_dim=" + std::to_string(working_dim) + ")");
  }
}

namespace hilbert {

CMatrix identity(std::size_t n) { return CMatrix::Identity(n, n); }

CMatrix destroy(std::size_t n) {
  CMatrix a = CMatrix::Zero(n, n);
  for (std::size_t k = 1; k < n; ++k) a(k - 1, k) = std::sqrt(static_cast<double>(k));
  return a;
}

CMatrix destroy(const FockSpace& space) {
  space.validate();
  return destroy(space.working_dim);
}

CMatrix create(std::size_t n) { return destroy(n).adjoint(); }

CMatrix number(std::size_t n) {
  CMatrix m = CMatrix::Zero(n, n);
  for (std::size_t k = 0; k < n; ++k) m(k, k) = static_cast<double>(k);
  return m;
}

CMatrix parity_operator(std::size_t n) {
  CMatrix p = CMatrix::Zero(n, n);
  for (std::size_t k = 0; k < n; ++k) p(k, k) = (k % 2 == 0) ? 1.0 : -1.0;
  return p;
}

CMatrix parity_operator(const FockSpace& space) {
  space.validate();
  return parity_operator(space.dim);
}

Displacement displacement_operator(cdouble alpha, const FockSpace& space) {
  space.validate();
  if (!std::isfinite(alpha.real()) || !std::isfinite(alpha.imag())) {
    throw TruncationError("displacement amplitude is not finite");
  }
  const CMatrix a = destroy(space.working_dim);
  const CMatrix generator = alpha * a.adjoint() - std::conj(alpha) * a;
  const CMatrix full = expm(generator);
  Displacement out{crop(full, space.dim), 0.0};
  // The cropped block of a unitary is not unitary, so leakage through the
  // padding edge is measured against the exact matrix elements instead.
  out.truncation_defect = max_abs(out.matrix - displacement_block(alpha, space.dim));
  if (out.truncation_defect > 1e-6) {
    throw TruncationError("displacement |alpha|=" + std::to_string(std::abs(alpha)) +
                          " leaks out of the retained block (defect " +
                          std::to_string(out.truncation_defect) + "); raise working_dim");
  }
  return out;
}

CMatrix displacement_block(cdouble alpha, std::size_t dim) {
  CMatrix d = CMatrix::Zero(dim, dim);
  const double x = std::norm(alpha);
  const double r = std::abs(alpha);
  if (r == 0.0) return identity(dim);
  const double log_r = std::log(r);
  const cdouble phase = alpha / r;
  const cdouble minus_conj_phase = -std::conj(phase);

  // laguerre[k][n] = L_n^{(k)}(x) for n + k < dim.
  std::vector<std::vector<double>> laguerre(dim, std::vector<double>(dim, 0.0));
  for (std::size_t k = 0; k < dim; ++k) {
    auto& l = laguerre[k];
    const double kk = static_cast<double>(k);
    l[0] = 1.0;
    if (dim > 1) l[1] = 1.0 + kk - x;
    for (std::size_t n = 1; n + 1 < dim; ++n) {
      const double nn = static_cast<double>(n);
      l[n + 1] = ((2.0 * nn + 1.0 + kk - x) * l[n] - (nn + kk) * l[n - 1]) / (nn + 1.0);
    }
  }

  for (std::size_t m = 0; m < dim; ++m) {
    for (std::size_t n = 0; n < dim; ++n) {
      const std::size_t lo = std::min(m, n);
      const std::size_t hi = std::max(m, n);
      const std::size_t k = hi - lo;
      const double log_mag = 0.5 * (std::lgamma(lo + 1.0) - std::lgamma(hi + 1.0)) +
                             static_cast<double>(k) * log_r - 0.5 * x;
      const double mag = std::exp(log_mag) * laguerre[k][lo];
      const cdouble ph = (m >= n) ? std::pow(phase, static_cast<int>(k))
                                  : std::pow(minus_conj_phase, static_cast<int>(k));
      d(m, n) = mag * ph;
    }
  }
  return d;
}

CMatrix kron(const CMatrix& a, const CMatrix& b) {
  CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

CMatrix expm(const CMatrix& a) {
  if (a.rows() != a.cols()) throw ConvergenceError("expm requires a square matrix");
  const Eigen::Index n = a.rows();
  const double norm1 = a.cwiseAbs().colwise().sum().maxCoeff();
  if (!std::isfinite(norm1)) throw ConvergenceError("expm input is not finite");
  int squarings = 0;
  if (norm1 > 0.5) squarings = static_cast<int>(std::ceil(std::log2(norm1 / 0.5)));
  if (squarings > 64) throw ConvergenceError("expm norm too large after maximum squarings");
  const CMatrix scaled = a / std::ldexp(1.0, squarings);

  // ||scaled||_1 <= 0.5, so the degree-18 Taylor tail is below 0.5^19/19!.
  CMatrix result = CMatrix::Identity(n, n);
  CMatrix term = CMatrix::Identity(n, n);
  for (int k = 1; k <= 18; ++k) {
    term = term * scaled / static_cast<double>(k);
    result += term;
  }
  for (int s = 0; s < squarings; ++s) result = result * result;
  return result;
}

CMatrix pauli_x() {
  CMatrix m(2, 2);
  m << 0.0, 1.0, 1.0, 0.0;
  return m;
}

CMatrix pauli_y() {
  CMatrix m(2, 2);
  m << 0.0, -kI, kI, 0.0;
  return m;
}

CMatrix pauli_z() {
  CMatrix m(2, 2);
  m << 1.0, 0.0, 0.0, -1.0;
  return m;
}

CMatrix dagger(const CMatrix& a) { return a.adjoint(); }

cdouble trace(const CMatrix& a) { return a.trace(); }

CMatrix commutator(const CMatrix& a, const CMatrix& b) { return a * b - b * a; }

CMatrix trace_out_first(const CMatrix& rho, std::size_t first_dim, std::size_t second_dim) {
  const auto d2 = static_cast<Eigen::Index>(second_dim);
  CMatrix out = CMatrix::Zero(d2, d2);
  for (std::size_t q = 0; q < first_dim; ++q) {
    const auto off = static_cast<Eigen::Index>(q * second_dim);
    out += rho.block(off, off, d2, d2);
  }
  return out;
}

CMatrix trace_out_second(const CMatrix& rho, std::size_t first_dim, std::size_t second_dim) {
  const auto d1 = static_cast<Eigen::Index>(first_dim);
  CMatrix out = CMatrix::Zero(d1, d1);
  for (Eigen::Index i = 0; i < d1; ++i) {
    for (Eigen::Index j = 0; j < d1; ++j) {
      const auto bi = i * static_cast<Eigen::Index>(second_dim);
      const auto bj = j * static_cast<Eigen::Index>(second_dim);
      out(i, j) = rho.block(bi, bj, second_dim, second_dim).trace();
    }
  }
  return out;
}

CVector vec(const CMatrix& a) {
  return Eigen::Map<const CVector>(a.data(), a.size());
}

CMatrix unvec(const CVector& v, std::size_t rows) {
  const auto r = static_cast<Eigen::Index>(rows);
  return Eigen::Map<const CMatrix>(v.data(), r, v.size() / r);
}

double max_abs(const CMatrix& a) { return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff(); }

bool is_hermitian(const CMatrix& a, double tol) {
  return a.rows() == a.cols() && max_abs(a - a.adjoint()) <= tol;
}

double min_eigenvalue(const CMatrix& hermitian) {
  const CMatrix h = 0.5 * (hermitian + hermitian.adjoint());
  Eigen::SelfAdjointEigenSolver<CMatrix> es(h, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

CMatrix pad(const CMatrix& a, std::size_t n) {
  const auto nn = static_cast<Eigen::Index>(n);
  CMatrix out = CMatrix::Zero(nn, nn);
  const Eigen::Index r = std::min(a.rows(), nn);
  const Eigen::Index c = std::min(a.cols(), nn);
  out.topLeftCorner(r, c) = a.topLeftCorner(r, c);
  return out;
}

CMatrix crop(const CMatrix& a, std::size_t n) {
  const auto nn = static_cast<Eigen::Index>(n);
  return a.topLeftCorner(std::min(a.rows(), nn), std::min(a.cols(), nn));
}

}  // namespace hilbert
}  // namespace mirrorqed
