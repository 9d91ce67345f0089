#pragma once

#include <complex>
#include <cstddef>

#include <Eigen/Dense>

namespace mirrorqed {

using cdouble = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr cdouble kI{0.0, 1.0};

/// Truncated Fock space. `dim` is the retained basis size (cutoff + 1);
/// `working_dim` is the padded size used while building operators whose
/// truncation error leaks into the retained block (displacements).
struct FockSpace {
  std::size_t dim = 2;
  std::size_t working_dim = 22;

  static FockSpace with_padding(std::size_t dim, std::size_t padding = 20);
  void validate() const;
};

namespace hilbert {

CMatrix identity(std::size_t n);

/// Annihilation operator of size working_dim: entries sqrt(k) at (k-1, k).
CMatrix destroy(const FockSpace& space);
CMatrix destroy(std::size_t n);
CMatrix create(std::size_t n);
CMatrix number(std::size_t n);

/// Diagonal (-1)^k, size dim.
CMatrix parity_operator(const FockSpace& space);
CMatrix parity_operator(std::size_t n);

struct Displacement {
  CMatrix matrix;           // dim x dim block of exp(alpha a^dag - alpha* a)
  double truncation_defect;  // max deviation of the block from the exact matrix elements
};

/// exp(alpha a^dag - alpha* a), built in working_dim then cropped to dim.
/// Throws TruncationError when the retained block is not unitary to 1e-6.
Displacement displacement_operator(cdouble alpha, const FockSpace& space);

/// Exact dim x dim block of D(alpha) from the closed-form matrix elements
/// <m|D|n> = sqrt(n!/m!) alpha^(m-n) e^{-|alpha|^2/2} L_n^(m-n)(|alpha|^2).
/// Valid for any |alpha|, no padding involved.
CMatrix displacement_block(cdouble alpha, std::size_t dim);

CMatrix kron(const CMatrix& a, const CMatrix& b);

/// Scaling-and-squaring with a degree-18 Taylor core.
CMatrix expm(const CMatrix& a);

CMatrix pauli_x();
CMatrix pauli_y();
CMatrix pauli_z();

CMatrix dagger(const CMatrix& a);
cdouble trace(const CMatrix& a);
CMatrix commutator(const CMatrix& a, const CMatrix& b);

/// Partial traces on a (qubit (x) mode) product space with qubit as the
/// first (slow) factor.
CMatrix trace_out_first(const CMatrix& rho, std::size_t first_dim, std::size_t second_dim);
CMatrix trace_out_second(const CMatrix& rho, std::size_t first_dim, std::size_t second_dim);

/// Column-stacking vectorisation helpers: vec(A X B) = (B^T (x) A) vec(X).
CVector vec(const CMatrix& a);
CMatrix unvec(const CVector& v, std::size_t rows);

double max_abs(const CMatrix& a);
bool is_hermitian(const CMatrix& a, double tol);
double min_eigenvalue(const CMatrix& hermitian);

/// Embed `a` into the top-left block of an n x n zero matrix (n >= a.rows()).
CMatrix pad(const CMatrix& a, std::size_t n);
CMatrix crop(const CMatrix& a, std::size_t n);

}  // namespace hilbert
}  // namespace mirrorqed
