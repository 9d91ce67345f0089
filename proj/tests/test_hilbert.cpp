#include <gtest/gtest.h>

#include <cmath>

#include "mirrorqed/errors.hpp"
#include "mirrorqed/hilbert.hpp"

using namespace mirrorqed;

namespace {

double factorial(int n) { return std::tgamma(n + 1.0); }

}  // namespace

TEST(Hilbert, LadderCommutatorIsIdentityBelowCutoff) {
  const std::size_t n = 8;
  CMatrix a = hilbert::destroy(n);
  CMatrix c = hilbert::commutator(a, hilbert::create(n));
  for (std::size_t i = 0; i + 1 < n; ++i) EXPECT_NEAR(std::abs(c(i, i) - 1.0), 0.0, 1e-14);
  EXPECT_NEAR(c(n - 1, n - 1).real(), 1.0 - static_cast<double>(n), 1e-12);
  EXPECT_NEAR(hilbert::max_abs(hilbert::number(n) - hilbert::create(n) * a), 0.0, 1e-14);
}

TEST(Hilbert, ParityAlternates) {
  CMatrix p = hilbert::parity_operator(6);
  for (int k = 0; k < 6; ++k) EXPECT_DOUBLE_EQ(p(k, k).real(), k % 2 == 0 ? 1.0 : -1.0);
}

TEST(Hilbert, FockSpaceValidation) {
  FockSpace ok = FockSpace::with_padding(5);
  EXPECT_EQ(ok.working_dim, 25u);
  EXPECT_NO_THROW(ok.validate());
  FockSpace bad{5, 4};
  EXPECT_THROW(bad.validate(), ConfigError);
  FockSpace tiny{1, 4};
  EXPECT_THROW(tiny.validate(), ConfigError);
}

TEST(Hilbert, ExpmMatchesRotation) {
  const double theta = 0.83;
  CMatrix u = hilbert::expm(-kI * theta * hilbert::pauli_x());
  CMatrix expect = std::cos(theta) * hilbert::identity(2) - kI * std::sin(theta) * hilbert::pauli_x();
  EXPECT_LT(hilbert::max_abs(u - expect), 1e-14);
}

TEST(Hilbert, ExpmOfNilpotentIsFinitePolynomial) {
  CMatrix a = hilbert::destroy(4) * 3.0;
  CMatrix e = hilbert::expm(a);
  // exp(3a) on |3> gives sum_k 3^k sqrt(3!/(3-k)!)/k! |3-k>.
  for (int k = 0; k <= 3; ++k) {
    double expect = std::pow(3.0, k) * std::sqrt(factorial(3) / factorial(3 - k)) / factorial(k);
    EXPECT_NEAR(e(3 - k, 3).real(), expect, 1e-12);
  }
}

TEST(Hilbert, DisplacementOfVacuumIsCoherentState) {
  const cdouble alpha{1.7, -0.9};
  CMatrix d = hilbert::displacement_block(alpha, 40);
  for (int n = 0; n < 40; ++n) {
    cdouble expect = std::exp(-0.5 * std::norm(alpha)) * std::pow(alpha, n) / std::sqrt(factorial(n));
    EXPECT_LT(std::abs(d(n, 0) - expect), 1e-13) << n;
  }
}

TEST(Hilbert, DisplacementBlockMatchesPaddedExponential) {
  const cdouble alpha{0.6, 0.45};
  FockSpace space = FockSpace::with_padding(8, 30);
  auto padded = hilbert::displacement_operator(alpha, space);
  CMatrix exact = hilbert::displacement_block(alpha, 8);
  EXPECT_LT(hilbert::max_abs(padded.matrix - exact), 1e-10);
  EXPECT_LT(padded.truncation_defect, 1e-6);
}

TEST(Hilbert, DisplacementBlockStableAtLargeAmplitude) {
  const cdouble alpha{5.0, 4.5};
  CMatrix d = hilbert::displacement_block(alpha, 12);
  EXPECT_TRUE(d.allFinite());
  // <m|D(alpha)|n> = conj(<n|D(-alpha)|m>).
  CMatrix dm = hilbert::displacement_block(-alpha, 12);
  EXPECT_LT(hilbert::max_abs(d - dm.adjoint()), 1e-12);
}

TEST(Hilbert, DisplacementComposition) {
  const std::size_t dim = 6;
  FockSpace space = FockSpace::with_padding(dim);
  for (cdouble a : {cdouble(1.2, -0.4), cdouble(-0.3, 1.9)}) {
    for (cdouble b : {cdouble(0.5, 0.5), cdouble(-1.1, 0.2)}) {
      CMatrix pa = hilbert::expm(a * hilbert::create(space.working_dim) - std::conj(a) * hilbert::destroy(space));
      CMatrix pb = hilbert::expm(b * hilbert::create(space.working_dim) - std::conj(b) * hilbert::destroy(space));
      CMatrix lhs = hilbert::crop(pa * pb, dim);
      cdouble phase = std::exp(0.5 * (a * std::conj(b) - std::conj(a) * b));
      CMatrix rhs = phase * hilbert::displacement_operator(a + b, space).matrix;
      EXPECT_LT(hilbert::max_abs(lhs - rhs), 1e-6);
    }
  }
  CMatrix d = hilbert::displacement_operator({2.0, -2.0}, space).matrix;
  EXPECT_NEAR(std::abs(d(0, 0)), std::exp(-4.0), 1e-12);
}

TEST(Hilbert, ParityAnticommutesWithLadder) {
  CMatrix p = hilbert::parity_operator(7), a = hilbert::destroy(7);
  EXPECT_LT(hilbert::max_abs(p * a + a * p), 1e-300);
}

TEST(Hilbert, ExpmInverse) {
  for (int k = 0; k < 5; ++k) {
    CMatrix a = CMatrix::Random(6, 6);
    a /= a.cwiseAbs().rowwise().sum().maxCoeff();
    CMatrix prod = hilbert::expm(a) * hilbert::expm(-a);
    EXPECT_LT(hilbert::max_abs(prod - hilbert::identity(6)), 1e-10);
  }
  CMatrix big = CMatrix::Random(5, 5) * 10.0;
  CMatrix e = hilbert::expm(big);
  // d/ds exp(sA) at s = 1 equals A exp(A).
  CMatrix ds = (hilbert::expm(big * (1.0 + 1e-6)) - hilbert::expm(big * (1.0 - 1e-6))) / 2e-6;
  EXPECT_LT(hilbert::max_abs(ds - big * e) / hilbert::max_abs(big * e), 1e-6);
}

TEST(Hilbert, DisplacementTruncationIsReported) {
  FockSpace space{5, 8};
  EXPECT_THROW(hilbert::displacement_operator({4.0, 0.0}, space), TruncationError);
}

TEST(Hilbert, PartialTracesOfProductState) {
  CMatrix a(2, 2);
  a << 0.3, cdouble(0.1, 0.2), cdouble(0.1, -0.2), 0.7;
  CMatrix b = CMatrix::Zero(3, 3);
  b(0, 0) = 0.5;
  b(2, 2) = 0.5;
  b(0, 2) = cdouble(0.0, 0.25);
  b(2, 0) = cdouble(0.0, -0.25);
  CMatrix ab = hilbert::kron(a, b);
  EXPECT_LT(hilbert::max_abs(hilbert::trace_out_first(ab, 2, 3) - b), 1e-15);
  EXPECT_LT(hilbert::max_abs(hilbert::trace_out_second(ab, 2, 3) - a), 1e-15);
}

TEST(Hilbert, VecIdentity) {
  CMatrix a = CMatrix::Random(3, 3), x = CMatrix::Random(3, 3), b = CMatrix::Random(3, 3);
  CVector lhs = hilbert::vec(a * x * b);
  CVector rhs = hilbert::kron(b.transpose(), a) * hilbert::vec(x);
  EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT(hilbert::max_abs(hilbert::unvec(hilbert::vec(x), 3) - x), 0.0 + 1e-300);
}

TEST(Hilbert, PadAndCrop) {
  CMatrix a = CMatrix::Random(3, 3);
  CMatrix p = hilbert::pad(a, 5);
  EXPECT_EQ(p.rows(), 5);
  EXPECT_EQ(p(4, 4), cdouble(0.0, 0.0));
  EXPECT_LT(hilbert::max_abs(hilbert::crop(p, 3) - a), 1e-300);
}

TEST(Hilbert, HermitianHelpers) {
  CMatrix h(2, 2);
  h << 1.0, cdouble(0.0, 2.0), cdouble(0.0, -2.0), 1.0;
  EXPECT_TRUE(hilbert::is_hermitian(h, 1e-14));
  EXPECT_NEAR(hilbert::min_eigenvalue(h), -1.0, 1e-13);
  h(0, 1) += 1e-3;
  EXPECT_FALSE(hilbert::is_hermitian(h, 1e-6));
}
