#include <gtest/gtest.h>

#include <random>

#include "qrc/pauli.hpp"
#include "support.hpp"

using namespace qrc;

TEST(Pauli, AlgebraAndBasisConvention) {
  const ComplexMatrix x = single_pauli(PauliLetter::X), y = single_pauli(PauliLetter::Y),
                      z = single_pauli(PauliLetter::Z);
  EXPECT_LT((x * y - kI * z).norm(), 1e-15);
  EXPECT_LT((x * x - ComplexMatrix::Identity(2, 2)).norm(), 1e-15);
  EXPECT_EQ(z(0, 0), Complex(1.0));  // |0> has sigma_z = +1
  // lowering operator takes |0> to |1> and sigma^+ sigma^- = |0><0|
  EXPECT_EQ(sigma_minus()(1, 0), Complex(1.0));
  const ComplexMatrix n = sigma_plus() * sigma_minus();
  EXPECT_EQ(n(0, 0), Complex(1.0));
  EXPECT_EQ(n(1, 1), Complex(0.0));
}

TEST(PauliString, MatrixMatchesKroneckerProduct) {
  for (std::size_t idx = 0; idx < 64; ++idx) {
    const auto p = PauliString::from_index(3, idx);
    ComplexMatrix expected = ComplexMatrix::Identity(1, 1);
    for (auto letter : p.letters()) expected = kron(expected, single_pauli(letter));
    EXPECT_LT((p.matrix() - expected).norm(), 1e-15) << p.label();
  }
}

TEST(PauliString, TraceWithMatchesDenseTrace) {
  std::mt19937_64 rng(1);
  const ComplexMatrix rho = fixtures::random_density(8, rng);
  for (std::size_t idx = 0; idx < 64; ++idx) {
    const auto p = PauliString::from_index(3, idx);
    EXPECT_LT(std::abs(p.trace_with(rho) - (p.matrix() * rho).trace()), 1e-14);
  }
}

TEST(PauliString, Labels) {
  EXPECT_EQ(PauliString::single(5, 2, PauliLetter::X).label(), "X3");
  EXPECT_EQ(PauliString::pair(5, 0, PauliLetter::Z, 3, PauliLetter::Z).label(), "Z1Z4");
  EXPECT_EQ(PauliString::from_index(2, 0).label(), "I");
}

TEST(PauliString, EmbedAgreesWithSingleSiteString) {
  EXPECT_LT((embed(single_pauli(PauliLetter::Y), 1, 3) -
             PauliString::single(3, 1, PauliLetter::Y).matrix())
                .norm(),
            1e-15);
}

TEST(PauliBasis, MatchesDirectDefinition) {
  std::mt19937_64 rng(7);
  const ComplexMatrix u = fixtures::random_complex(4, rng);
  // S(X) = U X U^dagger  ->  (conj(U) kron U)
  const ComplexMatrix super = kron(ComplexMatrix(u.conjugate()), u);
  const RealMatrix pb = to_pauli_basis(super);
  for (std::size_t a = 0; a < 16; ++a)
    for (std::size_t b = 0; b < 16; ++b) {
      const ComplexMatrix pa = PauliString::from_index(2, a).matrix();
      const ComplexMatrix pbm = PauliString::from_index(2, b).matrix();
      const Complex direct = (pa * u * pbm * u.adjoint()).trace() / 4.0;
      EXPECT_NEAR(pb(a, b), direct.real(), 1e-12);
      EXPECT_NEAR(direct.imag(), 0.0, 1e-12);
    }
}

TEST(PauliBasis, CoefficientRoundTrip) {
  std::mt19937_64 rng(3);
  const ComplexMatrix rho = fixtures::random_density(4, rng);
  RealVector c(16);
  for (std::size_t a = 0; a < 16; ++a)
    c(a) = PauliString::from_index(2, a).trace_with(rho).real() / 2.0;
  EXPECT_LT((from_pauli_coefficients(c) - rho).norm(), 1e-14);
}
