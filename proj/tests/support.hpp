#pragma once

#include <random>

#include "qrc/linalg.hpp"

namespace qrc::fixtures {

inline ComplexMatrix random_complex(Eigen::Index n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  ComplexMatrix m(n, n);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = Complex(g(rng), g(rng));
  return m;
}

inline ComplexMatrix random_hermitian(Eigen::Index n, std::mt19937_64& rng, double scale = 1.0) {
  const ComplexMatrix a = random_complex(n, rng, scale);
  return 0.5 * (a + a.adjoint());
}

// Ginibre ensemble with a random rank
inline ComplexMatrix random_density(Eigen::Index n, std::mt19937_64& rng) {
  std::uniform_int_distribution<Eigen::Index> rank_dist(1, n);
  const Eigen::Index rank = rank_dist(rng);
  std::normal_distribution<double> g(0.0, 1.0);
  ComplexMatrix a(n, rank);
  for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = Complex(g(rng), g(rng));
  ComplexMatrix rho = a * a.adjoint();
  return rho / rho.trace().real();
}

inline ComplexMatrix random_pure(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  ComplexVector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = Complex(g(rng), g(rng));
  v.normalize();
  return v * v.adjoint();
}

// exp(A) by a plain Taylor series after scaling by 2^-s; independent of the
// Pade implementation under test.
inline ComplexMatrix taylor_expm(const ComplexMatrix& a) {
  const double norm = a.cwiseAbs().colwise().sum().maxCoeff();
  int s = 0;
  while (norm / std::ldexp(1.0, s) > 0.25) ++s;
  const ComplexMatrix b = a / std::ldexp(1.0, s);
  ComplexMatrix term = ComplexMatrix::Identity(a.rows(), a.cols());
  ComplexMatrix sum = term;
  for (int k = 1; k < 40; ++k) {
    term = term * b / double(k);
    sum += term;
  }
  for (int k = 0; k < s; ++k) sum = sum * sum;
  return sum;
}

}  // namespace qrc::fixtures
