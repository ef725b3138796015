#pragma once

// Dense linear algebra shared by every other module.
//
// Matrices are Eigen column-major. Multi-qubit operators use the convention
// that qubit 1 is the leftmost Kronecker factor, i.e. the most significant
// bit of a basis index. Vectorization stacks columns, so
// vec(A X B) = (B^T kron A) vec(X).

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <string>

#include "qrc/error.hpp"

namespace qrc {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;

inline constexpr Complex kI{0.0, 1.0};

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

inline int log2_exact(std::size_t n) {
  require(is_power_of_two(n), ErrorCode::dimension_mismatch,
          "dimension " + std::to_string(n) + " is not a power of two");
  int k = 0;
  while ((std::size_t{1} << k) < n) ++k;
  return k;
}

template <typename DerivedA, typename DerivedB>
auto kron(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename Eigen::ScalarBinaryOpTraits<typename DerivedA::Scalar,
                                                      typename DerivedB::Scalar>::ReturnType;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out(a.rows() * b.rows(),
                                                           a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) =
          a(i, j) * b.template cast<Scalar>();
  return out;
}

// Matrix exponential by Pade scaling and squaring (Higham 2005).
template <typename Derived>
auto expm(const Eigen::MatrixBase<Derived>& input) {
  using Matrix = Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  require(input.rows() == input.cols(), ErrorCode::dimension_mismatch,
          "expm needs a square matrix");
  Matrix a = input;
  const Eigen::Index n = a.rows();
  if (n == 0) return a;
  for (Eigen::Index i = 0; i < a.size(); ++i)
    require(std::isfinite(std::abs(a(i))), ErrorCode::numerical_failure,
            "expm input contains non-finite entries");

  static constexpr std::array<double, 5> theta{1.495585217958292e-2, 2.539398330063230e-1,
                                               9.504178996162932e-1, 2.097847961257068e0,
                                               5.371920351148152e0};
  static constexpr std::array<double, 14> b13{
      64764752532480000.0, 32382376266240000.0, 7771770303897600.0, 1187353796428800.0,
      129060195264000.0,   10559470521600.0,    670442572800.0,     33522128640.0,
      1323241920.0,        40840800.0,          960960.0,           16380.0,
      182.0,               1.0};

  const Matrix id = Matrix::Identity(n, n);
  const double norm1 = a.cwiseAbs().colwise().sum().maxCoeff();

  auto pade_low = [&](const auto& b, int m) {
    // odd/even split of the degree-m numerator
    Matrix a2 = a * a;
    Matrix power = id;
    Matrix u = Matrix::Zero(n, n);
    Matrix v = Matrix::Zero(n, n);
    for (int k = 0; k <= m; k += 2) {
      u += b[k + 1] * power;
      v += b[k] * power;
      power = power * a2;
    }
    u = a * u;
    return std::pair{u, v};
  };

  auto solve = [&](const Matrix& u, const Matrix& v) -> Matrix {
    return (v - u).partialPivLu().solve(v + u);
  };

  if (norm1 <= theta[0]) {
    static constexpr std::array<double, 4> b{120.0, 60.0, 12.0, 1.0};
    auto [u, v] = pade_low(b, 3);
    return solve(u, v);
  }
  if (norm1 <= theta[1]) {
    static constexpr std::array<double, 6> b{30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0};
    auto [u, v] = pade_low(b, 5);
    return solve(u, v);
  }
  if (norm1 <= theta[2]) {
    static constexpr std::array<double, 8> b{17297280.0, 8648640.0, 1995840.0, 277200.0,
                                             25200.0,    1512.0,    56.0,      1.0};
    auto [u, v] = pade_low(b, 7);
    return solve(u, v);
  }
  if (norm1 <= theta[3]) {
    static constexpr std::array<double, 10> b{17643225600.0, 8821612800.0, 2075673600.0,
                                              302702400.0,   30270240.0,   2162160.0,
                                              110880.0,      3960.0,       90.0,
                                              1.0};
    auto [u, v] = pade_low(b, 9);
    return solve(u, v);
  }

  int s = std::max(0, static_cast<int>(std::ceil(std::log2(norm1 / theta[4]))));
  a /= std::ldexp(1.0, s);
  const Matrix a2 = a * a;
  const Matrix a4 = a2 * a2;
  const Matrix a6 = a4 * a2;
  Matrix u = a6 * (b13[13] * a6 + b13[11] * a4 + b13[9] * a2) + b13[7] * a6 + b13[5] * a4 +
             b13[3] * a2 + b13[1] * id;
  u = a * u;
  const Matrix v = a6 * (b13[12] * a6 + b13[10] * a4 + b13[8] * a2) + b13[6] * a6 +
                   b13[4] * a4 + b13[2] * a2 + b13[0] * id;
  Matrix r = solve(u, v);
  for (int k = 0; k < s; ++k) r = r * r;
  return r;
}

// exp(-i H t) for Hermitian H through its eigendecomposition.
inline ComplexMatrix unitary_propagator(const ComplexMatrix& h, double t) {
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(h);
  require(es.info() == Eigen::Success, ErrorCode::numerical_failure,
          "Hermitian eigendecomposition failed");
  const ComplexVector phases =
      (es.eigenvalues().cast<Complex>() * Complex(0.0, -t)).array().exp().matrix();
  return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
}

// Right eigenvectors (unit columns) and left eigenvectors (unit columns l_i
// with l_i^dagger A = lambda_i l_i^dagger). Left vectors come from the rows of
// the inverse right-eigenvector matrix.
struct SpectralDecomposition {
  ComplexVector eigenvalues;
  ComplexMatrix right;
  ComplexMatrix left;
  double residual = 0.0;  // max_i ||A r_i - lambda_i r_i|| / ||A||
  double reconstruction_error = 0.0;
};

namespace detail {

inline SpectralDecomposition finish_spectral(const ComplexMatrix& a, ComplexVector values,
                                             ComplexMatrix right, double tolerance) {
  SpectralDecomposition out;
  const Eigen::Index n = a.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double norm = right.col(i).norm();
    require(norm > 0.0, ErrorCode::numerical_failure, "zero eigenvector");
    right.col(i) /= norm;
  }
  const double scale = std::max(a.norm(), std::numeric_limits<double>::min());
  double residual = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    residual = std::max(residual, (a * right.col(i) - values(i) * right.col(i)).norm() / scale);

  Eigen::PartialPivLU<ComplexMatrix> lu(right);
  const ComplexMatrix inverse = lu.inverse();
  ComplexMatrix left(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double norm = inverse.row(i).norm();
    require(std::isfinite(norm) && norm > 0.0, ErrorCode::numerical_failure,
            "right eigenvectors are not invertible (matrix not diagonalizable)");
    left.col(i) = inverse.row(i).adjoint() / norm;
  }
  const double recon = (right * values.asDiagonal() * inverse - a).norm() / scale;

  out.eigenvalues = std::move(values);
  out.right = std::move(right);
  out.left = std::move(left);
  out.residual = residual;
  out.reconstruction_error = recon;
  require(residual <= tolerance && recon <= tolerance, ErrorCode::numerical_failure,
          "eigendecomposition residual too large (residual " + std::to_string(residual) +
              ", reconstruction " + std::to_string(recon) + ")");
  return out;
}

}  // namespace detail

inline SpectralDecomposition eig_general(const ComplexMatrix& a, double tolerance = 1e-8) {
  require(a.rows() == a.cols(), ErrorCode::dimension_mismatch, "eig needs a square matrix");
  Eigen::ComplexEigenSolver<ComplexMatrix> es(a, true);
  require(es.info() == Eigen::Success, ErrorCode::numerical_failure,
          "complex eigensolver did not converge");
  return detail::finish_spectral(a, es.eigenvalues(), es.eigenvectors(), tolerance);
}

inline SpectralDecomposition eig_general(const RealMatrix& a, double tolerance = 1e-8) {
  require(a.rows() == a.cols(), ErrorCode::dimension_mismatch, "eig needs a square matrix");
  Eigen::EigenSolver<RealMatrix> es(a, true);
  require(es.info() == Eigen::Success, ErrorCode::numerical_failure,
          "real eigensolver did not converge");
  return detail::finish_spectral(a.cast<Complex>(), es.eigenvalues(), es.eigenvectors(),
                                 tolerance);
}

// Minimum-norm least squares through a thin SVD. Singular values at or below
// rcond * sigma_max are dropped.
struct LeastSquaresResult {
  RealVector solution;
  Eigen::Index rank = 0;
  RealVector singular_values;
};

inline LeastSquaresResult svd_lstsq(const RealMatrix& a, const RealVector& b,
                                    double rcond = 1e-10) {
  require(a.rows() == b.size(), ErrorCode::dimension_mismatch,
          "svd_lstsq: row count mismatch");
  require(rcond >= 0.0, ErrorCode::invalid_argument, "svd_lstsq: rcond must be >= 0");
  require(a.allFinite() && b.allFinite(), ErrorCode::numerical_failure,
          "svd_lstsq: non-finite input");
  LeastSquaresResult out;
  out.solution = RealVector::Zero(a.cols());
  if (a.rows() == 0 || a.cols() == 0) return out;
  Eigen::BDCSVD<RealMatrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  out.singular_values = svd.singularValues();
  const double cutoff = rcond * out.singular_values(0);
  RealVector projected = svd.matrixU().transpose() * b;
  for (Eigen::Index i = 0; i < out.singular_values.size(); ++i) {
    const double sigma = out.singular_values(i);
    if (sigma > cutoff && sigma > 0.0) {
      projected(i) /= sigma;
      ++out.rank;
    } else {
      projected(i) = 0.0;
    }
  }
  out.solution = svd.matrixV() * projected;
  return out;
}

// Trace over qubit 1 (the most significant bit).
inline ComplexMatrix partial_trace_first(const ComplexMatrix& rho) {
  require(rho.rows() == rho.cols() && rho.rows() >= 2, ErrorCode::dimension_mismatch,
          "partial trace needs a square matrix of dimension >= 2");
  log2_exact(static_cast<std::size_t>(rho.rows()));
  const Eigen::Index half = rho.rows() / 2;
  return rho.topLeftCorner(half, half) + rho.bottomRightCorner(half, half);
}

inline ComplexVector vectorize(const ComplexMatrix& m) {
  return Eigen::Map<const ComplexVector>(m.data(), m.size());
}

inline ComplexMatrix devectorize(const ComplexVector& v) {
  const auto n = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(v.size()))));
  require(n * n == v.size(), ErrorCode::dimension_mismatch,
          "devectorize: length is not a perfect square");
  return Eigen::Map<const ComplexMatrix>(v.data(), n, n);
}

inline double hs_norm(const ComplexMatrix& m) { return m.norm(); }

inline double hs_distance(const ComplexMatrix& a, const ComplexMatrix& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorCode::dimension_mismatch,
          "hs_distance: shape mismatch");
  return (a - b).norm();
}

}  // namespace qrc
