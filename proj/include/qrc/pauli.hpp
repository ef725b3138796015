#pragma once

// Pauli operators and Pauli strings on n qubits.
//
// Single-qubit convention: |0> = (1, 0), sigma_z = diag(1, -1) and the
// lowering operator sigma^- = |1><0| maps |0> to |1>. Site indices are
// 0-based in code; site i lives on bit (n - 1 - i) of a basis index.

#include <bit>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "qrc/linalg.hpp"

namespace qrc {

enum class PauliLetter : std::uint8_t { I = 0, X = 1, Y = 2, Z = 3 };

inline char letter_char(PauliLetter p) { return "IXYZ"[static_cast<int>(p)]; }

inline ComplexMatrix single_pauli(PauliLetter p) {
  ComplexMatrix m = ComplexMatrix::Zero(2, 2);
  switch (p) {
    case PauliLetter::I: m(0, 0) = 1.0; m(1, 1) = 1.0; break;
    case PauliLetter::X: m(0, 1) = 1.0; m(1, 0) = 1.0; break;
    case PauliLetter::Y: m(0, 1) = -kI; m(1, 0) = kI; break;
    case PauliLetter::Z: m(0, 0) = 1.0; m(1, 1) = -1.0; break;
  }
  return m;
}

inline ComplexMatrix sigma_minus() {
  ComplexMatrix m = ComplexMatrix::Zero(2, 2);
  m(1, 0) = 1.0;
  return m;
}

inline ComplexMatrix sigma_plus() { return sigma_minus().adjoint(); }

inline std::size_t site_bit(int n_qubits, int site) {
  return std::size_t{1} << (n_qubits - 1 - site);
}

// I x ... x op (at site) x ... x I
inline ComplexMatrix embed(const ComplexMatrix& op, int site, int n_qubits) {
  require(site >= 0 && site < n_qubits, ErrorCode::invalid_argument, "site out of range");
  ComplexMatrix out = ComplexMatrix::Identity(1, 1);
  for (int k = 0; k < n_qubits; ++k)
    out = kron(out, k == site ? op : ComplexMatrix::Identity(2, 2));
  return out;
}

// Tensor product of single-qubit Pauli letters. Acts on a basis state as
// P|k> = phase(k) |k ^ flip_mask>.
class PauliString {
 public:
  PauliString() = default;

  explicit PauliString(std::vector<PauliLetter> letters) : letters_(std::move(letters)) {
    const int n = static_cast<int>(letters_.size());
    for (int i = 0; i < n; ++i) {
      const auto bit = site_bit(n, i);
      if (letters_[i] == PauliLetter::X || letters_[i] == PauliLetter::Y) flip_ |= bit;
      if (letters_[i] == PauliLetter::Y || letters_[i] == PauliLetter::Z) phase_mask_ |= bit;
      if (letters_[i] == PauliLetter::Y) ++y_count_;
    }
  }

  static PauliString single(int n_qubits, int site, PauliLetter p) {
    std::vector<PauliLetter> letters(n_qubits, PauliLetter::I);
    letters.at(site) = p;
    return PauliString(std::move(letters));
  }

  static PauliString pair(int n_qubits, int site_a, PauliLetter pa, int site_b, PauliLetter pb) {
    std::vector<PauliLetter> letters(n_qubits, PauliLetter::I);
    letters.at(site_a) = pa;
    letters.at(site_b) = pb;
    return PauliString(std::move(letters));
  }

  // index a in [0, 4^n) read as base-4 digits, qubit 1 most significant
  static PauliString from_index(int n_qubits, std::size_t index) {
    std::vector<PauliLetter> letters(n_qubits);
    for (int i = n_qubits - 1; i >= 0; --i) {
      letters[i] = static_cast<PauliLetter>(index & 3u);
      index >>= 2;
    }
    return PauliString(std::move(letters));
  }

  int n_qubits() const { return static_cast<int>(letters_.size()); }
  const std::vector<PauliLetter>& letters() const { return letters_; }
  std::size_t flip_mask() const { return flip_; }

  // <k ^ flip| P |k>
  Complex phase(std::size_t k) const {
    // Y = i X Z on our basis: Y|b> = i (-1)^b |b^1>
    const int minus = std::popcount(k & phase_mask_) & 1;
    Complex ph = minus ? -1.0 : 1.0;
    switch (y_count_ & 3) {
      case 1: ph *= kI; break;
      case 2: ph *= -1.0; break;
      case 3: ph *= -kI; break;
      default: break;
    }
    return ph;
  }

  ComplexMatrix matrix() const {
    const std::size_t dim = std::size_t{1} << n_qubits();
    ComplexMatrix m = ComplexMatrix::Zero(dim, dim);
    for (std::size_t k = 0; k < dim; ++k) m(k ^ flip_, k) = phase(k);
    return m;
  }

  // Tr(P rho) in O(dim)
  Complex trace_with(const ComplexMatrix& rho) const {
    const auto dim = static_cast<std::size_t>(rho.rows());
    Complex acc = 0.0;
    for (std::size_t k = 0; k < dim; ++k) acc += phase(k) * rho(k, k ^ flip_);
    return acc;
  }

  // e.g. "X3" or "Z1Z4" (1-based sites, identity factors omitted)
  std::string label() const {
    std::string out;
    for (int i = 0; i < n_qubits(); ++i)
      if (letters_[i] != PauliLetter::I) out += letter_char(letters_[i]) + std::to_string(i + 1);
    return out.empty() ? std::string("I") : out;
  }

 private:
  std::vector<PauliLetter> letters_;
  std::size_t flip_ = 0;
  std::size_t phase_mask_ = 0;
  int y_count_ = 0;
};

// Real matrix of a superoperator in the orthonormal basis {P_a / sqrt(2^n)}:
// entry (a, b) = Tr(P_a S(P_b)) / 2^n. Hermiticity-preserving maps give real
// matrices. The input is the column-stacked superoperator.
inline RealMatrix to_pauli_basis(const ComplexMatrix& super) {
  const auto d2 = static_cast<std::size_t>(super.rows());
  require(super.rows() == super.cols(), ErrorCode::dimension_mismatch,
          "superoperator must be square");
  const std::size_t dim = static_cast<std::size_t>(std::llround(std::sqrt(double(d2))));
  require(dim * dim == d2, ErrorCode::dimension_mismatch, "superoperator size is not d^2");
  const int n = log2_exact(dim);
  std::vector<PauliString> basis;
  basis.reserve(d2);
  for (std::size_t a = 0; a < d2; ++a) basis.push_back(PauliString::from_index(n, a));

  // column b of S B, with B_{(r,c), b} = (P_b)_{r c} / sqrt(dim)
  const double norm = 1.0 / std::sqrt(double(dim));
  ComplexMatrix sb(d2, d2);
  for (std::size_t b = 0; b < d2; ++b) {
    ComplexVector col = ComplexVector::Zero(d2);
    for (std::size_t k = 0; k < dim; ++k) {
      const std::size_t r = k ^ basis[b].flip_mask();
      col += (norm * basis[b].phase(k)) * super.col(k * dim + r);
    }
    sb.col(b) = col;
  }
  RealMatrix out(d2, d2);
  for (std::size_t a = 0; a < d2; ++a) {
    for (std::size_t b = 0; b < d2; ++b) {
      Complex acc = 0.0;
      for (std::size_t k = 0; k < dim; ++k) {
        const std::size_t r = k ^ basis[a].flip_mask();
        acc += std::conj(basis[a].phase(k)) * sb(k * dim + r, b);
      }
      out(a, b) = norm * acc.real();
    }
  }
  return out;
}

// rho from orthonormal Pauli coefficients
inline ComplexMatrix from_pauli_coefficients(const RealVector& coeffs) {
  const auto d2 = static_cast<std::size_t>(coeffs.size());
  const std::size_t dim = static_cast<std::size_t>(std::llround(std::sqrt(double(d2))));
  const int n = log2_exact(dim);
  ComplexMatrix rho = ComplexMatrix::Zero(dim, dim);
  const double norm = 1.0 / std::sqrt(double(dim));
  for (std::size_t a = 0; a < d2; ++a) {
    if (coeffs(a) == 0.0) continue;
    const auto p = PauliString::from_index(n, a);
    for (std::size_t k = 0; k < dim; ++k) rho(k ^ p.flip_mask(), k) += norm * coeffs(a) * p.phase(k);
  }
  return rho;
}

}  // namespace qrc
