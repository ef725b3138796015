#pragma once

// Numerical checks of the reservoir's dynamical properties: stationary
// states, input separation, contractivity, echo-state traces, the Lipschitz
// bound on the input dependence of the generator, and mixing-time estimates.
//
// Spectral work happens on the real representation of the generator in the
// orthonormal Pauli basis (see to_pauli_basis); index 0 is the identity string.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "qrc/linalg.hpp"
#include "qrc/pauli.hpp"
#include "qrc/reservoir.hpp"
#include "qrc/spin_dynamics.hpp"

namespace qrc {

using Liouvillian = ComplexMatrix;  // column-stacked

struct StationaryReport {
  double input = 0.0;
  DensityMatrix rho_ss;
  int kernel_dim = 0;
  double residual = 0.0;  // ||L vec(rho_ss)||
  RealVector singular_values;
};

inline StationaryReport stationary_state(const Liouvillian& l) {
  const RealMatrix lp = to_pauli_basis(l);
  Eigen::BDCSVD<RealMatrix> svd(lp, Eigen::ComputeFullV);
  StationaryReport r;
  r.singular_values = svd.singularValues();
  const double cutoff = 1e-10 * r.singular_values(0);
  for (Eigen::Index i = 0; i < r.singular_values.size(); ++i)
    if (r.singular_values(i) <= cutoff) ++r.kernel_dim;
  // degenerate kernels: which null vector the SVD hands back is roundoff, and
  // it can be traceless. Project the identity string onto the kernel instead.
  const Eigen::Index k = std::max(r.kernel_dim, 1);
  const auto basis = svd.matrixV().rightCols(k);
  const RealVector v = basis * basis.row(0).transpose();
  DensityMatrix rho = from_pauli_coefficients(v);
  rho = 0.5 * (rho + rho.adjoint()).eval();
  const Complex tr = rho.trace();
  require(std::abs(tr) > 1e-12, ErrorCode::numerical_failure,
          "null vector of the generator is traceless; no stationary state found");
  rho /= tr.real();
  r.rho_ss = std::move(rho);
  r.residual = (l * vectorize(r.rho_ss)).norm();
  return r;
}

inline StationaryReport stationary_state(const CdParams& p, double s) {
  require(p.gamma > 0.0, ErrorCode::invalid_argument, "stationary state needs gamma > 0");
  auto r = stationary_state(build_liouvillian(p.network, p.gamma, s));
  r.input = s;
  return r;
}

struct SeparationResult {
  double distance = 0.0;
  int kernel_dim_s = 0;
  int kernel_dim_u = 0;
};

// HS distance between the stationary states for inputs s and u.
inline SeparationResult separation_check(const CdParams& p, double s, double u) {
  const auto a = stationary_state(p, s);
  const auto b = stationary_state(p, u);
  return {hs_distance(a.rho_ss, b.rho_ss), a.kernel_dim, b.kernel_dim};
}

enum class CoefficientConvention { normalized, trace };

inline std::string_view convention_name(CoefficientConvention c) {
  return c == CoefficientConvention::normalized ? "normalized" : "trace";
}

// Per-site residual of
//   gamma a^z_i + gamma / 2^N - 2 sum_{j != i} J_ij a^{yx}_ij - 2 h (s + 1) a^y_i
// with a^P = Tr(P rho) / 2^N (normalized) or Tr(P rho) (trace).
inline std::vector<double> stationary_residuals(const DensityMatrix& rho, const CdParams& p,
                                                double s, CoefficientConvention c) {
  const int n = p.network.n_qubits;
  require(rho.rows() == static_cast<Eigen::Index>(p.network.dim()),
          ErrorCode::dimension_mismatch, "state does not match the network");
  const double scale = c == CoefficientConvention::normalized ? std::ldexp(1.0, -n) : 1.0;
  auto alpha = [&](const PauliString& ps) { return scale * ps.trace_with(rho).real(); };
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) {
    double r = p.gamma * alpha(PauliString::single(n, i, PauliLetter::Z)) +
               p.gamma * std::ldexp(1.0, -n) -
               2.0 * p.network.field * (s + 1.0) * alpha(PauliString::single(n, i, PauliLetter::Y));
    for (int j = 0; j < n; ++j)
      if (j != i)
        r -= 2.0 * p.network.couplings(i, j) *
             alpha(PauliString::pair(n, i, PauliLetter::Y, j, PauliLetter::X));
    out[i] = r;
  }
  return out;
}

struct NecessaryConditionReport {
  std::vector<double> residuals;        // under the calibrated convention
  std::vector<double> residuals_other;  // under the other reading
  CoefficientConvention convention = CoefficientConvention::normalized;
};

// Picks the coefficient convention that makes the identity hold on the
// single-qubit, H = 0 case, whose stationary state is |1><1|.
inline CoefficientConvention calibrate_convention() {
  const CdParams one{SpinNetwork{1, RealMatrix::Zero(1, 1), 0.0}, 1.0};
  DensityMatrix down = DensityMatrix::Zero(2, 2);
  down(1, 1) = 1.0;
  const double rn = std::abs(stationary_residuals(down, one, 0.0, CoefficientConvention::normalized)[0]);
  const double rt = std::abs(stationary_residuals(down, one, 0.0, CoefficientConvention::trace)[0]);
  return rn <= rt ? CoefficientConvention::normalized : CoefficientConvention::trace;
}

inline NecessaryConditionReport stationary_necessary_condition(const StationaryReport& report,
                                                               const CdParams& p, double s) {
  NecessaryConditionReport out;
  out.convention = calibrate_convention();
  const auto other = out.convention == CoefficientConvention::normalized
                         ? CoefficientConvention::trace
                         : CoefficientConvention::normalized;
  out.residuals = stationary_residuals(report.rho_ss, p, s, out.convention);
  out.residuals_other = stationary_residuals(report.rho_ss, p, s, other);
  return out;
}

struct ContractivityReport {
  double input = 0.0;
  double dt = 0.0;
  double factor = 0.0;  // operator 2-norm on the traceless Hermitian subspace
  std::vector<double> esp_trace;
};

inline double contraction_factor_pauli(const RealMatrix& lp, double dt) {
  require(dt >= 0.0, ErrorCode::invalid_argument, "dt must be >= 0");
  const Eigen::Index d = lp.rows() - 1;
  const RealMatrix restricted = lp.bottomRightCorner(d, d);
  const RealMatrix e = expm(RealMatrix(dt * restricted));
  Eigen::BDCSVD<RealMatrix> svd(e);
  return svd.singularValues()(0);
}

// Trace preservation makes the traceless subspace invariant, so the
// restriction is the lower-right block in the Pauli basis.
inline ContractivityReport contraction_factor(const Liouvillian& l, double dt) {
  const RealMatrix lp = to_pauli_basis(l);
  require(lp.row(0).cwiseAbs().maxCoeff() <= 1e-10 * std::max(1.0, lp.norm()),
          ErrorCode::invariant_violation, "generator is not trace preserving");
  ContractivityReport r;
  r.dt = dt;
  r.factor = contraction_factor_pauli(lp, dt);
  return r;
}

// HS distance after every input step for two initial states.
inline std::vector<double> esp_trace(const ReservoirSpec& spec, std::span<const double> inputs,
                                     const DensityMatrix& rho_a, const DensityMatrix& rho_b) {
  const auto obs = ObservableSet::standard(spec.network.n_qubits);
  Reservoir a(spec, 1, obs), b(spec, 1, obs);
  a.set_state(rho_a);
  b.set_state(rho_b);
  std::vector<double> scratch(a.feature_count());
  std::vector<double> out;
  out.reserve(inputs.size());
  for (double s : inputs) {
    a.step(s, scratch);
    b.step(s, scratch);
    out.push_back(hs_distance(a.state(), b.state()));
  }
  return out;
}

struct LipschitzReport {
  double max_ratio = 0.0;
  double bound = 0.0;  // 2 N |h|
  std::size_t trials = 0;
  bool within_bound = true;
};

// Samples ||(L(s) - L(u)) rho||_2 / |s - u| over random states and inputs.
// Half the states are pure (the extreme points), half random mixed.
inline LipschitzReport fading_lipschitz_check(const CdParams& p, std::size_t n_trials,
                                              std::uint64_t seed) {
  require(n_trials >= 1, ErrorCode::invalid_argument, "n_trials must be >= 1");
  p.network.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> g(0.0, 1.0);
  const auto dim = static_cast<Eigen::Index>(p.network.dim());
  LipschitzReport rep;
  rep.bound = 2.0 * p.network.n_qubits * std::abs(p.network.field);
  rep.trials = n_trials;
  for (std::size_t t = 0; t < n_trials; ++t) {
    const Eigen::Index rank =
        t % 2 == 0 ? 1 : std::uniform_int_distribution<Eigen::Index>(1, dim)(rng);
    ComplexMatrix a(dim, rank);
    for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = Complex(g(rng), g(rng));
    ComplexMatrix rho = a * a.adjoint();
    rho /= rho.trace().real();
    double s = unit(rng), u = unit(rng);
    while (u == s) u = unit(rng);
    const ComplexMatrix diff = gkls_rhs(rho, driven_hamiltonian(p.network, s), p.gamma) -
                               gkls_rhs(rho, driven_hamiltonian(p.network, u), p.gamma);
    rep.max_ratio = std::max(rep.max_ratio, diff.norm() / std::abs(s - u));
  }
  rep.within_bound = rep.max_ratio <= rep.bound + 1e-9;
  return rep;
}

struct MixingTimeReport {
  int n_qubits = 0;
  double gamma = 0.0;    // filled in by callers that know the parameters
  double field_h = 0.0;
  double lambda1_real = 0.0;
  double eta = 0.0;
  double tau = 0.0;
  double c_max = 0.0;
  double min_overlap = 0.0;  // smallest |<l_i|r_i>|
  bool near_defective = false;
};

inline MixingTimeReport mixing_time_from_pauli(const RealMatrix& lp, int n_qubits) {
  const auto sd = eig_general(lp, 1e-7);
  const Eigen::Index d = lp.rows();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(d));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) {
    return sd.eigenvalues(a).real() > sd.eigenvalues(b).real();
  });
  const double scale = std::max(1.0, lp.cwiseAbs().maxCoeff());
  const Complex lambda0 = sd.eigenvalues(order[0]);
  require(std::abs(lambda0) <= 1e-8 * scale, ErrorCode::numerical_failure,
          "generator has no zero eigenvalue");
  const double second = sd.eigenvalues(order[1]).real();
  require(second < -1e-9 * scale, ErrorCode::numerical_failure,
          "degenerate zero eigenvalue: stationary state is not unique");

  MixingTimeReport rep;
  rep.n_qubits = n_qubits;
  rep.lambda1_real = second;
  rep.min_overlap = 1.0;
  for (Eigen::Index k = 1; k < d; ++k) {
    const Eigen::Index i = order[static_cast<std::size_t>(k)];
    const double overlap = std::abs(sd.left.col(i).dot(sd.right.col(i)));
    rep.min_overlap = std::min(rep.min_overlap, overlap);
    rep.c_max = std::max(rep.c_max, 1.0 / overlap);
  }
  rep.near_defective = rep.min_overlap < 1e-8;
  rep.eta = std::log(rep.c_max);
  rep.tau = (n_qubits + rep.eta) / std::abs(rep.lambda1_real);
  return rep;
}

inline MixingTimeReport mixing_time_estimate(const Liouvillian& l, int n_qubits) {
  return mixing_time_from_pauli(to_pauli_basis(l), n_qubits);
}

inline MixingTimeReport mixing_time_estimate(const CdParams& p, double s = 0.0) {
  auto r = mixing_time_estimate(build_liouvillian(p.network, p.gamma, s), p.network.n_qubits);
  r.gamma = p.gamma;
  r.field_h = p.network.field;
  return r;
}

// Mean HS distance between the erase-and-write injection and the
// dissipate-then-rotate approximation, at each value of gamma_first * dt_d.
inline std::vector<double> fn_approx_distance_curve(int n_qubits, std::span<const double> gamma_dt,
                                                    std::size_t n_pairs, std::uint64_t seed) {
  require(n_pairs >= 1, ErrorCode::invalid_argument, "n_pairs must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> g(0.0, 1.0);
  const auto dim = static_cast<Eigen::Index>(std::size_t{1} << n_qubits);
  std::vector<DensityMatrix> states;
  std::vector<double> inputs;
  for (std::size_t k = 0; k < n_pairs; ++k) {
    const Eigen::Index rank = std::uniform_int_distribution<Eigen::Index>(1, dim)(rng);
    ComplexMatrix a(dim, rank);
    for (Eigen::Index i = 0; i < a.size(); ++i) a(i) = Complex(g(rng), g(rng));
    ComplexMatrix rho = a * a.adjoint();
    states.push_back(rho / rho.trace().real());
    inputs.push_back(unit(rng));
  }
  const SpinNetwork net{n_qubits, RealMatrix::Zero(n_qubits, n_qubits), 0.0};
  std::vector<double> out;
  for (double x : gamma_dt) {
    require(x >= 0.0, ErrorCode::invalid_argument, "gamma * dt_d must be >= 0");
    double acc = 0.0;
    for (std::size_t k = 0; k < n_pairs; ++k)
      acc += hs_distance(fn_approx_step(states[k], FnApproxParams{net, 0.0, 1.0, x}, inputs[k]),
                         inject(states[k], inputs[k]));
    out.push_back(acc / static_cast<double>(n_pairs));
  }
  return out;
}

}  // namespace qrc
