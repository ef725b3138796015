#pragma once

// Open and closed dynamics of a transverse-field spin network.
//
//   H        = sum_{i<j} J_ij X_i X_j + h sum_i Z_i
//   H'(s)    = H + h (s + 1) sum_i X_i                      (input-driven)
//   L(rho)   = -i[H'(s), rho] + gamma sum_i D[sigma^-_i](rho)
//
// Density matrices are plain ComplexMatrix values. Physical validity is
// checked by check_density rather than enforced by a wrapper type.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "qrc/linalg.hpp"
#include "qrc/pauli.hpp"

namespace qrc {

using DensityMatrix = ComplexMatrix;

inline constexpr int kMaxQubits = 6;

struct SpinNetwork {
  int n_qubits = 0;
  RealMatrix couplings;  // symmetric, zero diagonal
  double field = 0.0;    // h

  void validate() const {
    require(n_qubits >= 1 && n_qubits <= kMaxQubits, ErrorCode::invalid_argument,
            "n_qubits must be in [1, " + std::to_string(kMaxQubits) + "]");
    require(couplings.rows() == n_qubits && couplings.cols() == n_qubits,
            ErrorCode::dimension_mismatch, "coupling matrix must be n x n");
    require(std::isfinite(field), ErrorCode::invalid_argument, "field must be finite");
    for (int i = 0; i < n_qubits; ++i) {
      require(couplings(i, i) == 0.0, ErrorCode::invalid_argument,
              "coupling matrix must have a zero diagonal");
      for (int j = 0; j < n_qubits; ++j)
        require(couplings(i, j) == couplings(j, i) && std::isfinite(couplings(i, j)),
                ErrorCode::invalid_argument, "coupling matrix must be finite and symmetric");
    }
  }

  std::size_t dim() const { return std::size_t{1} << n_qubits; }
};

// J_ij ~ U[-scale, scale], drawn for i < j in row-major order.
inline RealMatrix sample_couplings(int n_qubits, std::uint64_t seed, double scale = 1.0) {
  require(n_qubits >= 1, ErrorCode::invalid_argument, "n_qubits must be >= 1");
  require(scale >= 0.0, ErrorCode::invalid_argument, "coupling scale must be >= 0");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-scale, scale);
  RealMatrix j = RealMatrix::Zero(n_qubits, n_qubits);
  for (int a = 0; a < n_qubits; ++a)
    for (int b = a + 1; b < n_qubits; ++b) j(a, b) = j(b, a) = dist(rng);
  return j;
}

inline SpinNetwork make_network(int n_qubits, double field, std::uint64_t coupling_seed,
                                double scale = 1.0) {
  SpinNetwork net{n_qubits, sample_couplings(n_qubits, coupling_seed, scale), field};
  net.validate();
  return net;
}

// Real symmetric Hamiltonian. drive = h (s + 1) for the input-driven form.
inline RealMatrix real_hamiltonian(const SpinNetwork& net, double drive) {
  net.validate();
  const int n = net.n_qubits;
  const auto dim = net.dim();
  RealMatrix h = RealMatrix::Zero(dim, dim);
  for (std::size_t k = 0; k < dim; ++k) {
    double diag = 0.0;
    for (int i = 0; i < n; ++i) diag += (k & site_bit(n, i)) ? -net.field : net.field;
    h(k, k) = diag;
    for (int i = 0; i < n; ++i) {
      h(k ^ site_bit(n, i), k) += drive;
      for (int j = i + 1; j < n; ++j)
        h(k ^ site_bit(n, i) ^ site_bit(n, j), k) += net.couplings(i, j);
    }
  }
  return h;
}

inline ComplexMatrix hamiltonian(const SpinNetwork& net) {
  return real_hamiltonian(net, 0.0).cast<Complex>();
}

inline ComplexMatrix driven_hamiltonian(const SpinNetwork& net, double s) {
  require(s >= 0.0 && s <= 1.0, ErrorCode::invalid_argument, "input s must be in [0, 1]");
  return real_hamiltonian(net, net.field * (s + 1.0)).cast<Complex>();
}

// all qubits in |0>
inline DensityMatrix ground_state(int n_qubits) {
  const std::size_t dim = std::size_t{1} << n_qubits;
  DensityMatrix rho = DensityMatrix::Zero(dim, dim);
  rho(0, 0) = 1.0;
  return rho;
}

// |psi_s> = sqrt(1 - s)|0> + sqrt(s)|1>
inline ComplexVector injection_vector(double s) {
  require(s >= 0.0 && s <= 1.0, ErrorCode::invalid_argument, "input s must be in [0, 1]");
  ComplexVector psi(2);
  psi << std::sqrt(1.0 - s), std::sqrt(s);
  return psi;
}

inline double injection_angle(double s) {
  require(s >= 0.0 && s <= 1.0, ErrorCode::invalid_argument, "input s must be in [0, 1]");
  return std::acos(std::sqrt(1.0 - s));
}

struct DensityReport {
  double trace_error = 0.0;
  double hermiticity_error = 0.0;
  double min_eigenvalue = 0.0;
};

inline DensityReport check_density(const DensityMatrix& rho) {
  require(rho.rows() == rho.cols(), ErrorCode::dimension_mismatch, "density matrix not square");
  DensityReport r;
  r.trace_error = std::abs(rho.trace() - Complex(1.0));
  r.hermiticity_error = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
  const ComplexMatrix sym = 0.5 * (rho + rho.adjoint());
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(sym, Eigen::EigenvaluesOnly);
  r.min_eigenvalue = es.eigenvalues().minCoeff();
  return r;
}

// Textbook GKLS right-hand side with uniform loss rate.
inline ComplexMatrix gkls_rhs(const DensityMatrix& rho, const ComplexMatrix& h, double gamma) {
  require(rho.rows() == h.rows() && rho.cols() == h.cols(), ErrorCode::dimension_mismatch,
          "gkls_rhs: shape mismatch");
  require(gamma >= 0.0, ErrorCode::invalid_argument, "gamma must be >= 0");
  const int n = log2_exact(static_cast<std::size_t>(rho.rows()));
  ComplexMatrix out = -kI * (h * rho - rho * h);
  if (gamma == 0.0) return out;
  for (int i = 0; i < n; ++i) {
    const ComplexMatrix l = embed(sigma_minus(), i, n);
    const ComplexMatrix ll = l.adjoint() * l;
    out += gamma * (l * rho * l.adjoint() - 0.5 * (ll * rho + rho * ll));
  }
  return out;
}

// Column-stacked generator: vec(L(rho)) = liouvillian * vec(rho).
inline ComplexMatrix build_liouvillian(const ComplexMatrix& h, const std::vector<double>& gammas) {
  const auto dim = h.rows();
  const int n = log2_exact(static_cast<std::size_t>(dim));
  require(static_cast<int>(gammas.size()) == n, ErrorCode::dimension_mismatch,
          "one loss rate per site expected");
  const ComplexMatrix id = ComplexMatrix::Identity(dim, dim);
  ComplexMatrix l = -kI * kron(id, h) + kI * kron(h.transpose(), id);
  for (int i = 0; i < n; ++i) {
    if (gammas[i] == 0.0) continue;
    require(gammas[i] > 0.0, ErrorCode::invalid_argument, "loss rates must be >= 0");
    const ComplexMatrix op = embed(sigma_minus(), i, n);
    const ComplexMatrix ll = op.adjoint() * op;
    l += gammas[i] * (kron(op.conjugate(), op) - 0.5 * kron(id, ll) -
                      0.5 * kron(ll.transpose(), id));
  }
  return l;
}

inline ComplexMatrix build_liouvillian(const SpinNetwork& net, double gamma, double s) {
  require(gamma >= 0.0, ErrorCode::invalid_argument, "gamma must be >= 0");
  return build_liouvillian(driven_hamiltonian(net, s), std::vector<double>(net.n_qubits, gamma));
}

// rho = re + i im with re symmetric and im antisymmetric.
struct SplitState {
  RealMatrix re;
  RealMatrix im;

  static SplitState from(const ComplexMatrix& rho) { return {rho.real(), rho.imag()}; }
  ComplexMatrix to_complex() const {
    ComplexMatrix out(re.rows(), re.cols());
    out.real() = re;
    out.imag() = im;
    return out;
  }
  double norm() const { return std::sqrt(re.squaredNorm() + im.squaredNorm()); }
};

// Fast GKLS generator for a real symmetric Hamiltonian. The anticommutator
// part folds into K = H - (i/2) sum_i gamma_i n_i with n_i = |0><0|_i, so
// L(rho) = -i K rho + (-i K rho)^dagger + sum_i gamma_i sigma^-_i rho sigma^+_i
// for Hermitian rho.
class LindbladGenerator {
 public:
  LindbladGenerator(RealMatrix hamiltonian, std::vector<double> gammas)
      : h_(std::move(hamiltonian)), gammas_(std::move(gammas)) {
    require(h_.rows() == h_.cols(), ErrorCode::dimension_mismatch, "Hamiltonian not square");
    n_ = log2_exact(static_cast<std::size_t>(h_.rows()));
    require(static_cast<int>(gammas_.size()) == n_, ErrorCode::dimension_mismatch,
            "one loss rate per site expected");
    const auto dim = h_.rows();
    damping_ = RealVector::Zero(dim);
    for (int i = 0; i < n_; ++i) {
      require(gammas_[i] >= 0.0 && std::isfinite(gammas_[i]), ErrorCode::invalid_argument,
              "loss rates must be finite and >= 0");
      for (Eigen::Index k = 0; k < dim; ++k)
        if (!(static_cast<std::size_t>(k) & site_bit(n_, i))) damping_(k) += 0.5 * gammas_[i];
      total_rate_ += gammas_[i];
      if (gammas_[i] == 0.0) continue;
      jumps_.push_back({site_bit(n_, i), gammas_[i]});
    }
    damping_sum_ = damping_.replicate(1, dim) + damping_.transpose().replicate(dim, 1);
    Eigen::SelfAdjointEigenSolver<RealMatrix> es(h_, Eigen::EigenvaluesOnly);
    spread_ = es.eigenvalues().maxCoeff() - es.eigenvalues().minCoeff();
    c_re_.resize(dim, dim);
    c_im_.resize(dim, dim);
  }

  int n_qubits() const { return n_; }
  Eigen::Index dim() const { return h_.rows(); }
  double energy_spread() const { return spread_; }
  double total_rate() const { return total_rate_; }

  void apply(const SplitState& in, SplitState& out) {
    // With rho = A + iB, K = H - iD and H, A symmetric, B antisymmetric:
    //   Re L = HB + (HB)^T - (d_a + d_b) A_ab
    //   Im L = (HA)^T - HA - (d_a + d_b) B_ab
    c_re_.noalias() = h_ * in.im;
    c_im_.noalias() = h_ * in.re;
    out.re = c_re_ + c_re_.transpose() - damping_sum_.cwiseProduct(in.re);
    out.im = c_im_.transpose() - c_im_ - damping_sum_.cwiseProduct(in.im);
    const Eigen::Index dim = h_.rows();
    const double* a_in = in.re.data();
    const double* b_in = in.im.data();
    double* re = out.re.data();
    double* im = out.im.data();
    for (const auto& [bit, g] : jumps_) {
      // rows and columns with the bit set come in runs of length `bit`
      const auto run = static_cast<Eigen::Index>(bit);
      for (Eigen::Index cb = run; cb < dim; cb += 2 * run)
        for (Eigen::Index b = cb; b < cb + run; ++b) {
          const Eigen::Index dst = b * dim, src = (b - run) * dim;
          for (Eigen::Index ra = run; ra < dim; ra += 2 * run)
            for (Eigen::Index a = ra; a < ra + run; ++a) {
              re[dst + a] += g * a_in[src + a - run];
              im[dst + a] += g * b_in[src + a - run];
            }
        }
    }
  }

  ComplexMatrix apply(const ComplexMatrix& rho) {
    SplitState out{RealMatrix(dim(), dim()), RealMatrix(dim(), dim())};
    apply(SplitState::from(rho), out);
    return out.to_complex();
  }

 private:
  struct Jump {
    std::size_t bit;
    double rate;
  };

  RealMatrix h_;
  std::vector<double> gammas_;
  std::vector<Jump> jumps_;
  RealVector damping_;
  RealMatrix damping_sum_;  // d_a + d_b
  int n_ = 0;
  double spread_ = 0.0;
  double total_rate_ = 0.0;
  RealMatrix c_re_, c_im_;
};

// J_0(z) .. J_kmax(z) by Miller's backward recurrence normalised with
// J_0 + 2 sum_k J_2k = 1.
inline std::vector<double> bessel_j_sequence(double z, int kmax) {
  require(z >= 0.0 && std::isfinite(z), ErrorCode::invalid_argument, "bessel: z must be >= 0");
  require(kmax >= 0, ErrorCode::invalid_argument, "bessel: kmax must be >= 0");
  std::vector<double> j(static_cast<std::size_t>(kmax) + 1, 0.0);
  if (z == 0.0) {
    j[0] = 1.0;
    return j;
  }
  const int top = std::max(kmax, static_cast<int>(std::ceil(z))) +
                  static_cast<int>(std::ceil(std::sqrt(40.0 * (std::max(kmax, 1) + z)))) + 20;
  const int start = top + (top & 1);
  double next = 0.0, cur = 1e-300, norm = 0.0;
  std::vector<double> buf(static_cast<std::size_t>(start) + 1, 0.0);
  buf[start] = cur;
  for (int k = start; k >= 1; --k) {
    const double prev = (2.0 * k / z) * cur - next;
    next = cur;
    cur = prev;
    buf[k - 1] = cur;
    if (std::abs(cur) > 1e250) {
      for (int m = k - 1; m <= start; ++m) buf[m] *= 1e-250;
      next *= 1e-250;
      cur *= 1e-250;
    }
  }
  norm = buf[0];
  for (int k = 2; k <= start; k += 2) norm += 2.0 * buf[k];
  for (int k = 0; k <= kmax; ++k) j[k] = buf[k] / norm;
  return j;
}

// exp(t L) rho through a Chebyshev-Bessel expansion of the shifted,
// rescaled generator Y = (L - c)/R:
//   exp(t L) = exp(c t) sum_k eps_k J_k(R t) P_k(Y),
//   P_0 = 1, P_1 = Y, P_{k+1} = 2 Y P_k + P_{k-1}.
// With c = -a/2 (a = total loss rate) and R = spread(H) + a/2 the spectrum of
// Y sits inside the region where the series converges fast. The real
// recurrence keeps every iterate Hermitian.
class ChebyshevPropagator {
 public:
  explicit ChebyshevPropagator(LindbladGenerator generator, double tolerance = 1e-13)
      : gen_(std::move(generator)), tol_(tolerance) {
    const double a = gen_.total_rate();
    shift_ = -0.5 * a;
    radius_ = gen_.energy_spread() + 0.5 * a;
    const auto dim = gen_.dim();
    for (auto* s : {&v0_, &v1_, &v2_, &acc_, &tmp_}) {
      s->re.resize(dim, dim);
      s->im.resize(dim, dim);
    }
  }

  LindbladGenerator& generator() { return gen_; }

  void advance(SplitState& state, double t) {
    require(t >= 0.0 && std::isfinite(t), ErrorCode::invalid_argument,
            "propagation time must be finite and >= 0");
    if (t == 0.0 || radius_ == 0.0) return;
    prepare(t);
    for (int step = 0; step < cache_.substeps; ++step) substep(state);
  }

  // number of generator applications in the last advance()
  long applications() const { return applications_; }

 private:
  struct Plan {
    double t = -1.0;
    int substeps = 0;
    double decay = 1.0;
    std::vector<double> coeffs;
    double z = 0.0;
  };

  void prepare(double t) {
    applications_ = 0;
    if (cache_.t == t) return;
    const double a = gen_.total_rate();
    Plan p;
    p.t = t;
    p.substeps = std::max(1, static_cast<int>(std::ceil(a * t / 20.0)));
    const double delta = t / p.substeps;
    p.z = radius_ * delta;
    p.decay = std::exp(shift_ * delta);
    const int kmax = static_cast<int>(std::ceil(p.z + 12.0 * std::cbrt(p.z) + 40.0));
    p.coeffs = bessel_j_sequence(p.z, kmax);
    for (std::size_t k = 1; k < p.coeffs.size(); ++k) p.coeffs[k] *= 2.0;
    cache_ = std::move(p);
  }

  void apply_y(const SplitState& in, SplitState& out) {
    gen_.apply(in, out);
    ++applications_;
    const double inv = 1.0 / radius_;
    out.re = (out.re - shift_ * in.re) * inv;
    out.im = (out.im - shift_ * in.im) * inv;
  }

  void substep(SplitState& state) {
    const auto& c = cache_.coeffs;
    v0_.re = state.re;
    v0_.im = state.im;
    acc_.re = c[0] * v0_.re;
    acc_.im = c[0] * v0_.im;
    if (c.size() > 1) {
      apply_y(v0_, v1_);
      acc_.re += c[1] * v1_.re;
      acc_.im += c[1] * v1_.im;
    }
    int small = 0;
    bool converged = c.size() <= 2;
    for (std::size_t k = 2; k < c.size(); ++k) {
      apply_y(v1_, tmp_);
      v2_.re = 2.0 * tmp_.re + v0_.re;
      v2_.im = 2.0 * tmp_.im + v0_.im;
      acc_.re += c[k] * v2_.re;
      acc_.im += c[k] * v2_.im;
      std::swap(v0_, v1_);
      std::swap(v1_, v2_);
      if (static_cast<double>(k) > cache_.z) {
        const double term = std::abs(c[k]) * v1_.norm();
        small = term <= tol_ * acc_.norm() ? small + 1 : 0;
        if (small >= 2) {
          converged = true;
          break;
        }
      }
    }
    require(converged, ErrorCode::propagation_failure,
            "Chebyshev expansion did not converge within the coefficient budget");
    state.re = cache_.decay * acc_.re;
    state.im = cache_.decay * acc_.im;
    require(state.re.allFinite() && state.im.allFinite(), ErrorCode::propagation_failure,
            "non-finite state during propagation");
  }

  LindbladGenerator gen_;
  double tol_;
  double shift_ = 0.0;
  double radius_ = 0.0;
  Plan cache_;
  long applications_ = 0;
  SplitState v0_, v1_, v2_, acc_, tmp_;
};

enum class Integrator { rk4, chebyshev };

struct CdParams {
  SpinNetwork network;
  double gamma = 0.0;
};

struct PropagationOptions {
  Integrator integrator = Integrator::rk4;
  // local error target for the RK4 step rule
  double tolerance = 1e-10;
  // forces a fixed RK4 substep count per unit record interval when > 0
  int rk4_substeps = 0;
};

// Number of RK4 substeps over an interval of length dt so that the global
// error stays near `tolerance`. omega bounds the generator spectrum.
inline long rk4_substeps(double dt, double omega, double tolerance) {
  if (dt <= 0.0) return 0;
  const double x = dt * omega;
  if (x == 0.0) return 200;
  // per-step error (omega h)^5 / 120 accumulated over dt / h steps
  const double theta = std::pow(120.0 * tolerance / x, 0.25);
  return std::max<long>(200, static_cast<long>(std::ceil(x / std::min(theta, 1.0))));
}

namespace detail {

inline void rk4_advance(LindbladGenerator& gen, SplitState& state, double t, long steps) {
  const double dt = t / static_cast<double>(steps);
  const auto dim = gen.dim();
  SplitState k1{RealMatrix(dim, dim), RealMatrix(dim, dim)}, k2 = k1, k3 = k1, k4 = k1, y = k1;
  for (long i = 0; i < steps; ++i) {
    gen.apply(state, k1);
    y.re = state.re + 0.5 * dt * k1.re;
    y.im = state.im + 0.5 * dt * k1.im;
    gen.apply(y, k2);
    y.re = state.re + 0.5 * dt * k2.re;
    y.im = state.im + 0.5 * dt * k2.im;
    gen.apply(y, k3);
    y.re = state.re + dt * k3.re;
    y.im = state.im + dt * k3.im;
    gen.apply(y, k4);
    state.re += (dt / 6.0) * (k1.re + 2.0 * k2.re + 2.0 * k3.re + k4.re);
    state.im += (dt / 6.0) * (k1.im + 2.0 * k2.im + 2.0 * k3.im + k4.im);
  }
  require(state.re.allFinite() && state.im.allFinite(), ErrorCode::propagation_failure,
          "non-finite state during RK4 propagation");
}

inline void validate_record_times(std::span<const double> times) {
  require(!times.empty(), ErrorCode::invalid_argument, "record_times must not be empty");
  double prev = 0.0;
  for (double t : times) {
    require(std::isfinite(t) && t > prev, ErrorCode::invalid_argument,
            "record_times must be strictly increasing and positive");
    prev = t;
  }
}

}  // namespace detail

// Evolves rho under the input-held generator and returns the states at
// record_times (measured from the start of the interval).
inline std::vector<DensityMatrix> propagate_cd(const DensityMatrix& rho, const CdParams& p,
                                               double s, std::span<const double> record_times,
                                               const PropagationOptions& options = {}) {
  p.network.validate();
  require(p.gamma >= 0.0 && std::isfinite(p.gamma), ErrorCode::invalid_argument,
          "gamma must be finite and >= 0");
  require(s >= 0.0 && s <= 1.0, ErrorCode::invalid_argument, "input s must be in [0, 1]");
  require(rho.rows() == static_cast<Eigen::Index>(p.network.dim()) && rho.cols() == rho.rows(),
          ErrorCode::dimension_mismatch, "state dimension does not match the network");
  detail::validate_record_times(record_times);

  LindbladGenerator gen(real_hamiltonian(p.network, p.network.field * (s + 1.0)),
                        std::vector<double>(p.network.n_qubits, p.gamma));
  SplitState state = SplitState::from(rho);
  std::vector<DensityMatrix> out;
  out.reserve(record_times.size());
  double now = 0.0;
  if (options.integrator == Integrator::rk4) {
    const double total = record_times.back();
    const double omega = gen.energy_spread() + gen.total_rate();
    const long budget = options.rk4_substeps > 0
                            ? static_cast<long>(options.rk4_substeps)
                            : rk4_substeps(total, omega, options.tolerance);
    for (double t : record_times) {
      const long steps = std::max<long>(
          1, static_cast<long>(std::ceil(static_cast<double>(budget) * (t - now) / total)));
      detail::rk4_advance(gen, state, t - now, steps);
      now = t;
      out.push_back(state.to_complex());
    }
  } else {
    ChebyshevPropagator prop(std::move(gen));
    for (double t : record_times) {
      prop.advance(state, t - now);
      now = t;
      out.push_back(state.to_complex());
    }
  }
  return out;
}

// |psi_s><psi_s| (x) Tr_1(rho)
inline DensityMatrix inject(const DensityMatrix& rho, double s) {
  const ComplexVector psi = injection_vector(s);
  return kron(ComplexMatrix(psi * psi.adjoint()), partial_trace_first(rho));
}

struct FnParams {
  SpinNetwork network;
  double dt = 0.0;
};

// Cached unitaries exp(-i H t_k) for the FN model's record times.
class FnUnitaries {
 public:
  FnUnitaries(const FnParams& p, std::span<const double> record_times) {
    p.network.validate();
    require(p.dt >= 0.0 && std::isfinite(p.dt), ErrorCode::invalid_argument,
            "dt must be finite and >= 0");
    require(!record_times.empty(), ErrorCode::invalid_argument, "record_times must not be empty");
    const ComplexMatrix h = hamiltonian(p.network);
    double prev = -1.0;
    for (double t : record_times) {
      require(t >= 0.0 && t <= p.dt + 1e-12 && t > prev, ErrorCode::invalid_argument,
              "record_times must be increasing within [0, dt]");
      prev = t;
      unitaries_.push_back(unitary_propagator(h, t));
    }
  }

  const std::vector<ComplexMatrix>& unitaries() const { return unitaries_; }

 private:
  std::vector<ComplexMatrix> unitaries_;
};

// Erase-and-write step: replace qubit 1 by |psi_s>, then evolve unitarily and
// return the state at each cached record time.
inline std::vector<DensityMatrix> fn_step(const DensityMatrix& rho, double s,
                                          const FnUnitaries& cache) {
  const DensityMatrix injected = inject(rho, s);
  std::vector<DensityMatrix> out;
  out.reserve(cache.unitaries().size());
  for (const auto& u : cache.unitaries()) {
    require(u.rows() == injected.rows(), ErrorCode::dimension_mismatch,
            "unitary cache does not match the state dimension");
    out.push_back(u * injected * u.adjoint());
  }
  return out;
}

struct FnApproxParams {
  SpinNetwork network;
  double dt = 0.0;            // unitary part
  double gamma_first = 0.0;   // loss rate on qubit 1 during the dissipative stage
  double dt_dissipate = 0.0;  // duration of the dissipative stage
};

// Single-qubit rotation carrying the loss fixed point |1> onto |psi_s>.
// With theta = arccos(sqrt(1 - s)) it is [[sin, cos], [-cos, sin]].
inline ComplexMatrix injection_rotation(double s) {
  const double theta = injection_angle(s);
  ComplexMatrix r(2, 2);
  r << std::sin(theta), std::cos(theta), -std::cos(theta), std::sin(theta);
  return r;
}

// Amplitude damping of qubit 1 for gamma_first * dt_dissipate, followed by
// the input rotation on qubit 1. The damping uses its closed-form Kraus map.
inline DensityMatrix fn_approx_step(const DensityMatrix& rho, const FnApproxParams& p, double s) {
  require(p.gamma_first >= 0.0 && p.dt_dissipate >= 0.0, ErrorCode::invalid_argument,
          "dissipative stage needs gamma_first >= 0 and dt_dissipate >= 0");
  const int n = log2_exact(static_cast<std::size_t>(rho.rows()));
  const double keep = std::exp(-p.gamma_first * p.dt_dissipate);
  ComplexMatrix k0 = ComplexMatrix::Zero(2, 2);
  k0(0, 0) = std::sqrt(keep);
  k0(1, 1) = 1.0;
  ComplexMatrix k1 = ComplexMatrix::Zero(2, 2);
  k1(1, 0) = std::sqrt(1.0 - keep);
  const ComplexMatrix e0 = embed(k0, 0, n), e1 = embed(k1, 0, n);
  const ComplexMatrix damped = e0 * rho * e0.adjoint() + e1 * rho * e1.adjoint();
  const ComplexMatrix r = embed(injection_rotation(s), 0, n);
  return r * damped * r.adjoint();
}

}  // namespace qrc
