#pragma once

// Reservoir engine: drives a spin network with an input sequence and
// collects Pauli-string expectation values as features.

#include <algorithm>
#include <array>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qrc/pauli.hpp"
#include "qrc/spin_dynamics.hpp"

namespace qrc {

enum class ModelKind { cd, fn, fn_approx };

inline std::string_view model_name(ModelKind m) {
  switch (m) {
    case ModelKind::cd: return "CD";
    case ModelKind::fn: return "FN";
    case ModelKind::fn_approx: return "FN_APPROX";
  }
  return "?";
}

inline ModelKind parse_model(std::string_view name) {
  if (name == "CD") return ModelKind::cd;
  if (name == "FN") return ModelKind::fn;
  if (name == "FN_APPROX") return ModelKind::fn_approx;
  throw Error(ErrorCode::config_error, "unknown model '" + std::string(name) + "'");
}

// Tr(P rho); a sizeable imaginary part means the state is corrupted.
inline double expectation(const DensityMatrix& rho, const PauliString& p) {
  require(rho.rows() == rho.cols() &&
              rho.rows() == static_cast<Eigen::Index>(std::size_t{1} << p.n_qubits()),
          ErrorCode::dimension_mismatch, "expectation: dimension mismatch");
  const Complex v = p.trace_with(rho);
  require(std::abs(v.imag()) <= 1e-10, ErrorCode::invariant_violation,
          "expectation value has imaginary part " + std::to_string(v.imag()));
  return v.real();
}

class ObservableSet {
 public:
  ObservableSet() = default;
  explicit ObservableSet(std::vector<PauliString> strings) : strings_(std::move(strings)) {
    require(!strings_.empty(), ErrorCode::invalid_argument, "observable set is empty");
    for (const auto& s : strings_)
      require(s.n_qubits() == strings_.front().n_qubits(), ErrorCode::dimension_mismatch,
              "observables act on different qubit counts");
  }

  // all X_i, Y_i, Z_i, then all same-letter pairs with i < j
  static ObservableSet standard(int n_qubits) {
    require(n_qubits >= 1, ErrorCode::invalid_argument, "n_qubits must be >= 1");
    constexpr std::array letters{PauliLetter::X, PauliLetter::Y, PauliLetter::Z};
    std::vector<PauliString> s;
    for (auto p : letters)
      for (int i = 0; i < n_qubits; ++i) s.push_back(PauliString::single(n_qubits, i, p));
    for (auto p : letters)
      for (int i = 0; i < n_qubits; ++i)
        for (int j = i + 1; j < n_qubits; ++j) s.push_back(PauliString::pair(n_qubits, i, p, j, p));
    return ObservableSet(std::move(s));
  }

  std::size_t size() const { return strings_.size(); }
  int n_qubits() const { return strings_.empty() ? 0 : strings_.front().n_qubits(); }
  const std::vector<PauliString>& strings() const { return strings_; }

  void evaluate(const DensityMatrix& rho, double* out) const {
    for (std::size_t k = 0; k < strings_.size(); ++k) out[k] = expectation(rho, strings_[k]);
  }

 private:
  std::vector<PauliString> strings_;
};

struct MultiplexConfig {
  int virtual_nodes = 1;
  int spatial_copies = 1;
};

struct SamplingConfig {
  std::optional<double> n_samples;  // empty means ideal expectations
  std::uint64_t noise_seed = 0;
};

struct ReservoirSpec {
  ModelKind model = ModelKind::cd;
  SpinNetwork network;
  double dt = 1.0;
  double gamma = 0.0;         // CD loss rate on every site
  double gamma_first = 0.0;   // FN-approx dissipative stage
  double dt_dissipate = 0.0;  // FN-approx dissipative stage
  Integrator integrator = Integrator::chebyshev;

  void validate() const {
    network.validate();
    require(std::isfinite(dt) && dt >= 0.0, ErrorCode::invalid_argument, "dt must be >= 0");
    require(model != ModelKind::cd || dt > 0.0, ErrorCode::invalid_argument,
            "CD model needs dt > 0");
    require(std::isfinite(gamma) && gamma >= 0.0, ErrorCode::invalid_argument,
            "gamma must be >= 0");
    require(gamma_first >= 0.0 && dt_dissipate >= 0.0, ErrorCode::invalid_argument,
            "FN-approx parameters must be >= 0");
  }
};

// One physical reservoir. Each step consumes one input value and emits
// virtual_nodes * |observables| features, recorded at k dt / V, k = 1..V.
class Reservoir {
 public:
  Reservoir(ReservoirSpec spec, int virtual_nodes, ObservableSet observables)
      : spec_(std::move(spec)), v_(virtual_nodes), obs_(std::move(observables)) {
    spec_.validate();
    require(v_ >= 1, ErrorCode::invalid_argument, "virtual_nodes must be >= 1");
    require(obs_.n_qubits() == spec_.network.n_qubits, ErrorCode::dimension_mismatch,
            "observables do not match the network size");
    if (spec_.model != ModelKind::cd) {
      require(spec_.dt > 0.0 || v_ == 1, ErrorCode::invalid_argument,
              "dt = 0 allows a single record time only");
      std::vector<double> times;
      for (int k = 1; k <= v_; ++k) times.push_back(spec_.dt * k / v_);
      unitaries_.emplace(FnParams{spec_.network, spec_.dt}, times);
    }
    reset();
  }

  const ReservoirSpec& spec() const { return spec_; }
  int virtual_nodes() const { return v_; }
  std::size_t feature_count() const { return static_cast<std::size_t>(v_) * obs_.size(); }

  void reset() { set_state(ground_state(spec_.network.n_qubits)); }

  void set_state(const DensityMatrix& rho) {
    require(rho.rows() == static_cast<Eigen::Index>(spec_.network.dim()) &&
                rho.cols() == rho.rows(),
            ErrorCode::dimension_mismatch, "state does not match the network");
    rho_ = rho;
    split_ = SplitState::from(rho);
  }

  const DensityMatrix& state() const { return rho_; }

  void step(double s, std::span<double> features) {
    require(s >= 0.0 && s <= 1.0, ErrorCode::invalid_argument,
            "input s must be in [0, 1], got " + std::to_string(s));
    require(features.size() >= feature_count(), ErrorCode::dimension_mismatch,
            "feature buffer too small");
    switch (spec_.model) {
      case ModelKind::cd: step_cd(s, features); break;
      case ModelKind::fn: step_unitary(inject(rho_, s), features); break;
      case ModelKind::fn_approx:
        step_unitary(fn_approx_step(rho_, FnApproxParams{spec_.network, spec_.dt,
                                                         spec_.gamma_first, spec_.dt_dissipate},
                                    s),
                     features);
        break;
    }
  }

 private:
  void step_cd(double s, std::span<double> features) {
    const auto& net = spec_.network;
    LindbladGenerator gen(real_hamiltonian(net, net.field * (s + 1.0)),
                          std::vector<double>(net.n_qubits, spec_.gamma));
    const double interval = spec_.dt / v_;
    if (spec_.integrator == Integrator::chebyshev) {
      ChebyshevPropagator prop(std::move(gen));
      for (int k = 0; k < v_; ++k) {
        prop.advance(split_, interval);
        record(k, features);
      }
    } else {
      const long total =
          rk4_substeps(spec_.dt, gen.energy_spread() + gen.total_rate(), 1e-10);
      const long per = std::max<long>(1, (total + v_ - 1) / v_);
      for (int k = 0; k < v_; ++k) {
        detail::rk4_advance(gen, split_, interval, per);
        record(k, features);
      }
    }
  }

  void record(int k, std::span<double> features) {
    rho_ = split_.to_complex();
    obs_.evaluate(rho_, features.data() + static_cast<std::size_t>(k) * obs_.size());
  }

  void step_unitary(const DensityMatrix& injected, std::span<double> features) {
    const auto& us = unitaries_->unitaries();
    for (int k = 0; k < v_; ++k) {
      rho_ = us[k] * injected * us[k].adjoint();
      obs_.evaluate(rho_, features.data() + static_cast<std::size_t>(k) * obs_.size());
    }
    split_ = SplitState::from(rho_);
  }

  ReservoirSpec spec_;
  int v_;
  ObservableSet obs_;
  DensityMatrix rho_;
  SplitState split_;
  std::optional<FnUnitaries> unitaries_;
};

// Rows are time steps; the last column is the bias (all ones).
struct FeatureMatrix {
  RealMatrix values;
  std::vector<std::string> labels;

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }
};

inline std::vector<std::string> feature_labels(const ObservableSet& obs, int virtual_nodes,
                                               int copies) {
  std::vector<std::string> labels;
  for (int c = 1; c <= copies; ++c)
    for (int v = 1; v <= virtual_nodes; ++v)
      for (const auto& p : obs.strings()) {
        std::string l = p.label();
        if (virtual_nodes > 1) l += "@v" + std::to_string(v);
        if (copies > 1) l += "@c" + std::to_string(c);
        labels.push_back(std::move(l));
      }
  labels.emplace_back("bias");
  return labels;
}

// Spatially multiplexed reservoirs fed with the same input.
class ReservoirBank {
 public:
  ReservoirBank(const std::vector<ReservoirSpec>& copies, int virtual_nodes,
                const ObservableSet& obs) {
    require(!copies.empty(), ErrorCode::invalid_argument, "at least one reservoir copy needed");
    for (const auto& spec : copies) members_.emplace_back(spec, virtual_nodes, obs);
    labels_ = feature_labels(obs, virtual_nodes, static_cast<int>(copies.size()));
  }

  std::size_t width() const { return labels_.size(); }  // including bias
  const std::vector<std::string>& labels() const { return labels_; }
  std::vector<Reservoir>& members() { return members_; }

  void reset() {
    for (auto& m : members_) m.reset();
  }

  void step(double s, std::span<double> row) {
    require(row.size() == width(), ErrorCode::dimension_mismatch, "row size mismatch");
    std::size_t offset = 0;
    for (auto& m : members_) {
      m.step(s, row.subspan(offset, m.feature_count()));
      offset += m.feature_count();
    }
    row[offset] = 1.0;
  }

 private:
  std::vector<Reservoir> members_;
  std::vector<std::string> labels_;
};

inline FeatureMatrix run_reservoir(ReservoirBank& bank, std::span<const double> inputs) {
  FeatureMatrix f;
  f.labels = bank.labels();
  // row-major scratch so each step writes a contiguous row
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows(
      static_cast<Eigen::Index>(inputs.size()), static_cast<Eigen::Index>(bank.width()));
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    try {
      bank.step(inputs[k], std::span<double>(rows.row(static_cast<Eigen::Index>(k)).data(),
                                             bank.width()));
    } catch (const Error& e) {
      throw Error(e.code(), "step " + std::to_string(k) + ": " + e.what());
    }
  }
  f.values = rows;
  return f;
}

inline FeatureMatrix run_reservoir(const std::vector<ReservoirSpec>& copies,
                                   std::span<const double> inputs, const ObservableSet& obs,
                                   const MultiplexConfig& mux = {}) {
  require(static_cast<int>(copies.size()) == mux.spatial_copies, ErrorCode::invalid_argument,
          "number of reservoir specs must equal spatial_copies");
  ReservoirBank bank(copies, mux.virtual_nodes, obs);
  return run_reservoir(bank, inputs);
}

inline FeatureMatrix apply_sampling_noise(FeatureMatrix f, const SamplingConfig& sc) {
  if (!sc.n_samples) return f;
  require(*sc.n_samples >= 1.0, ErrorCode::invalid_argument, "n_samples must be >= 1");
  std::mt19937_64 rng(sc.noise_seed);
  std::normal_distribution<double> noise(0.0, 1.0 / std::sqrt(*sc.n_samples));
  const Eigen::Index feature_cols = f.values.cols() - 1;
  for (Eigen::Index r = 0; r < f.values.rows(); ++r)
    for (Eigen::Index c = 0; c < feature_cols; ++c) f.values(r, c) += noise(rng);
  return f;
}

struct Segments {
  std::size_t washout = 1000;
  std::size_t train = 1000;
  std::size_t test = 1000;

  std::size_t total() const { return washout + train + test; }
};

struct RowRange {
  Eigen::Index begin = 0;
  Eigen::Index end = 0;

  Eigen::Index size() const { return end - begin; }
};

struct SegmentRanges {
  RowRange washout, train, test;
};

inline SegmentRanges segment(Eigen::Index rows, const Segments& s) {
  require(rows >= 0 && static_cast<std::size_t>(rows) >= s.total(),
          ErrorCode::invalid_argument,
          "run has " + std::to_string(rows) + " rows but segments need " +
              std::to_string(s.total()));
  const auto w = static_cast<Eigen::Index>(s.washout), tr = static_cast<Eigen::Index>(s.train),
             te = static_cast<Eigen::Index>(s.test);
  return {{0, w}, {w, w + tr}, {w + tr, w + tr + te}};
}

inline void write_feature_csv(const FeatureMatrix& f, const std::string& path) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorCode::io_error, "cannot open " + path);
  for (std::size_t c = 0; c < f.labels.size(); ++c) out << (c ? "," : "") << f.labels[c];
  out << "\n" << std::setprecision(17);
  for (Eigen::Index r = 0; r < f.values.rows(); ++r) {
    for (Eigen::Index c = 0; c < f.values.cols(); ++c) out << (c ? "," : "") << f.values(r, c);
    out << "\n";
  }
}

}  // namespace qrc
