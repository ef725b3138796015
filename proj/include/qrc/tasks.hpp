#pragma once

// Benchmark inputs and targets, and the closed-loop forecasting harness.
//
// Targets are aligned with the input index: the target at step k is what the
// readout should output after the reservoir has consumed s_k.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "qrc/readout.hpp"
#include "qrc/reservoir.hpp"

namespace qrc {

enum class TaskKind { stm, narma, parity, mackey_glass };

inline std::string_view task_name(TaskKind k) {
  switch (k) {
    case TaskKind::stm: return "STM";
    case TaskKind::narma: return "NARMA";
    case TaskKind::parity: return "PARITY";
    case TaskKind::mackey_glass: return "MACKEY_GLASS";
  }
  return "?";
}

inline TaskKind parse_task(std::string_view name) {
  if (name == "STM") return TaskKind::stm;
  if (name == "NARMA") return TaskKind::narma;
  if (name == "PARITY") return TaskKind::parity;
  if (name == "MACKEY_GLASS") return TaskKind::mackey_glass;
  throw Error(ErrorCode::config_error, "unknown task '" + std::string(name) + "'");
}

inline std::vector<double> gen_uniform_inputs(std::size_t len, std::uint64_t seed) {
  require(len >= 1, ErrorCode::invalid_argument, "input length must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> s(len);
  for (auto& x : s) x = u(rng);
  return s;
}

inline std::vector<double> gen_binary_inputs(std::size_t len, std::uint64_t seed) {
  require(len >= 1, ErrorCode::invalid_argument, "input length must be >= 1");
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution b(0.5);
  std::vector<double> s(len);
  for (auto& x : s) x = b(rng) ? 1.0 : 0.0;
  return s;
}

inline TargetSeries stm_targets(std::span<const double> s, std::size_t tau) {
  require(tau < s.size(), ErrorCode::invalid_argument, "delay must be shorter than the input");
  TargetSeries y(s.size());
  for (std::size_t k = tau; k < s.size(); ++k) y[k] = s[k - tau];
  return y;
}

// y_k = 0.3 y_{k-1} + 0.05 y_{k-1} sum_{j=1..n} y_{k-j} + 1.5 s'_{k-n} s'_{k-1} + 0.1
// with s' = 0.02 s and zero history. Index k here counts from 1 for the
// first target; the target for input index i (0-based) is y_{i+1}.
inline TargetSeries narma_targets(std::span<const double> s, std::size_t n) {
  require(n >= 1, ErrorCode::invalid_argument, "NARMA order must be >= 1");
  const std::size_t m = s.size();
  std::vector<double> y(m + 1, 0.0);  // y[0] is the zero history slot
  auto yk = [&](std::ptrdiff_t k) { return k >= 0 ? y[static_cast<std::size_t>(k)] : 0.0; };
  auto sp = [&](std::ptrdiff_t k) {  // s'_k for 1-based k
    return k >= 1 ? 0.02 * s[static_cast<std::size_t>(k - 1)] : 0.0;
  };
  TargetSeries out(m);
  for (std::size_t k = 1; k <= m; ++k) {
    const auto kk = static_cast<std::ptrdiff_t>(k);
    double window = 0.0;
    for (std::size_t j = 1; j <= n; ++j) window += yk(kk - static_cast<std::ptrdiff_t>(j));
    const double prev = yk(kk - 1);
    y[k] = 0.3 * prev + 0.05 * prev * window +
           1.5 * sp(kk - static_cast<std::ptrdiff_t>(n)) * sp(kk - 1) + 0.1;
    require(std::abs(y[k]) <= 10.0, ErrorCode::numerical_failure,
            "NARMA recursion diverged at step " + std::to_string(k));
    out[k - 1] = y[k];
  }
  return out;
}

// y_k = (s_{k-1} + ... + s_{k-tau}) mod 2
inline TargetSeries parity_targets(std::span<const double> s, std::size_t tau) {
  require(tau >= 1, ErrorCode::invalid_argument, "parity delay must be >= 1");
  require(tau < s.size(), ErrorCode::invalid_argument, "delay must be shorter than the input");
  for (double x : s)
    require(x == 0.0 || x == 1.0, ErrorCode::invalid_argument, "parity input must be binary");
  TargetSeries y(s.size());
  for (std::size_t k = tau; k < s.size(); ++k) {
    int acc = 0;
    for (std::size_t j = 1; j <= tau; ++j) acc += static_cast<int>(s[k - j]);
    y[k] = static_cast<double>(acc % 2);
  }
  return y;
}

inline TargetSeries one_step_targets(std::span<const double> s) {
  require(s.size() >= 2, ErrorCode::invalid_argument, "need at least two samples");
  TargetSeries y(s.size());
  for (std::size_t k = 0; k + 1 < s.size(); ++k) y[k] = s[k + 1];
  return y;
}

struct MackeyGlassConfig {
  double delay = 17.0;
  double sample_resolution = 3.0;
  double integration_step = 0.1;
  double transient_discard = 1000.0;
  double history_value = 1.1;
  double beta = 0.2;
  double decay = 0.1;
  double exponent = 10.0;
  // seeds pick a random start window of up to this many samples
  std::size_t max_offset_samples = 2000;

  void validate() const {
    require(delay > 0.0 && integration_step > 0.0 && sample_resolution > 0.0,
            ErrorCode::invalid_argument, "Mackey-Glass times must be positive");
    const double ratio = sample_resolution / integration_step;
    require(std::abs(ratio - std::round(ratio)) < 1e-9, ErrorCode::invalid_argument,
            "sample resolution must be a multiple of the integration step");
    require(transient_discard >= 0.0, ErrorCode::invalid_argument, "discard must be >= 0");
  }
};

// Raw (unscaled) samples of ds/dt = -decay s + beta s(t-delay) / (1 + s(t-delay)^exponent).
inline std::vector<double> mackey_glass_raw(const MackeyGlassConfig& cfg, std::size_t len,
                                            std::size_t offset_samples = 0) {
  cfg.validate();
  const double h = cfg.integration_step;
  const auto every = static_cast<std::size_t>(std::llround(cfg.sample_resolution / h));
  const auto skip = static_cast<std::size_t>(std::llround(cfg.transient_discard / h)) +
                    offset_samples * every;
  const std::size_t steps = skip + (len - 1) * every;
  std::vector<double> grid;
  grid.reserve(steps + 1);
  grid.push_back(cfg.history_value);

  // value at time t (t <= current time), constant history before 0
  auto at = [&](double t) {
    if (t <= 0.0) return cfg.history_value;
    const double x = t / h;
    const auto i = static_cast<std::ptrdiff_t>(std::floor(x));
    const double f = x - static_cast<double>(i);
    if (f < 1e-12) return grid[static_cast<std::size_t>(i)];
    auto g = [&](std::ptrdiff_t k) {
      return k < 0 ? cfg.history_value : grid[static_cast<std::size_t>(k)];
    };
    // four-point Lagrange interpolation on i-1 .. i+2
    const double a = g(i - 1), b = g(i), c = g(i + 1), d = g(i + 2);
    return -f * (f - 1.0) * (f - 2.0) / 6.0 * a + (f + 1.0) * (f - 1.0) * (f - 2.0) / 2.0 * b -
           (f + 1.0) * f * (f - 2.0) / 2.0 * c + (f + 1.0) * f * (f - 1.0) / 6.0 * d;
  };
  auto rhs = [&](double s, double delayed) {
    return -cfg.decay * s + cfg.beta * delayed / (1.0 + std::pow(delayed, cfg.exponent));
  };
  const auto lag = static_cast<std::size_t>(std::ceil(cfg.delay / h));
  require(lag >= 3, ErrorCode::invalid_argument,
          "delay must span at least three integration steps");
  for (std::size_t n = 0; n < steps; ++n) {
    const double t = static_cast<double>(n) * h;
    const double s = grid.back();
    const double d0 = at(t - cfg.delay), dh = at(t + 0.5 * h - cfg.delay),
                 d1 = at(t + h - cfg.delay);
    const double k1 = rhs(s, d0);
    const double k2 = rhs(s + 0.5 * h * k1, dh);
    const double k3 = rhs(s + 0.5 * h * k2, dh);
    const double k4 = rhs(s + h * k3, d1);
    const double next = s + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    require(std::isfinite(next) && std::abs(next) < 1e6, ErrorCode::numerical_failure,
            "Mackey-Glass integration became unstable");
    grid.push_back(next);
  }
  std::vector<double> out(len);
  for (std::size_t k = 0; k < len; ++k) out[k] = grid[skip + k * every];
  return out;
}

inline std::vector<double> mackey_glass_series(const MackeyGlassConfig& cfg, std::size_t len,
                                               std::uint64_t seed) {
  require(len >= 1, ErrorCode::invalid_argument, "series length must be >= 1");
  std::size_t offset = 0;
  if (seed != 0 && cfg.max_offset_samples > 0) {
    std::mt19937_64 rng(seed);
    offset = std::uniform_int_distribution<std::size_t>(0, cfg.max_offset_samples - 1)(rng);
  }
  std::vector<double> s = mackey_glass_raw(cfg, len, offset);
  const auto [lo, hi] = std::minmax_element(s.begin(), s.end());
  const double min = *lo, span = *hi - *lo;
  for (auto& x : s) x = span > 0.0 ? (x - min) / span : 0.0;
  return s;
}

struct RolloutResult {
  std::vector<double> predictions;
  std::size_t clamp_events = 0;
};

// Closed-loop forecasting. The first prediction comes from the primer row
// (features after the last training input); every later prediction is fed
// back, clamped to [0, 1], as the next input. A non-empty `teacher` replaces
// the fed-back value with teacher[k - 1] at step k.
inline RolloutResult autonomous_rollout(ReservoirBank& bank, const TrainedReadout& readout,
                                        std::span<const double> primer_row, std::size_t n_steps,
                                        std::span<const double> teacher = {}) {
  RolloutResult out;
  if (n_steps == 0) return out;
  require(teacher.empty() || teacher.size() + 1 >= n_steps, ErrorCode::invalid_argument,
          "teacher sequence too short");
  std::vector<double> row(primer_row.begin(), primer_row.end());
  out.predictions.reserve(n_steps);
  double p = predict_row(readout, row);
  for (std::size_t k = 0;; ++k) {
    require(std::isfinite(p), ErrorCode::numerical_failure,
            "rollout produced a non-finite prediction at step " + std::to_string(k));
    out.predictions.push_back(p);
    if (k + 1 == n_steps) break;
    double next = p;
    if (!teacher.empty()) {
      next = teacher[k];
    } else if (p < 0.0 || p > 1.0) {
      ++out.clamp_events;
      next = std::clamp(p, 0.0, 1.0);
    }
    bank.step(next, row);
    p = predict_row(readout, row);
  }
  return out;
}

}  // namespace qrc
