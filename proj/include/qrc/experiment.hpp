#pragma once

// Experiment orchestration: configuration, grid search over (h, dt, gamma)
// and coupling realizations, persistence of results, and plot tables.
//
// Streams are keyed by derive_seed:
//   couplings  derive_seed(master, "couplings", {realization, copy})
//   inputs     derive_seed(master, "inputs", {realization})
//   noise      derive_seed(master, "noise", {realization, grid_index})
// Couplings and inputs are shared by every grid point of a realization and
// by every model, so model comparisons are paired. The noise draw is also
// shared across shot counts; only its scale 1/sqrt(N_s) changes.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "qrc/analysis.hpp"
#include "qrc/readout.hpp"
#include "qrc/reservoir.hpp"
#include "qrc/seeding.hpp"
#include "qrc/tasks.hpp"

namespace qrc {

inline constexpr int kSchemaVersion = 1;
inline constexpr std::string_view kSoftwareVersion = "1.0.0";

using Json = nlohmann::json;

struct GridSpec {
  std::vector<double> h{0.01, 0.1, 1.0, 10.0};
  std::vector<double> dt{0.01, 0.1, 1.0, 10.0};
  std::vector<double> gamma{0.01, 0.1, 1.0, 10.0};  // ignored by the FN models
};

struct TaskSpec {
  TaskKind kind = TaskKind::stm;
  std::vector<std::size_t> params{1};  // delays (STM, parity) or orders (NARMA)
  Segments segments;
  std::size_t autonomous_steps = 150;  // Mackey-Glass only
  MackeyGlassConfig mackey_glass;
};

struct MixingSpec {
  std::vector<int> n_qubits{3, 4, 5};
  std::vector<double> h{0.01, 0.05, 0.1, 0.5, 1.0, 5.0, 10.0};
  std::vector<double> gamma{0.01, 0.1, 1.0, 10.0};
  double input = 0.0;
};

struct FnApproxCurveSpec {
  int n_qubits = 2;
  std::vector<double> gamma_dt{0.1, 0.316, 1.0, 3.16, 10.0, 31.6, 100.0};
  std::size_t pairs = 100;
};

struct EspSpec {
  std::size_t steps = 50;
};

struct SweepSpec {
  std::string parameter;  // "n_qubits"
  std::vector<double> values;
};

struct ExperimentConfig {
  int schema_version = kSchemaVersion;
  ModelKind model = ModelKind::cd;
  int n_qubits = 5;
  GridSpec grid;
  std::size_t n_realizations = 100;
  TaskSpec task;
  MultiplexConfig multiplex;
  std::vector<double> n_samples;  // shot counts evaluated besides the ideal features
  bool include_ideal = true;
  double gamma_first = 10.0;  // FN-approx dissipative stage
  double dt_dissipate = 1.0;
  Integrator integrator = Integrator::chebyshev;
  TrainOptions readout;
  std::uint64_t master_seed = 1;
  std::string output_dir = "results";
  unsigned workers = 0;  // 0 means hardware concurrency
  MixingSpec mixing;
  FnApproxCurveSpec fn_approx_curve;
  EspSpec esp;
  std::optional<SweepSpec> sweep;

  // the FN models have no loss-rate axis
  std::vector<double> gamma_axis() const {
    return model == ModelKind::cd ? grid.gamma : std::vector<double>{0.0};
  }

  void validate() const {
    auto fail = [](const std::string& m) { throw Error(ErrorCode::config_error, m); };
    if (schema_version != kSchemaVersion)
      fail("unsupported schema_version " + std::to_string(schema_version));
    if (n_qubits < 1 || n_qubits > kMaxQubits)
      fail("n_qubits must be in [1, " + std::to_string(kMaxQubits) + "]");
    if (n_realizations < 1) fail("n_realizations must be >= 1");
    auto positive = [&](const std::vector<double>& v, const char* name) {
      if (v.empty()) fail(std::string("grid.") + name + " is empty");
      for (double x : v)
        if (!(x > 0.0) || !std::isfinite(x)) fail(std::string("grid.") + name + " values must be > 0");
    };
    positive(grid.h, "h");
    positive(grid.dt, "dt");
    if (model == ModelKind::cd) positive(grid.gamma, "gamma");
    if (task.params.empty()) fail("task.params is empty");
    if (task.kind == TaskKind::narma || task.kind == TaskKind::parity)
      for (auto p : task.params)
        if (p < 1) fail("task.params must be >= 1 for this task");
    if (task.segments.train < 2 || task.segments.test < 2)
      fail("train and test segments need at least two steps");
    if (task.kind == TaskKind::mackey_glass) {
      if (task.autonomous_steps < 2) fail("task.autonomous_steps must be >= 2");
      if (!n_samples.empty()) fail("finite sampling is not supported for Mackey-Glass");
      task.mackey_glass.validate();
    } else {
      for (auto p : task.params)
        if (p >= task.segments.washout + task.segments.train)
          fail("task parameter exceeds the washout plus training length");
    }
    for (double ns : n_samples)
      if (!(ns >= 1.0)) fail("sampling.n_samples values must be >= 1");
    if (!include_ideal && n_samples.empty()) fail("nothing to evaluate: no ideal and no n_samples");
    if (multiplex.virtual_nodes < 1 || multiplex.spatial_copies < 1)
      fail("multiplex values must be >= 1");
    if (!(readout.rcond > 0.0) || readout.ridge < 0.0) fail("readout.rcond > 0 and ridge >= 0 required");
    if (gamma_first < 0.0 || dt_dissipate < 0.0) fail("fn_approx values must be >= 0");
    if (sweep && sweep->parameter != "n_qubits")
      fail("sweep.parameter must be \"n_qubits\"");
  }
};

namespace detail {

template <class T>
void read_field(const Json& obj, const char* key, T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::config_error, std::string("field '") + key + "': " + e.what());
  }
}

inline void check_keys(const Json& obj, std::initializer_list<std::string_view> allowed,
                       const std::string& where) {
  if (!obj.is_object()) throw Error(ErrorCode::config_error, where + " must be an object");
  for (const auto& [k, v] : obj.items())
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end())
      throw Error(ErrorCode::config_error, "unknown key '" + k + "' in " + where);
}

inline std::string integrator_name(Integrator i) {
  return i == Integrator::rk4 ? "rk4" : "chebyshev";
}

inline Integrator parse_integrator(const std::string& s) {
  if (s == "rk4") return Integrator::rk4;
  if (s == "chebyshev") return Integrator::chebyshev;
  throw Error(ErrorCode::config_error, "unknown integrator '" + s + "'");
}

}  // namespace detail

inline Json to_json(const ExperimentConfig& c) {
  const auto& mg = c.task.mackey_glass;
  Json j = {
      {"schema_version", c.schema_version},
      {"model", model_name(c.model)},
      {"n_qubits", c.n_qubits},
      {"grid", {{"h", c.grid.h}, {"dt", c.grid.dt}, {"gamma", c.grid.gamma}}},
      {"n_realizations", c.n_realizations},
      {"task",
       {{"kind", task_name(c.task.kind)},
        {"params", c.task.params},
        {"washout", c.task.segments.washout},
        {"train", c.task.segments.train},
        {"test", c.task.segments.test},
        {"autonomous_steps", c.task.autonomous_steps},
        {"mackey_glass",
         {{"delay", mg.delay},
          {"sample_resolution", mg.sample_resolution},
          {"integration_step", mg.integration_step},
          {"transient_discard", mg.transient_discard},
          {"history_value", mg.history_value},
          {"max_offset_samples", mg.max_offset_samples}}}}},
      {"multiplex",
       {{"virtual_nodes", c.multiplex.virtual_nodes},
        {"spatial_copies", c.multiplex.spatial_copies}}},
      {"sampling", {{"n_samples", c.n_samples}, {"include_ideal", c.include_ideal}}},
      {"fn_approx", {{"gamma_first", c.gamma_first}, {"dt_dissipate", c.dt_dissipate}}},
      {"integrator", detail::integrator_name(c.integrator)},
      {"readout", {{"rcond", c.readout.rcond}, {"ridge", c.readout.ridge}}},
      {"master_seed", c.master_seed},
      {"output_dir", c.output_dir},
      {"workers", c.workers},
      {"mixing",
       {{"n_qubits", c.mixing.n_qubits},
        {"h", c.mixing.h},
        {"gamma", c.mixing.gamma},
        {"input", c.mixing.input}}},
      {"fn_approx_curve",
       {{"n_qubits", c.fn_approx_curve.n_qubits},
        {"gamma_dt", c.fn_approx_curve.gamma_dt},
        {"pairs", c.fn_approx_curve.pairs}}},
      {"esp", {{"steps", c.esp.steps}}},
  };
  if (c.sweep) j["sweep"] = {{"parameter", c.sweep->parameter}, {"values", c.sweep->values}};
  return j;
}

// Accepts a bare config or a manifest written by ResultStore (key "config").
inline ExperimentConfig config_from_json(const Json& in) {
  using detail::check_keys;
  using detail::read_field;
  const Json& j = in.contains("config") && in.contains("software_version") ? in.at("config") : in;
  check_keys(j,
             {"schema_version", "model", "n_qubits", "grid", "n_realizations", "task", "multiplex",
              "sampling", "fn_approx", "integrator", "readout", "master_seed", "output_dir",
              "workers", "mixing", "fn_approx_curve", "esp", "sweep"},
             "config");
  if (!j.contains("schema_version"))
    throw Error(ErrorCode::config_error, "config is missing schema_version");
  ExperimentConfig c;
  read_field(j, "schema_version", c.schema_version);
  if (c.schema_version != kSchemaVersion)
    throw Error(ErrorCode::config_error,
                "unsupported schema_version " + std::to_string(c.schema_version));
  if (j.contains("model")) {
    std::string m;
    read_field(j, "model", m);
    try {
      c.model = parse_model(m);
    } catch (const Error& e) {
      throw Error(ErrorCode::config_error, e.what());
    }
  }
  read_field(j, "n_qubits", c.n_qubits);
  if (j.contains("grid")) {
    const auto& g = j.at("grid");
    check_keys(g, {"h", "dt", "gamma"}, "grid");
    read_field(g, "h", c.grid.h);
    read_field(g, "dt", c.grid.dt);
    read_field(g, "gamma", c.grid.gamma);
  }
  read_field(j, "n_realizations", c.n_realizations);
  if (j.contains("task")) {
    const auto& t = j.at("task");
    check_keys(t, {"kind", "params", "washout", "train", "test", "autonomous_steps", "mackey_glass"},
               "task");
    if (t.contains("kind")) c.task.kind = parse_task(t.at("kind").get<std::string>());
    read_field(t, "params", c.task.params);
    read_field(t, "washout", c.task.segments.washout);
    read_field(t, "train", c.task.segments.train);
    read_field(t, "test", c.task.segments.test);
    read_field(t, "autonomous_steps", c.task.autonomous_steps);
    if (t.contains("mackey_glass")) {
      const auto& m = t.at("mackey_glass");
      check_keys(m,
                 {"delay", "sample_resolution", "integration_step", "transient_discard",
                  "history_value", "max_offset_samples"},
                 "task.mackey_glass");
      auto& mg = c.task.mackey_glass;
      read_field(m, "delay", mg.delay);
      read_field(m, "sample_resolution", mg.sample_resolution);
      read_field(m, "integration_step", mg.integration_step);
      read_field(m, "transient_discard", mg.transient_discard);
      read_field(m, "history_value", mg.history_value);
      read_field(m, "max_offset_samples", mg.max_offset_samples);
    }
  }
  if (j.contains("multiplex")) {
    const auto& m = j.at("multiplex");
    check_keys(m, {"virtual_nodes", "spatial_copies"}, "multiplex");
    read_field(m, "virtual_nodes", c.multiplex.virtual_nodes);
    read_field(m, "spatial_copies", c.multiplex.spatial_copies);
  }
  if (j.contains("sampling")) {
    const auto& s = j.at("sampling");
    check_keys(s, {"n_samples", "include_ideal"}, "sampling");
    read_field(s, "n_samples", c.n_samples);
    read_field(s, "include_ideal", c.include_ideal);
  }
  if (j.contains("fn_approx")) {
    const auto& f = j.at("fn_approx");
    check_keys(f, {"gamma_first", "dt_dissipate"}, "fn_approx");
    read_field(f, "gamma_first", c.gamma_first);
    read_field(f, "dt_dissipate", c.dt_dissipate);
  }
  if (j.contains("integrator")) c.integrator = detail::parse_integrator(j.at("integrator").get<std::string>());
  if (j.contains("readout")) {
    const auto& r = j.at("readout");
    check_keys(r, {"rcond", "ridge"}, "readout");
    read_field(r, "rcond", c.readout.rcond);
    read_field(r, "ridge", c.readout.ridge);
  }
  read_field(j, "master_seed", c.master_seed);
  read_field(j, "output_dir", c.output_dir);
  read_field(j, "workers", c.workers);
  if (j.contains("mixing")) {
    const auto& m = j.at("mixing");
    check_keys(m, {"n_qubits", "h", "gamma", "input"}, "mixing");
    read_field(m, "n_qubits", c.mixing.n_qubits);
    read_field(m, "h", c.mixing.h);
    read_field(m, "gamma", c.mixing.gamma);
    read_field(m, "input", c.mixing.input);
  }
  if (j.contains("fn_approx_curve")) {
    const auto& f = j.at("fn_approx_curve");
    check_keys(f, {"n_qubits", "gamma_dt", "pairs"}, "fn_approx_curve");
    read_field(f, "n_qubits", c.fn_approx_curve.n_qubits);
    read_field(f, "gamma_dt", c.fn_approx_curve.gamma_dt);
    read_field(f, "pairs", c.fn_approx_curve.pairs);
  }
  if (j.contains("esp")) {
    check_keys(j.at("esp"), {"steps"}, "esp");
    read_field(j.at("esp"), "steps", c.esp.steps);
  }
  if (j.contains("sweep")) {
    const auto& s = j.at("sweep");
    check_keys(s, {"parameter", "values"}, "sweep");
    SweepSpec sw;
    read_field(s, "parameter", sw.parameter);
    read_field(s, "values", sw.values);
    c.sweep = sw;
  }
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::io_error, "cannot open config " + path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::config_error, "config " + path + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

struct GridPoint {
  double h = 0.0, dt = 0.0, gamma = 0.0;

  auto key() const { return std::tie(h, dt, gamma); }
};

inline std::vector<GridPoint> grid_points(const ExperimentConfig& c) {
  std::vector<GridPoint> out;
  for (double h : c.grid.h)
    for (double dt : c.grid.dt)
      for (double g : c.gamma_axis()) out.push_back({h, dt, g});
  return out;
}

// One metric for one (grid point, realization, task parameter, shot count).
struct CellRecord {
  std::size_t grid_index = 0;
  GridPoint point;
  std::size_t realization = 0;
  std::size_t param = 0;
  std::optional<double> n_samples;  // empty: ideal expectations
  double value = std::numeric_limits<double>::quiet_NaN();
  std::size_t clamp_events = 0;
  std::uint64_t coupling_seed = 0, input_seed = 0, noise_seed = 0;
  bool ok = false;
  std::string message;
};

struct SummaryRecord {
  std::size_t param = 0;
  std::optional<double> n_samples;
  std::size_t grid_index = 0;
  GridPoint point;
  double mean = std::numeric_limits<double>::quiet_NaN();
  double std = std::numeric_limits<double>::quiet_NaN();  // sample standard deviation
  std::size_t count = 0;
  std::size_t failed = 0;
  bool optimal = false;
};

struct RolloutRecord {
  std::size_t grid_index = 0;
  std::size_t realization = 0;
  std::size_t step = 0;
  double prediction = 0.0;
  double target = 0.0;
};

struct MixingRecord {
  int n_qubits = 0;
  double h = 0.0, gamma = 0.0;
  std::size_t realization = 0;
  double lambda1 = 0.0, eta = 0.0, tau = 0.0;
  bool near_defective = false;
  bool ok = false;
  std::string message;
};

inline std::string_view metric_name(TaskKind k) {
  return k == TaskKind::mackey_glass ? "mse" : "capacity";
}

inline bool higher_is_better(TaskKind k) { return k != TaskKind::mackey_glass; }

struct ResultStore {
  Json manifest;
  std::vector<CellRecord> cells;
  std::vector<SummaryRecord> summary;
  std::vector<RolloutRecord> rollouts;
  std::vector<MixingRecord> mixing;

  std::string kind() const { return manifest.value("kind", std::string("task")); }
};

namespace detail {

inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

inline double parse_double(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::io_error, "not a number: '" + s + "'");
  }
}

inline std::string format_samples(const std::optional<double>& ns) {
  return ns ? format_double(*ns) : "ideal";
}

inline std::optional<double> parse_samples(const std::string& s) {
  if (s == "ideal") return std::nullopt;
  return parse_double(s);
}

// keeps every CSV field free of separators
inline std::string sanitize(std::string s) {
  for (auto& ch : s)
    if (ch == ',' || ch == '\n' || ch == '\r') ch = ';';
  return s;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    require(it != header.end(), ErrorCode::io_error, "missing CSV column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  }
};

inline CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::io_error, "cannot open " + path.string());
  CsvTable t;
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCode::io_error,
          path.string() + " is empty");
  t.header = split_csv_line(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto row = split_csv_line(line);
    require(row.size() == t.header.size(), ErrorCode::io_error,
            "malformed row in " + path.string());
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorCode::io_error, "cannot write " + path.string());
  return out;
}

inline unsigned resolve_workers(unsigned requested) {
  if (requested > 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

// Runs job(i) for i in [0, n) on a pool. Each job writes only its own slot,
// so the merged output does not depend on scheduling.
inline void parallel_for(std::size_t n, unsigned workers, const std::function<void(std::size_t)>& job,
                         const std::function<void(std::size_t)>& on_done = {}) {
  workers = static_cast<unsigned>(std::min<std::size_t>(resolve_workers(workers), std::max<std::size_t>(n, 1)));
  std::atomic<std::size_t> next{0}, finished{0};
  std::mutex report;
  auto loop = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      job(i);
      const std::size_t done = ++finished;
      if (on_done) {
        std::lock_guard lock(report);
        on_done(done);
      }
    }
  };
  if (workers <= 1) {
    loop();
    return;
  }
  std::vector<std::jthread> pool;
  for (unsigned w = 0; w < workers; ++w) pool.emplace_back(loop);
}

}  // namespace detail

using ProgressFn = std::function<void(std::size_t done, std::size_t total)>;

inline std::vector<ReservoirSpec> reservoir_copies(const ExperimentConfig& c, const GridPoint& g,
                                                   std::size_t realization) {
  std::vector<ReservoirSpec> out;
  for (int copy = 0; copy < c.multiplex.spatial_copies; ++copy) {
    ReservoirSpec s;
    s.model = c.model;
    s.network = make_network(
        c.n_qubits, g.h,
        derive_seed(c.master_seed, "couplings", {realization, static_cast<std::uint64_t>(copy)}));
    s.dt = g.dt;
    s.gamma = g.gamma;
    s.gamma_first = c.gamma_first;
    s.dt_dissipate = c.dt_dissipate;
    s.integrator = c.integrator;
    out.push_back(std::move(s));
  }
  return out;
}

inline std::vector<double> task_inputs(const ExperimentConfig& c, std::size_t realization) {
  const std::uint64_t seed = derive_seed(c.master_seed, "inputs", {realization});
  const auto& seg = c.task.segments;
  switch (c.task.kind) {
    case TaskKind::stm:
    case TaskKind::narma: return gen_uniform_inputs(seg.total(), seed);
    case TaskKind::parity: return gen_binary_inputs(seg.total(), seed);
    case TaskKind::mackey_glass:
      return mackey_glass_series(c.task.mackey_glass,
                                 seg.washout + seg.train + c.task.autonomous_steps, seed);
  }
  return {};
}

inline TargetSeries task_targets(TaskKind kind, std::span<const double> s, std::size_t param) {
  switch (kind) {
    case TaskKind::stm: return stm_targets(s, param);
    case TaskKind::narma: return narma_targets(s, param);
    case TaskKind::parity: return parity_targets(s, param);
    case TaskKind::mackey_glass: return one_step_targets(s);
  }
  return {};
}

struct RealizationResult {
  std::vector<CellRecord> cells;
  std::vector<RolloutRecord> rollouts;
};

// Everything computed for one (grid point, realization): the features are
// generated once and reused for every task parameter and shot count.
inline RealizationResult evaluate_realization(const ExperimentConfig& c, std::size_t grid_index,
                                              const GridPoint& g, std::size_t realization) {
  RealizationResult out;
  std::vector<std::optional<double>> shots;
  if (c.include_ideal) shots.emplace_back();
  for (double ns : c.n_samples) shots.emplace_back(ns);

  CellRecord base;
  base.grid_index = grid_index;
  base.point = g;
  base.realization = realization;
  base.coupling_seed = derive_seed(c.master_seed, "couplings", {realization, 0});
  base.input_seed = derive_seed(c.master_seed, "inputs", {realization});
  base.noise_seed = derive_seed(c.master_seed, "noise", {realization, grid_index});
  for (auto p : c.task.params)
    for (const auto& ns : shots) {
      CellRecord r = base;
      r.param = p;
      r.n_samples = ns;
      if (!ns) r.noise_seed = 0;
      out.cells.push_back(std::move(r));
    }

  try {
    const auto inputs = task_inputs(c, realization);
    const auto obs = ObservableSet::standard(c.n_qubits);
    ReservoirBank bank(reservoir_copies(c, g, realization), c.multiplex.virtual_nodes, obs);
    const auto& seg = c.task.segments;

    if (c.task.kind == TaskKind::mackey_glass) {
      const std::size_t fit = seg.washout + seg.train;
      const auto drive = std::span<const double>(inputs).first(fit);
      const auto f = run_reservoir(bank, drive);
      // one-step-ahead targets; the value after the last fitted input is known
      TargetSeries next(fit);
      for (std::size_t k = 0; k < fit; ++k) next[k] = inputs[k + 1];
      const auto readout = train(f, RowRange{static_cast<Eigen::Index>(seg.washout),
                                             static_cast<Eigen::Index>(fit)},
                                 next, c.readout);
      std::vector<double> primer(static_cast<std::size_t>(f.cols()));
      for (Eigen::Index col = 0; col < f.cols(); ++col)
        primer[static_cast<std::size_t>(col)] = f.values(f.rows() - 1, col);
      const auto roll = autonomous_rollout(bank, readout, primer, c.task.autonomous_steps);
      const auto truth = std::span<const double>(inputs).subspan(fit, c.task.autonomous_steps);
      for (auto& cell : out.cells) {
        cell.value = mse(truth, roll.predictions);
        cell.clamp_events = roll.clamp_events;
        cell.ok = std::isfinite(cell.value);
        if (!cell.ok) cell.message = "non-finite metric";
      }
      for (std::size_t k = 0; k < roll.predictions.size(); ++k)
        out.rollouts.push_back({grid_index, realization, k, roll.predictions[k], truth[k]});
      return out;
    }

    const FeatureMatrix ideal = run_reservoir(bank, inputs);
    const auto ranges = segment(ideal.rows(), seg);
    std::size_t idx = 0;
    for (auto p : c.task.params) {
      const auto targets = task_targets(c.task.kind, inputs, p);
      for (const auto& ns : shots) {
        auto& cell = out.cells[idx++];
        try {
          const FeatureMatrix f =
              ns ? apply_sampling_noise(ideal, {*ns, cell.noise_seed}) : ideal;
          const auto readout = train(f, ranges.train, targets, c.readout);
          cell.value = evaluate_capacity(readout, f, ranges.test, targets);
          cell.ok = true;
        } catch (const std::exception& e) {
          cell.message = detail::sanitize(e.what());
        }
      }
    }
  } catch (const std::exception& e) {
    for (auto& cell : out.cells)
      if (!cell.ok) cell.message = detail::sanitize(e.what());
  }
  return out;
}

// Groups cells by (param, shot count, grid point) and flags the optimum per
// (param, shot count): best mean, ties to the smallest (h, dt, gamma).
inline std::vector<SummaryRecord> summarize(const std::vector<CellRecord>& cells, TaskKind kind) {
  std::map<std::tuple<std::size_t, int, double, std::size_t>, SummaryRecord> groups;
  std::map<std::tuple<std::size_t, int, double, std::size_t>, std::vector<double>> values;
  for (const auto& c : cells) {
    const auto key = std::make_tuple(c.param, c.n_samples ? 1 : 0, c.n_samples.value_or(0.0),
                                     c.grid_index);
    auto& s = groups[key];
    s.param = c.param;
    s.n_samples = c.n_samples;
    s.grid_index = c.grid_index;
    s.point = c.point;
    if (c.ok)
      values[key].push_back(c.value);
    else
      ++s.failed;
  }
  for (auto& [key, s] : groups) {
    const auto& v = values[key];
    s.count = v.size();
    if (v.empty()) continue;
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    s.mean = mean;
    s.std = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
  }
  std::vector<SummaryRecord> out;
  for (auto& [key, s] : groups) out.push_back(s);

  const bool up = higher_is_better(kind);
  std::map<std::tuple<std::size_t, int, double>, std::size_t> best;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto& s = out[i];
    if (s.count == 0) continue;
    const auto key = std::make_tuple(s.param, s.n_samples ? 1 : 0, s.n_samples.value_or(0.0));
    const auto it = best.find(key);
    if (it == best.end()) {
      best[key] = i;
      continue;
    }
    const auto& b = out[it->second];
    const bool better = up ? s.mean > b.mean : s.mean < b.mean;
    if (better || (s.mean == b.mean && s.point.key() < b.point.key())) it->second = i;
  }
  for (const auto& [key, i] : best) out[i].optimal = true;
  return out;
}

inline Json base_manifest(const ExperimentConfig& c, std::string_view kind) {
  return {{"kind", kind},
          {"software_version", kSoftwareVersion},
          {"schema_version", kSchemaVersion},
          {"config", to_json(c)},
          {"seeds",
           {{"master", c.master_seed},
            {"couplings", "derive_seed(master, \"couplings\", {realization, copy})"},
            {"inputs", "derive_seed(master, \"inputs\", {realization})"},
            {"noise", "derive_seed(master, \"noise\", {realization, grid_index})"}}}};
}

inline ResultStore run_task(const ExperimentConfig& c, const ProgressFn& progress = {}) {
  c.validate();
  const auto points = grid_points(c);
  const std::size_t jobs = points.size() * c.n_realizations;
  std::vector<RealizationResult> results(jobs);
  detail::parallel_for(
      jobs, c.workers,
      [&](std::size_t i) {
        const std::size_t g = i / c.n_realizations, r = i % c.n_realizations;
        results[i] = evaluate_realization(c, g, points[g], r);
      },
      [&](std::size_t done) {
        if (progress) progress(done, jobs);
      });
  ResultStore store;
  store.manifest = base_manifest(c, "task");
  std::size_t failed = 0;
  for (auto& r : results) {
    for (auto& cell : r.cells) {
      failed += cell.ok ? 0 : 1;
      store.cells.push_back(std::move(cell));
    }
    for (auto& roll : r.rollouts) store.rollouts.push_back(roll);
  }
  store.summary = summarize(store.cells, c.task.kind);
  store.manifest["metric"] = metric_name(c.task.kind);
  store.manifest["failed_cells"] = failed;
  return store;
}

// tau for every (N, h, gamma, realization) of the mixing grid
inline ResultStore run_mixing_sweep(const ExperimentConfig& c, const ProgressFn& progress = {}) {
  const auto& m = c.mixing;
  require(!m.n_qubits.empty() && !m.h.empty() && !m.gamma.empty(), ErrorCode::config_error,
          "mixing grid is empty");
  for (int n : m.n_qubits)
    require(n >= 1 && n <= kMaxQubits, ErrorCode::config_error, "mixing.n_qubits out of range");
  for (double g : m.gamma)
    require(g > 0.0, ErrorCode::config_error, "mixing.gamma values must be > 0");
  require(m.input >= 0.0 && m.input <= 1.0, ErrorCode::config_error, "mixing.input must be in [0, 1]");
  struct Job {
    int n;
    double h, gamma;
    std::size_t realization;
  };
  std::vector<Job> jobs;
  for (int n : m.n_qubits)
    for (double h : m.h)
      for (double g : m.gamma)
        for (std::size_t r = 0; r < c.n_realizations; ++r) jobs.push_back({n, h, g, r});
  std::vector<MixingRecord> rows(jobs.size());
  detail::parallel_for(
      jobs.size(), c.workers,
      [&](std::size_t i) {
        const auto& j = jobs[i];
        auto& row = rows[i];
        row.n_qubits = j.n;
        row.h = j.h;
        row.gamma = j.gamma;
        row.realization = j.realization;
        try {
          const CdParams p{make_network(j.n, j.h, derive_seed(c.master_seed, "couplings",
                                                                 {j.realization, 0})),
                           j.gamma};
          const auto rep = mixing_time_estimate(p, m.input);
          row.lambda1 = rep.lambda1_real;
          row.eta = rep.eta;
          row.tau = rep.tau;
          row.near_defective = rep.near_defective;
          row.ok = true;
        } catch (const std::exception& e) {
          row.message = detail::sanitize(e.what());
        }
      },
      [&](std::size_t done) {
        if (progress) progress(done, jobs.size());
      });
  ResultStore store;
  store.manifest = base_manifest(c, "mixing-time");
  store.mixing = std::move(rows);
  return store;
}

struct LinearFit {
  double slope = 0.0, intercept = 0.0, r2 = 0.0;
};

inline LinearFit linear_fit(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size() && x.size() >= 2, ErrorCode::invalid_argument,
          "linear fit needs at least two points");
  const auto n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  require(sxx > 0.0, ErrorCode::invalid_argument, "linear fit needs distinct x values");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r2 = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
  return f;
}

// Per N: the (h, gamma) cell with the largest mean of gamma * tau over
// realizations (tau in units of 1/gamma), its std, and the fit across N.
struct MixingScalingRow {
  int n_qubits = 0;
  double h = 0.0, gamma = 0.0;
  double mean = 0.0, std = 0.0;
  std::size_t count = 0;
};

struct MixingScaling {
  std::vector<MixingScalingRow> rows;
  LinearFit fit;
};

inline MixingScaling mixing_scaling(const std::vector<MixingRecord>& records) {
  std::map<std::tuple<int, double, double>, std::vector<double>> groups;
  for (const auto& r : records)
    if (r.ok) groups[{r.n_qubits, r.h, r.gamma}].push_back(r.gamma * r.tau);
  std::map<int, MixingScalingRow> best;
  for (const auto& [key, v] : groups) {
    const auto [n, h, g] = key;
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
    auto it = best.find(n);
    if (it == best.end() || mean > it->second.mean) best[n] = {n, h, g, mean, sd, v.size()};
  }
  MixingScaling out;
  std::vector<double> xs, ys;
  for (const auto& [n, row] : best) {
    out.rows.push_back(row);
    xs.push_back(n);
    ys.push_back(row.mean);
  }
  if (xs.size() >= 2) out.fit = linear_fit(xs, ys);
  return out;
}

inline void write_store(const ResultStore& store, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  require(!ec, ErrorCode::io_error, "cannot create " + dir.string() + ": " + ec.message());
  using detail::format_double;
  {
    auto out = detail::open_out(dir / "manifest.json");
    out << store.manifest.dump(2) << "\n";
  }
  if (store.kind() == "mixing-time") {
    auto out = detail::open_out(dir / "mixing.csv");
    out << "N,h,gamma,realization,lambda1,eta,tau,near_defective,status,message\n";
    for (const auto& r : store.mixing)
      out << r.n_qubits << "," << format_double(r.h) << "," << format_double(r.gamma) << ","
          << r.realization << "," << format_double(r.lambda1) << "," << format_double(r.eta)
          << "," << format_double(r.tau) << "," << (r.near_defective ? 1 : 0) << ","
          << (r.ok ? "ok" : "error") << "," << r.message << "\n";
    return;
  }
  const std::string model = store.manifest.at("config").at("model").get<std::string>();
  const int n = store.manifest.at("config").at("n_qubits").get<int>();
  const std::string metric = store.manifest.value("metric", std::string("capacity"));
  {
    auto out = detail::open_out(dir / "cells.csv");
    out << "model,N,grid_index,h,dt,gamma,realization,param,n_samples,metric,value,clamp_events,"
           "coupling_seed,input_seed,noise_seed,status,message\n";
    for (const auto& c : store.cells)
      out << model << "," << n << "," << c.grid_index << "," << format_double(c.point.h) << ","
          << format_double(c.point.dt) << "," << format_double(c.point.gamma) << ","
          << c.realization << "," << c.param << "," << detail::format_samples(c.n_samples) << ","
          << metric << "," << format_double(c.value) << "," << c.clamp_events << ","
          << c.coupling_seed << "," << c.input_seed << "," << c.noise_seed << ","
          << (c.ok ? "ok" : "error") << "," << c.message << "\n";
  }
  {
    auto out = detail::open_out(dir / "summary.csv");
    out << "model,N,param,n_samples,grid_index,h,dt,gamma,metric,mean,std,count,failed,optimal\n";
    for (const auto& s : store.summary)
      out << model << "," << n << "," << s.param << "," << detail::format_samples(s.n_samples)
          << "," << s.grid_index << "," << format_double(s.point.h) << ","
          << format_double(s.point.dt) << "," << format_double(s.point.gamma) << "," << metric
          << "," << format_double(s.mean) << "," << format_double(s.std) << "," << s.count << ","
          << s.failed << "," << (s.optimal ? 1 : 0) << "\n";
  }
  if (!store.rollouts.empty()) {
    auto out = detail::open_out(dir / "rollouts.csv");
    out << "grid_index,realization,step,prediction,target\n";
    for (const auto& r : store.rollouts)
      out << r.grid_index << "," << r.realization << "," << r.step << ","
          << format_double(r.prediction) << "," << format_double(r.target) << "\n";
  }
}

inline ResultStore load_store(const std::filesystem::path& dir) {
  ResultStore store;
  {
    std::ifstream in(dir / "manifest.json");
    require(static_cast<bool>(in), ErrorCode::not_found,
            "no manifest.json in " + dir.string());
    try {
      store.manifest = Json::parse(in);
    } catch (const Json::parse_error& e) {
      throw Error(ErrorCode::io_error, "manifest is not valid JSON: " + std::string(e.what()));
    }
  }
  using detail::parse_double;
  auto count = [](const std::string& s) { return static_cast<std::size_t>(std::stoull(s)); };
  if (store.kind() == "mixing-time") {
    const auto t = detail::read_csv(dir / "mixing.csv");
    for (const auto& row : t.rows) {
      MixingRecord r;
      r.n_qubits = std::stoi(row[t.column("N")]);
      r.h = parse_double(row[t.column("h")]);
      r.gamma = parse_double(row[t.column("gamma")]);
      r.realization = count(row[t.column("realization")]);
      r.lambda1 = parse_double(row[t.column("lambda1")]);
      r.eta = parse_double(row[t.column("eta")]);
      r.tau = parse_double(row[t.column("tau")]);
      r.near_defective = row[t.column("near_defective")] == "1";
      r.ok = row[t.column("status")] == "ok";
      r.message = row[t.column("message")];
      store.mixing.push_back(std::move(r));
    }
    return store;
  }
  {
    const auto t = detail::read_csv(dir / "cells.csv");
    for (const auto& row : t.rows) {
      CellRecord c;
      c.grid_index = count(row[t.column("grid_index")]);
      c.point = {parse_double(row[t.column("h")]), parse_double(row[t.column("dt")]),
                 parse_double(row[t.column("gamma")])};
      c.realization = count(row[t.column("realization")]);
      c.param = count(row[t.column("param")]);
      c.n_samples = detail::parse_samples(row[t.column("n_samples")]);
      c.value = parse_double(row[t.column("value")]);
      c.clamp_events = count(row[t.column("clamp_events")]);
      c.coupling_seed = std::stoull(row[t.column("coupling_seed")]);
      c.input_seed = std::stoull(row[t.column("input_seed")]);
      c.noise_seed = std::stoull(row[t.column("noise_seed")]);
      c.ok = row[t.column("status")] == "ok";
      c.message = row[t.column("message")];
      store.cells.push_back(std::move(c));
    }
  }
  {
    const auto t = detail::read_csv(dir / "summary.csv");
    for (const auto& row : t.rows) {
      SummaryRecord s;
      s.param = count(row[t.column("param")]);
      s.n_samples = detail::parse_samples(row[t.column("n_samples")]);
      s.grid_index = count(row[t.column("grid_index")]);
      s.point = {parse_double(row[t.column("h")]), parse_double(row[t.column("dt")]),
                 parse_double(row[t.column("gamma")])};
      s.mean = parse_double(row[t.column("mean")]);
      s.std = parse_double(row[t.column("std")]);
      s.count = count(row[t.column("count")]);
      s.failed = count(row[t.column("failed")]);
      s.optimal = row[t.column("optimal")] == "1";
      store.summary.push_back(s);
    }
  }
  if (std::filesystem::exists(dir / "rollouts.csv")) {
    const auto t = detail::read_csv(dir / "rollouts.csv");
    for (const auto& row : t.rows)
      store.rollouts.push_back({count(row[t.column("grid_index")]),
                                count(row[t.column("realization")]), count(row[t.column("step")]),
                                parse_double(row[t.column("prediction")]),
                                parse_double(row[t.column("target")])});
  }
  return store;
}

namespace detail {

inline std::string store_model(const ResultStore& s) {
  return s.manifest.at("config").at("model").get<std::string>();
}

inline TaskKind store_task(const ResultStore& s) {
  return parse_task(s.manifest.at("config").at("task").at("kind").get<std::string>());
}

inline const ResultStore& require_task(const std::vector<ResultStore>& stores, TaskKind kind,
                                       const std::string& figure) {
  for (const auto& s : stores)
    if (s.kind() == "task" && store_task(s) == kind) return s;
  throw Error(ErrorCode::not_found,
              figure + " needs a " + std::string(task_name(kind)) + " run; none was given");
}

}  // namespace detail

// Tidy CSV text for one figure. Stores of several models may be combined;
// rows are emitted in the order the stores are given.
inline std::string emit_plot_data(const std::vector<ResultStore>& stores, std::string_view figure) {
  using detail::format_double;
  std::ostringstream out;
  const std::string fig(figure);
  auto optimal_rows = [](const ResultStore& s, bool ideal) {
    std::vector<SummaryRecord> rows;
    for (const auto& r : s.summary)
      if (r.optimal && ideal == !r.n_samples) rows.push_back(r);
    return rows;
  };
  auto memory_figure = [&](TaskKind kind, const char* x) {
    out << x << ",capacity_mean,capacity_std,model\n";
    bool any = false;
    for (const auto& s : stores) {
      if (s.kind() != "task" || detail::store_task(s) != kind) continue;
      for (const auto& r : optimal_rows(s, true)) {
        out << r.param << "," << format_double(r.mean) << "," << format_double(r.std) << ","
            << detail::store_model(s) << "\n";
        any = true;
      }
    }
    require(any, ErrorCode::not_found,
            fig + " needs an ideal-mode " + std::string(task_name(kind)) + " run");
  };

  if (fig == "fig2a") {
    memory_figure(TaskKind::stm, "tau");
  } else if (fig == "fig2b") {
    memory_figure(TaskKind::narma, "order");
  } else if (fig == "fig2c") {
    memory_figure(TaskKind::parity, "tau");
  } else if (fig == "fig3") {
    detail::require_task(stores, TaskKind::mackey_glass, fig);
    out << "step,target_mean,prediction_mean,prediction_std,model\n";
    for (const auto& s : stores) {
      if (s.kind() != "task" || detail::store_task(s) != TaskKind::mackey_glass) continue;
      const auto opt = optimal_rows(s, true);
      require(!opt.empty() && !s.rollouts.empty(), ErrorCode::not_found,
              "fig3 needs rollouts from a Mackey-Glass run");
      std::map<std::size_t, std::pair<std::vector<double>, std::vector<double>>> steps;
      for (const auto& r : s.rollouts)
        if (r.grid_index == opt.front().grid_index) {
          steps[r.step].first.push_back(r.target);
          steps[r.step].second.push_back(r.prediction);
        }
      for (const auto& [k, tp] : steps) {
        const auto& [t, p] = tp;
        double mt = 0, mp = 0, ss = 0;
        for (double x : t) mt += x;
        for (double x : p) mp += x;
        mt /= static_cast<double>(t.size());
        mp /= static_cast<double>(p.size());
        for (double x : p) ss += (x - mp) * (x - mp);
        const double sd = p.size() > 1 ? std::sqrt(ss / static_cast<double>(p.size() - 1)) : 0.0;
        out << k << "," << format_double(mt) << "," << format_double(mp) << ","
            << format_double(sd) << "," << detail::store_model(s) << "\n";
      }
    }
  } else if (fig == "fig4") {
    out << "N_s,tau,capacity_mean,capacity_std,model\n";
    bool noisy = false;
    for (const auto& s : stores) {
      if (s.kind() != "task" || detail::store_task(s) != TaskKind::stm) continue;
      for (const auto& r : s.summary) {
        if (!r.optimal) continue;
        noisy = noisy || r.n_samples.has_value();
        out << (r.n_samples ? format_double(*r.n_samples) : "inf") << "," << r.param << ","
            << format_double(r.mean) << "," << format_double(r.std) << ","
            << detail::store_model(s) << "\n";
      }
    }
    require(noisy, ErrorCode::not_found, "fig4 needs an STM run with sampling.n_samples");
  } else if (fig == "fig6") {
    const ResultStore* m = nullptr;
    for (const auto& s : stores)
      if (s.kind() == "mixing-time") m = &s;
    require(m != nullptr, ErrorCode::not_found, "fig6 needs a mixing-time run");
    const auto scaling = mixing_scaling(m->mixing);
    require(scaling.rows.size() >= 2, ErrorCode::not_found, "fig6 needs at least two sizes");
    out << "N,tau_mix_max_mean,tau_mix_std,fit_slope\n";
    for (const auto& r : scaling.rows)
      out << r.n_qubits << "," << format_double(r.mean) << "," << format_double(r.std) << ","
          << format_double(scaling.fit.slope) << "\n";
  } else if (fig == "fig7") {
    out << "N,capacity_mean,capacity_std,model\n";
    bool any = false;
    for (const auto& s : stores) {
      if (s.kind() != "task" || detail::store_task(s) != TaskKind::stm) continue;
      for (const auto& r : optimal_rows(s, true))
        if (r.param == 10) {
          out << s.manifest.at("config").at("n_qubits").get<int>() << "," << format_double(r.mean)
              << "," << format_double(r.std) << "," << detail::store_model(s) << "\n";
          any = true;
        }
    }
    require(any, ErrorCode::not_found, "fig7 needs STM runs containing delay 10");
  } else {
    throw Error(ErrorCode::invalid_argument, "unknown figure '" + fig + "'");
  }
  return out.str();
}

// Contractivity and echo-state diagnostics for every CD grid point.
struct EspRecord {
  GridPoint point;
  std::size_t realization = 0;
  double contraction = 0.0;
  double tau_mix = 0.0;
  double esp_final = 0.0;
  bool ok = false;
  std::string message;
};

inline std::vector<EspRecord> run_esp_check(const ExperimentConfig& c, const ProgressFn& progress = {}) {
  require(c.model == ModelKind::cd, ErrorCode::config_error, "esp-check needs the CD model");
  const auto points = grid_points(c);
  const std::size_t jobs = points.size() * c.n_realizations;
  std::vector<EspRecord> rows(jobs);
  detail::parallel_for(
      jobs, c.workers,
      [&](std::size_t i) {
        const auto& g = points[i / c.n_realizations];
        auto& row = rows[i];
        row.point = g;
        row.realization = i % c.n_realizations;
        try {
          ReservoirSpec spec = reservoir_copies(c, g, row.realization).front();
          const auto l = build_liouvillian(spec.network, spec.gamma, 0.0);
          row.contraction = contraction_factor(l, g.dt).factor;
          row.tau_mix = mixing_time_estimate(l, c.n_qubits).tau;
          const auto inputs = gen_uniform_inputs(
              c.esp.steps, derive_seed(c.master_seed, "inputs", {row.realization}));
          const auto dim = static_cast<Eigen::Index>(spec.network.dim());
          DensityMatrix b = DensityMatrix::Zero(dim, dim);
          b(dim - 1, dim - 1) = 1.0;
          row.esp_final = esp_trace(spec, inputs, ground_state(c.n_qubits), b).back();
          row.ok = true;
        } catch (const std::exception& e) {
          row.message = detail::sanitize(e.what());
        }
      },
      [&](std::size_t done) {
        if (progress) progress(done, jobs);
      });
  return rows;
}

inline void write_esp_csv(const std::vector<EspRecord>& rows, const std::filesystem::path& path) {
  auto out = detail::open_out(path);
  out << "h,dt,gamma,realization,contraction_factor,tau_mix_bound,esp_final_distance,status,message\n";
  for (const auto& r : rows)
    out << detail::format_double(r.point.h) << "," << detail::format_double(r.point.dt) << ","
        << detail::format_double(r.point.gamma) << "," << r.realization << ","
        << detail::format_double(r.contraction) << "," << detail::format_double(r.tau_mix) << ","
        << detail::format_double(r.esp_final) << "," << (r.ok ? "ok" : "error") << ","
        << r.message << "\n";
}

}  // namespace qrc
