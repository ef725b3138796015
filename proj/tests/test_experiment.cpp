#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_set>

#include "qrc/experiment.hpp"

using namespace qrc;
namespace fs = std::filesystem;

namespace {

ExperimentConfig tiny(ModelKind model = ModelKind::cd) {
  ExperimentConfig c;
  c.model = model;
  c.n_qubits = 2;
  c.grid = {{0.1, 1.0}, {0.5, 2.0}, {0.3, 3.0}};
  c.n_realizations = 3;
  c.task.kind = TaskKind::stm;
  c.task.params = {1, 2};
  c.task.segments = {20, 60, 40};
  c.workers = 1;
  c.master_seed = 9;
  return c;
}

fs::path temp_dir(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("qrc_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Seeds, DeterministicAndDomainSeparated) {
  EXPECT_EQ(derive_seed(1, "couplings", {3, 0}), derive_seed(1, "couplings", {3, 0}));
  EXPECT_NE(derive_seed(1, "couplings", {3}), derive_seed(1, "noise", {3}));
  EXPECT_NE(derive_seed(1, "inputs", {3}), derive_seed(2, "inputs", {3}));
  EXPECT_NE(derive_seed(1, "noise", {1, 2}), derive_seed(1, "noise", {2, 1}));
}

TEST(Seeds, NoCollisionsOverAMillionRealizations) {
  std::unordered_set<std::uint64_t> seen;
  seen.reserve(2000000);
  for (std::uint64_t r = 0; r < 1000000; ++r) {
    seen.insert(derive_seed(42, "couplings", {r, 0}));
    seen.insert(derive_seed(42, "noise", {r, 0}));
  }
  EXPECT_EQ(seen.size(), 2000000u);
}

TEST(Config, JsonRoundTrip) {
  auto c = tiny();
  c.n_samples = {1e4, 1e8};
  c.sweep = SweepSpec{"n_qubits", {2, 3}};
  const auto back = config_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
  EXPECT_EQ(back.grid.gamma, c.grid.gamma);
  EXPECT_EQ(back.task.segments.train, 60u);
}

TEST(Config, DefaultsFollowTheProtocol) {
  const auto c = config_from_json(Json{{"schema_version", 1}});
  EXPECT_EQ(c.grid.h, (std::vector<double>{0.01, 0.1, 1.0, 10.0}));
  EXPECT_EQ(c.n_realizations, 100u);
  EXPECT_EQ(c.task.segments.total(), 3000u);
}

TEST(Config, Rejections) {
  auto expect_config_error = [](const Json& j) {
    try {
      config_from_json(j);
      ADD_FAILURE() << j.dump();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::config_error) << e.what();
    }
  };
  expect_config_error(Json::object());
  expect_config_error(Json{{"schema_version", 2}});
  expect_config_error(Json{{"schema_version", 1}, {"typo", 1}});
  expect_config_error(Json{{"schema_version", 1}, {"grid", {{"h", {0.1, -1.0}}}}});
  expect_config_error(Json{{"schema_version", 1}, {"n_realizations", 0}});
  expect_config_error(Json{{"schema_version", 1}, {"model", "XY"}});
  expect_config_error(Json{{"schema_version", 1}, {"n_qubits", "five"}});
  expect_config_error(
      Json{{"schema_version", 1}, {"task", {{"kind", "NARMA"}, {"params", {0}}}}});
}

TEST(Config, ManifestIsAcceptedAsConfig) {
  const auto c = tiny();
  const auto m = base_manifest(c, "task");
  EXPECT_EQ(to_json(config_from_json(m)), to_json(c));
}

TEST(RunTask, RowCountsMatchGridTimesRealizations) {
  auto c = tiny();
  c.n_qubits = 1;
  c.grid = {};
  c.n_realizations = 100;
  c.task.params = {1};
  c.task.segments = {5, 10, 10};
  const auto store = run_task(c);
  EXPECT_EQ(store.cells.size(), 6400u);
  EXPECT_EQ(store.summary.size(), 64u);
  EXPECT_EQ(store.manifest.at("failed_cells"), 0);
}

TEST(RunTask, DeterministicAcrossRunsAndWorkerCounts) {
  auto c = tiny();
  c.n_samples = {1e4};
  const auto a = run_task(c);
  c.workers = 3;
  const auto b = run_task(c);
  ASSERT_EQ(a.cells.size(), b.cells.size());
  for (std::size_t i = 0; i < a.cells.size(); ++i) {
    EXPECT_EQ(a.cells[i].value, b.cells[i].value);
    EXPECT_EQ(a.cells[i].grid_index, b.cells[i].grid_index);
    EXPECT_EQ(a.cells[i].realization, b.cells[i].realization);
  }
  const auto da = temp_dir("det_a"), db = temp_dir("det_b");
  write_store(a, da);
  write_store(b, db);
  EXPECT_EQ(slurp(da / "cells.csv"), slurp(db / "cells.csv"));
  EXPECT_EQ(slurp(da / "summary.csv"), slurp(db / "summary.csv"));
}

TEST(RunTask, SummaryMatchesIndependentRecomputation) {
  auto c = tiny();
  c.n_samples = {1e6};
  const auto store = run_task(c);
  std::map<std::tuple<std::size_t, std::string, std::size_t>, std::vector<double>> groups;
  for (const auto& cell : store.cells) {
    ASSERT_TRUE(cell.ok) << cell.message;
    groups[{cell.param, cell.n_samples ? "n" : "i", cell.grid_index}].push_back(cell.value);
  }
  ASSERT_EQ(groups.size(), store.summary.size());
  for (const auto& s : store.summary) {
    const auto& v = groups.at({s.param, s.n_samples ? "n" : "i", s.grid_index});
    double sum = 0.0;
    for (double x : v) sum += x;
    const double mean = sum / v.size();
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    EXPECT_NEAR(s.mean, mean, 1e-12);
    EXPECT_NEAR(s.std, std::sqrt(ss / (v.size() - 1)), 1e-12);
    EXPECT_EQ(s.count, v.size());
  }
}

TEST(RunTask, OneOptimumPerParameterAndShotCount) {
  auto c = tiny();
  c.n_samples = {1e4};
  const auto store = run_task(c);
  std::map<std::pair<std::size_t, bool>, int> optima;
  std::map<std::pair<std::size_t, bool>, double> best;
  for (const auto& s : store.summary) {
    const auto key = std::make_pair(s.param, s.n_samples.has_value());
    best[key] = std::max(best.count(key) ? best[key] : -1.0, s.mean);
    optima[key] += s.optimal ? 1 : 0;
  }
  for (const auto& [k, n] : optima) EXPECT_EQ(n, 1);
  for (const auto& s : store.summary) {
    if (s.optimal) {
      EXPECT_EQ(s.mean, best[std::make_pair(s.param, s.n_samples.has_value())]);
    }
  }
}

TEST(RunTask, PairedStreamsAcrossModels) {
  const auto cd = tiny(ModelKind::cd);
  const auto fn = tiny(ModelKind::fn);
  EXPECT_EQ(task_inputs(cd, 2), task_inputs(fn, 2));
  const auto a = reservoir_copies(cd, {1.0, 1.0, 1.0}, 2).front().network.couplings;
  const auto b = reservoir_copies(fn, {0.1, 2.0, 0.0}, 2).front().network.couplings;
  EXPECT_EQ(a, b);
  EXPECT_EQ(grid_points(fn).size(), 4u);
}

TEST(Summarize, TiesGoToTheSmallestGridPoint) {
  std::vector<CellRecord> cells;
  auto add = [&](std::size_t g, GridPoint p, double v, bool ok = true) {
    CellRecord c;
    c.grid_index = g;
    c.point = p;
    c.param = 1;
    c.value = v;
    c.ok = ok;
    cells.push_back(c);
  };
  add(0, {1.0, 0.1, 1.0}, 0.5);
  add(1, {0.1, 10.0, 1.0}, 0.5);
  add(2, {0.1, 1.0, 10.0}, 0.5);
  add(2, {0.1, 1.0, 10.0}, 0.0, false);
  add(3, {0.01, 0.1, 0.1}, 0.2);
  const auto s = summarize(cells, TaskKind::stm);
  for (const auto& r : s) {
    EXPECT_EQ(r.optimal, r.grid_index == 2);
    if (r.grid_index == 2) {
      EXPECT_EQ(r.count, 1u);
      EXPECT_EQ(r.failed, 1u);
    }
  }
  // lower is better for the forecasting error
  const auto m = summarize(cells, TaskKind::mackey_glass);
  for (const auto& r : m) EXPECT_EQ(r.optimal, r.grid_index == 3);
}

TEST(Store, WriteLoadRoundTrip) {
  auto c = tiny();
  c.n_samples = {1e4};
  const auto store = run_task(c);
  const auto dir = temp_dir("roundtrip");
  write_store(store, dir);
  const auto back = load_store(dir);
  ASSERT_EQ(back.cells.size(), store.cells.size());
  for (std::size_t i = 0; i < back.cells.size(); ++i) {
    EXPECT_EQ(back.cells[i].value, store.cells[i].value);
    EXPECT_EQ(back.cells[i].n_samples, store.cells[i].n_samples);
    EXPECT_EQ(back.cells[i].noise_seed, store.cells[i].noise_seed);
  }
  const auto again = temp_dir("roundtrip2");
  write_store(back, again);
  EXPECT_EQ(slurp(dir / "cells.csv"), slurp(again / "cells.csv"));
  EXPECT_EQ(slurp(dir / "summary.csv"), slurp(again / "summary.csv"));
  EXPECT_THROW(load_store(temp_dir("missing")), Error);
}

TEST(Store, ManifestRerunReproducesTables) {
  const auto dir = temp_dir("rerun");
  write_store(run_task(tiny()), dir);
  const auto manifest = Json::parse(slurp(dir / "manifest.json"));
  const auto redo = temp_dir("rerun2");
  write_store(run_task(config_from_json(manifest)), redo);
  EXPECT_EQ(slurp(dir / "cells.csv"), slurp(redo / "cells.csv"));
}

TEST(RunTask, MackeyGlassRollouts) {
  auto c = tiny();
  c.task.kind = TaskKind::mackey_glass;
  c.task.params = {0};
  c.task.segments = {50, 200, 2};
  c.task.autonomous_steps = 30;
  c.grid = {{1.0}, {1.0}, {1.0}};
  c.n_realizations = 2;
  const auto store = run_task(c);
  ASSERT_EQ(store.cells.size(), 2u);
  EXPECT_EQ(store.rollouts.size(), 60u);
  for (const auto& cell : store.cells) {
    EXPECT_TRUE(cell.ok) << cell.message;
    EXPECT_GE(cell.value, 0.0);
  }
  const auto csv = emit_plot_data({store}, "fig3");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "step,target_mean,prediction_mean,prediction_std,model");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 31);
}

TEST(Plots, MemorySchemasAndErrors) {
  const auto cd = run_task(tiny(ModelKind::cd));
  const auto fn = run_task(tiny(ModelKind::fn));
  const auto csv = emit_plot_data({cd, fn}, "fig2a");
  std::istringstream is(csv);
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "tau,capacity_mean,capacity_std,model");
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  EXPECT_EQ(rows, 4);  // two delays, two models
  EXPECT_NE(csv.find(",FN\n"), std::string::npos);
  EXPECT_THROW(emit_plot_data({cd}, "fig2b"), Error);
  EXPECT_THROW(emit_plot_data({cd}, "fig4"), Error);
  EXPECT_THROW(emit_plot_data({cd}, "fig6"), Error);
  EXPECT_THROW(emit_plot_data({cd}, "fig7"), Error);
  EXPECT_THROW(emit_plot_data({cd}, "fig9"), Error);
}

TEST(Plots, SamplingFigure) {
  auto c = tiny();
  c.n_samples = {1e4, 1e8};
  const auto csv = emit_plot_data({run_task(c)}, "fig4");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "N_s,tau,capacity_mean,capacity_std,model");
  EXPECT_NE(csv.find("\ninf,1,"), std::string::npos);
  EXPECT_NE(csv.find("\n10000,2,"), std::string::npos);
}

TEST(Plots, SizeFigure) {
  std::vector<ResultStore> stores;
  for (int n : {1, 2}) {
    auto c = tiny();
    c.n_qubits = n;
    c.task.params = {10};
    stores.push_back(run_task(c));
  }
  const auto csv = emit_plot_data(stores, "fig7");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "N,capacity_mean,capacity_std,model");
  EXPECT_NE(csv.find("\n1,"), std::string::npos);
  EXPECT_NE(csv.find("\n2,"), std::string::npos);
}

TEST(Mixing, SweepScalingAndFigure) {
  auto c = tiny();
  c.n_realizations = 2;
  c.mixing.n_qubits = {1, 2, 3};
  c.mixing.h = {0.5, 1.0};
  c.mixing.gamma = {0.1, 1.0};
  const auto store = run_mixing_sweep(c);
  ASSERT_EQ(store.mixing.size(), 24u);
  for (const auto& r : store.mixing) {
    EXPECT_TRUE(r.ok) << r.message;
    EXPECT_LT(r.lambda1, 0.0);
    EXPECT_GT(r.tau, 0.0);
  }
  const auto dir = temp_dir("mixing");
  write_store(store, dir);
  const auto back = load_store(dir);
  ASSERT_EQ(back.mixing.size(), 24u);
  EXPECT_EQ(back.mixing[5].tau, store.mixing[5].tau);
  const auto csv = emit_plot_data({back}, "fig6");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "N,tau_mix_max_mean,tau_mix_std,fit_slope");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
}

TEST(Mixing, ScalingPicksTheWorstCellInGammaUnits) {
  std::vector<MixingRecord> rows;
  auto add = [&](int n, double h, double g, double tau) {
    MixingRecord r;
    r.n_qubits = n;
    r.h = h;
    r.gamma = g;
    r.tau = tau;
    r.ok = true;
    rows.push_back(r);
  };
  add(2, 1.0, 0.1, 50.0);  // gamma tau = 5
  add(2, 1.0, 1.0, 4.0);
  add(2, 1.0, 1.0, 6.0);   // mean 5 ties; first by key wins
  add(3, 1.0, 1.0, 7.0);
  add(4, 1.0, 10.0, 0.9);
  const auto s = mixing_scaling(rows);
  ASSERT_EQ(s.rows.size(), 3u);
  EXPECT_DOUBLE_EQ(s.rows[0].mean, 5.0);
  EXPECT_DOUBLE_EQ(s.rows[0].gamma, 0.1);
  EXPECT_DOUBLE_EQ(s.rows[1].mean, 7.0);
  EXPECT_NEAR(s.rows[2].mean, 9.0, 1e-12);
  EXPECT_NEAR(s.fit.slope, 2.0, 1e-12);
  EXPECT_NEAR(s.fit.r2, 1.0, 1e-12);
}

TEST(Fit, HandValues) {
  const std::vector<double> x{1, 2, 3, 4}, y{1, 3, 2, 4};
  const auto f = linear_fit(x, y);
  EXPECT_NEAR(f.slope, 0.8, 1e-15);
  EXPECT_NEAR(f.intercept, 0.5, 1e-15);
  EXPECT_NEAR(f.r2, 0.64, 1e-15);
  EXPECT_THROW(linear_fit(std::vector<double>{1, 1}, std::vector<double>{0, 1}), Error);
}

TEST(Esp, GridDiagnostics) {
  auto c = tiny();
  c.grid = {{1.0}, {0.5, 20.0}, {1.0}};
  c.n_realizations = 1;
  c.esp.steps = 30;
  const auto rows = run_esp_check(c);
  ASSERT_EQ(rows.size(), 2u);
  for (const auto& r : rows) ASSERT_TRUE(r.ok) << r.message;
  EXPECT_LT(rows[1].contraction, rows[0].contraction);
  EXPECT_LT(rows[1].esp_final, 1e-6);
  EXPECT_THROW(run_esp_check(tiny(ModelKind::fn)), Error);
}
