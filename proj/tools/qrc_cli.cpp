// Command-line front end. Every subcommand prints one JSON object on stdout
// when it succeeds; failures print {"error": {...}} on stderr and exit
// nonzero (2 usage or config, 3 input/output, 1 anything else).

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "qrc/experiment.hpp"

namespace fs = std::filesystem;
using qrc::Json;

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> realizations;
  std::optional<unsigned> workers;
  std::string out;
  bool quiet = false;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool config_required) {
  auto* c = cmd->add_option("--config", f.config, "experiment config (JSON)");
  if (config_required) c->required();
  c->check(CLI::ExistingFile);
  cmd->add_option("--seed", f.seed, "override master_seed");
  cmd->add_option("--realizations", f.realizations, "override n_realizations")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--workers", f.workers, "worker threads (0 = all cores)");
  cmd->add_option("--out", f.out, "output directory (overrides output_dir)");
  cmd->add_flag("--quiet", f.quiet, "no progress on stderr");
}

qrc::ExperimentConfig resolve(const CommonFlags& f) {
  qrc::ExperimentConfig c = f.config.empty() ? qrc::ExperimentConfig{} : qrc::load_config(f.config);
  if (f.seed) c.master_seed = *f.seed;
  if (f.realizations) c.n_realizations = *f.realizations;
  if (f.workers) c.workers = *f.workers;
  if (!f.out.empty()) c.output_dir = f.out;
  c.validate();
  return c;
}

qrc::ProgressFn progress_printer(const std::string& what, bool quiet) {
  if (quiet) return {};
  return [what, last = std::size_t{0}](std::size_t done, std::size_t total) mutable {
    const std::size_t pct = total ? 100 * done / total : 100;
    if (pct / 10 != last / 10 || done == total) {
      std::fprintf(stderr, "%s: %zu/%zu\n", what.c_str(), done, total);
      last = pct;
    }
  };
}

Json optimal_json(const qrc::ResultStore& s) {
  Json out = Json::array();
  for (const auto& r : s.summary)
    if (r.optimal)
      out.push_back({{"param", r.param},
                     {"n_samples", r.n_samples ? Json(*r.n_samples) : Json("ideal")},
                     {"h", r.point.h},
                     {"dt", r.point.dt},
                     {"gamma", r.point.gamma},
                     {"mean", r.mean},
                     {"std", r.std}});
  return out;
}

void write_json(const fs::path& path, const Json& j) {
  std::ofstream out(path);
  qrc::require(static_cast<bool>(out), qrc::ErrorCode::io_error, "cannot write " + path.string());
  out << j.dump(2) << "\n";
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  qrc::require(!ec, qrc::ErrorCode::io_error, "cannot create " + dir.string());
}

Json run_task_cmd(const CommonFlags& f) {
  const auto c = resolve(f);
  const auto store = qrc::run_task(c, progress_printer("run-task", f.quiet));
  qrc::write_store(store, c.output_dir);
  return {{"status", "ok"},
          {"command", "run-task"},
          {"output", c.output_dir},
          {"cells", store.cells.size()},
          {"failed", store.manifest.at("failed_cells")},
          {"optimal", optimal_json(store)}};
}

Json sweep_cmd(const CommonFlags& f) {
  const auto c = resolve(f);
  qrc::require(c.sweep.has_value(), qrc::ErrorCode::config_error,
               "sweep needs a \"sweep\" block in the config");
  Json runs = Json::array();
  for (double v : c.sweep->values) {
    auto sub = c;
    sub.sweep.reset();
    sub.n_qubits = static_cast<int>(v);
    qrc::require(static_cast<double>(sub.n_qubits) == v, qrc::ErrorCode::config_error,
                 "n_qubits sweep values must be integers");
    sub.output_dir = (fs::path(c.output_dir) / ("N" + std::to_string(sub.n_qubits))).string();
    sub.validate();
    const auto store =
        qrc::run_task(sub, progress_printer("sweep N=" + std::to_string(sub.n_qubits), f.quiet));
    qrc::write_store(store, sub.output_dir);
    runs.push_back({{"n_qubits", sub.n_qubits},
                    {"output", sub.output_dir},
                    {"failed", store.manifest.at("failed_cells")},
                    {"optimal", optimal_json(store)}});
  }
  return {{"status", "ok"}, {"command", "sweep"}, {"runs", runs}};
}

Json mixing_cmd(const CommonFlags& f) {
  const auto c = resolve(f);
  const auto store = qrc::run_mixing_sweep(c, progress_printer("mixing-time", f.quiet));
  qrc::write_store(store, c.output_dir);
  const auto scaling = qrc::mixing_scaling(store.mixing);
  Json rows = Json::array();
  for (const auto& r : scaling.rows)
    rows.push_back({{"n_qubits", r.n_qubits}, {"h", r.h}, {"gamma", r.gamma},
                    {"gamma_tau_mean", r.mean}, {"gamma_tau_std", r.std}});
  std::size_t failed = 0;
  for (const auto& r : store.mixing) failed += r.ok ? 0 : 1;
  return {{"status", "ok"},
          {"command", "mixing-time"},
          {"output", c.output_dir},
          {"failed", failed},
          {"worst_cells", rows},
          {"fit", {{"slope", scaling.fit.slope}, {"intercept", scaling.fit.intercept},
                   {"r2", scaling.fit.r2}}}};
}

Json esp_cmd(const CommonFlags& f) {
  const auto c = resolve(f);
  const auto rows = qrc::run_esp_check(c, progress_printer("esp-check", f.quiet));
  make_dir(c.output_dir);
  write_json(fs::path(c.output_dir) / "manifest.json", qrc::base_manifest(c, "esp-check"));
  qrc::write_esp_csv(rows, fs::path(c.output_dir) / "esp.csv");
  std::size_t contractive = 0, failed = 0;
  for (const auto& r : rows) {
    failed += r.ok ? 0 : 1;
    contractive += r.ok && r.contraction < 1.0 ? 1 : 0;
  }
  return {{"status", "ok"},      {"command", "esp-check"}, {"output", c.output_dir},
          {"rows", rows.size()}, {"contractive", contractive}, {"failed", failed}};
}

Json fn_approx_cmd(const CommonFlags& f) {
  const auto c = resolve(f);
  const auto& spec = c.fn_approx_curve;
  const auto d = qrc::fn_approx_distance_curve(spec.n_qubits, spec.gamma_dt, spec.pairs,
                                               qrc::derive_seed(c.master_seed, "fn_approx"));
  make_dir(c.output_dir);
  write_json(fs::path(c.output_dir) / "manifest.json", qrc::base_manifest(c, "fn-approx"));
  std::ofstream out(fs::path(c.output_dir) / "fn_approx.csv");
  qrc::require(static_cast<bool>(out), qrc::ErrorCode::io_error, "cannot write fn_approx.csv");
  out << "gamma_dt,mean_hs_distance\n";
  for (std::size_t k = 0; k < d.size(); ++k)
    out << qrc::detail::format_double(spec.gamma_dt[k]) << "," << qrc::detail::format_double(d[k])
        << "\n";
  return {{"status", "ok"}, {"command", "fn-approx"}, {"output", c.output_dir},
          {"gamma_dt", spec.gamma_dt}, {"distance", d}};
}

Json emit_plot_cmd(const std::vector<std::string>& dirs, const std::string& figure,
                   const std::string& out) {
  std::vector<qrc::ResultStore> stores;
  for (const auto& d : dirs) stores.push_back(qrc::load_store(d));
  const std::string csv = qrc::emit_plot_data(stores, figure);
  if (out.empty()) {
    std::cout << csv;
    return nullptr;
  }
  const fs::path path(out);
  if (path.has_parent_path()) make_dir(path.parent_path());
  std::ofstream file(path);
  qrc::require(static_cast<bool>(file), qrc::ErrorCode::io_error, "cannot write " + out);
  file << csv;
  return {{"status", "ok"}, {"command", "emit-plot"}, {"figure", figure}, {"output", out}};
}

int fail(std::string_view code, const std::string& message, int status) {
  std::cerr << Json{{"error", {{"code", code}, {"message", message}}}}.dump() << "\n";
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dissipative spin-network reservoir computing simulator"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(qrc::kSoftwareVersion));

  CommonFlags run_f, sweep_f, mix_f, esp_f, fn_f;
  auto* run = app.add_subcommand("run-task", "grid search for one task and model");
  add_common(run, run_f, true);
  auto* sweep = app.add_subcommand("sweep", "repeat run-task over the config's sweep values");
  add_common(sweep, sweep_f, true);
  auto* mixing = app.add_subcommand("mixing-time", "mixing-time bound over the mixing grid");
  add_common(mixing, mix_f, false);
  auto* esp = app.add_subcommand("esp-check", "contraction factor and echo-state traces");
  add_common(esp, esp_f, true);
  auto* fna = app.add_subcommand("fn-approx", "distance between injection and its dissipative approximation");
  add_common(fna, fn_f, false);

  std::vector<std::string> store_dirs;
  std::string figure, plot_out;
  auto* plot = app.add_subcommand("emit-plot", "tidy CSV for one figure from result directories");
  plot->add_option("--figure", figure, "fig2a|fig2b|fig2c|fig3|fig4|fig6|fig7")
      ->required()
      ->check(CLI::IsMember({"fig2a", "fig2b", "fig2c", "fig3", "fig4", "fig6", "fig7"}));
  plot->add_option("--store", store_dirs, "result directories")->required()->check(CLI::ExistingDirectory);
  plot->add_option("--out", plot_out, "CSV path (stdout if omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage_error", e.what(), 2);
  }

  try {
    Json result;
    if (*run) result = run_task_cmd(run_f);
    else if (*sweep) result = sweep_cmd(sweep_f);
    else if (*mixing) result = mixing_cmd(mix_f);
    else if (*esp) result = esp_cmd(esp_f);
    else if (*fna) result = fn_approx_cmd(fn_f);
    else if (*plot) result = emit_plot_cmd(store_dirs, figure, plot_out);
    if (!result.is_null()) std::cout << result.dump() << "\n";
    return 0;
  } catch (const qrc::Error& e) {
    using qrc::ErrorCode;
    const int status = e.code() == ErrorCode::config_error || e.code() == ErrorCode::invalid_argument
                           ? 2
                       : e.code() == ErrorCode::io_error || e.code() == ErrorCode::not_found ? 3
                                                                                             : 1;
    return fail(qrc::code_name(e.code()), e.what(), status);
  } catch (const std::exception& e) {
    return fail("internal_error", e.what(), 1);
  }
}
