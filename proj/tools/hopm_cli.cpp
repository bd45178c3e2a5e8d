#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>

#include "hopm/experiment.hpp"
#include "hopm/text_io.hpp"

namespace {

struct Common {
  std::string config_path;
  std::string out;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  std::vector<std::string> conditions;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config_path, "JSON configuration file")->check(CLI::ExistingFile);
  app->add_option("--out", c.out, "output directory (default: outputs.directory)");
  app->add_option("--seed", c.seed, "base seed, overrides run.seed");
  app->add_option("--jobs", c.jobs, "worker threads")->check(CLI::PositiveNumber);
  app->add_option("--condition", c.conditions, "probe condition name (repeatable)");
}

hopm::ExperimentConfig load(const Common& c) {
  nlohmann::json extra = nlohmann::json::object();
  if (c.seed) extra["run"]["seed"] = *c.seed;
  if (c.config_path.empty()) return hopm::load_config(extra);
  return hopm::load_config_file(c.config_path, extra);
}

hopm::RunOptions options(const Common& c, const hopm::ExperimentConfig& cfg) {
  hopm::RunOptions o;
  o.out_dir = c.out.empty() ? std::filesystem::path(cfg.output_dir) : std::filesystem::path(c.out);
  o.jobs = c.jobs;
  o.conditions = c.conditions;
  for (const auto& name : o.conditions) cfg.condition_index(name);
  return o;
}

void list(const std::vector<std::filesystem::path>& files) {
  for (const auto& f : files) std::cout << f.string() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quantum-noise simulator for a squeezed-light hybrid rf/dc magnetometer"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(hopm::kToolVersion));

  Common common;
  auto* simulate = app.add_subcommand("simulate", "one seeded run per condition: I/Q record and trajectory");
  auto* noise = app.add_subcommand("noise", "noise spectra, fits and budget decomposition");
  auto* sensitivity = app.add_subcommand("sensitivity", "responsivity and equivalent magnetic noise");
  auto* sweep = app.add_subcommand("sweep", "noise pipeline over values of one config entry");
  auto* check = app.add_subcommand("check", "analytic-oracle suite at the configured operating point");
  for (auto* sub : {simulate, noise, sensitivity, sweep, check}) add_common(sub, common);

  hopm::SimulateOptions sim;
  simulate->add_flag("--trajectory", sim.trajectory, "also write t, F_x, F_y, F_z");
  simulate->add_option("--stride", sim.stride, "trajectory sample stride")->check(CLI::PositiveNumber);

  std::string axis;
  std::vector<double> values;
  sweep->add_option("--axis", axis, "dotted config path, e.g. fields.psi_deg")->required();
  sweep->add_option("--values", values, "values to run")->delimiter(',');

  CLI11_PARSE(app, argc, argv);

  std::uint64_t hash = 0;
  try {
    const auto cfg = load(common);
    hash = cfg.hash;
    const auto opts = options(common, cfg);
    if (simulate->parsed()) {
      list(hopm::simulate_run(cfg, opts, sim));
    } else if (noise->parsed()) {
      list(hopm::run_noise(cfg, opts).files);
    } else if (sensitivity->parsed()) {
      list(hopm::run_sensitivity(cfg, opts).files);
    } else if (sweep->parsed()) {
      list(hopm::sweep(cfg, axis, values, opts).files);
    } else if (check->parsed()) {
      const auto report = hopm::check(cfg, opts);
      for (const auto& r : report.rows) {
        std::printf("%-40s %s%s\n", r.quantity.c_str(), r.pass ? "pass" : "FAIL", r.asserted ? "" : " (not asserted)");
      }
      list(report.files);
      if (!report.passed()) return hopm::kExitNumerical;
    }
  } catch (const hopm::StageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const hopm::ConfigError& e) {
    std::cerr << "config error (" << hopm::hex_hash(hash) << "): " << e.what() << '\n';
    return hopm::kExitConfig;
  } catch (const hopm::IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return hopm::kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return hopm::kExitNumerical;
  }
  return hopm::kExitOk;
}
