#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "hopm/experiment.hpp"
#include "hopm/text_io.hpp"

using namespace hopm;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("hopm_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json quick() { return {{"run", {{"n_iterations", 3}}}}; }

int run_cli(const std::string& args) {
  const std::string cmd = std::string(HOPM_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("defaults describe three probe conditions at 45 degrees") {
  const ExperimentConfig c = load_config();
  REQUIRE(c.conditions.size() == 3);
  CHECK(c.conditions[0].name == "coherent");
  CHECK(c.conditions[1].squeezing_db == 1.6);
  CHECK(c.conditions[1].antisqueezing_db == 3.0);
  CHECK(c.iterations == 50);
  CHECK(c.base.fields.psi == doctest::Approx(std::numbers::pi / 4.0));
  CHECK(c.base.config_hash == c.hash);
  const SimContext sq = c.context(c.condition("squeezed"));
  CHECK(sq.probe.xi2 == doctest::Approx(std::pow(10.0, -0.16)));
  CHECK(sq.probe.xibar2 == doctest::Approx(std::pow(10.0, 0.3)));
  CHECK_THROWS_AS(c.condition("vacuum"), ConfigError);
}

TEST_CASE("overrides merge over defaults and change the hash") {
  const ExperimentConfig a = load_config();
  const ExperimentConfig b = load_config({{"fields", {{"psi_deg", 30.0}}}});
  CHECK(a.hash != b.hash);
  CHECK(b.base.fields.psi == doctest::Approx(std::numbers::pi / 6.0));
  CHECK(b.base.spin.omega_p == a.base.spin.omega_p);
  CHECK(load_config({{"fields", {{"psi_deg", 30.0}}}}).hash == b.hash);
}

TEST_CASE("invalid configurations are rejected") {
  CHECK_THROWS_AS(load_config({{"feilds", {{"psi_deg", 30.0}}}}), ConfigError);
  CHECK_THROWS_AS(load_config({{"spin", {{"pump_mode", "cw"}}}}), ConfigError);
  CHECK_THROWS_AS(load_config({{"fields", {{"psi_deg", 120.0}}}}), ConfigError);
  CHECK_THROWS_AS(load_config({{"run", {{"n_iterations", 0}}}}), ConfigError);
  CHECK_THROWS_AS(load_config({{"run", {{"decimation", 2000}}}}), ConfigError);
  CHECK_THROWS_AS(load_config({{"spin", {{"gamma", "fast"}}}}), ConfigError);
  json dup = default_config_json();
  dup["probe"]["conditions"][1]["name"] = "coherent";
  CHECK_THROWS_AS(load_config(dup), ConfigError);
  CHECK_THROWS_AS(load_config_file("/nonexistent/config.json"), IoError);
}

TEST_CASE("dotted paths resolve to numeric entries") {
  const json j = default_config_json();
  CHECK(config_value(j, "fields.psi_deg") == 45.0);
  CHECK(config_value(j, "probe.conditions.2.squeezing_db") == -3.0);
  CHECK_THROWS_AS(config_value(j, "fields.nope"), ConfigError);
  CHECK_THROWS_AS(config_value(j, "spin.pump_mode"), ConfigError);
  CHECK_THROWS_AS(config_value(j, "fields..psi_deg"), ConfigError);
  const json k = with_value(j, "run.n_iterations", 7);
  CHECK(k["run"]["n_iterations"].get<int>() == 7);
  CHECK_THROWS_AS(with_value(j, "run.n_iterations", 2.5), ConfigError);
}

TEST_CASE("noise run writes every artifact and is reproducible") {
  const ExperimentConfig c = load_config(quick());
  RunOptions o;
  o.out_dir = scratch("noise_a");
  const NoiseReport a = run_noise(c, o);
  CHECK(a.conditions.size() == 3);
  std::size_t spectra = 0, logbin = 0, fits = 0;
  for (const auto& f : a.files) {
    const std::string dir = f.parent_path().filename().string();
    spectra += dir == "spectra";
    logbin += dir == "spectra_logbin";
    fits += dir == "fits";
    CHECK(fs::exists(f));
    const std::string text = slurp(f);
    CHECK(text.find("# config_hash: " + hex_hash(c.hash)) != std::string::npos);
    CHECK(text.find("# tool: hopm") != std::string::npos);
    CHECK(text.find("# seed: 1") != std::string::npos);
  }
  CHECK(spectra == 12);
  CHECK(logbin == 12);
  CHECK(fits == 12);
  CHECK(fs::exists(o.out_dir / "budget_summary.txt"));

  RunOptions o2 = o;
  o2.out_dir = scratch("noise_b");
  o2.jobs = 3;
  const NoiseReport b = run_noise(c, o2);
  REQUIRE(a.files.size() == b.files.size());
  for (std::size_t i = 0; i < a.files.size(); ++i) {
    CHECK(slurp(a.files[i]) == slurp(b.files[i]));
  }
}

TEST_CASE("condition selection and seed override") {
  const ExperimentConfig c = load_config(quick());
  RunOptions o;
  o.out_dir = scratch("noise_sel");
  o.conditions = {"squeezed"};
  const NoiseReport r = run_noise(c, o);
  REQUIRE(r.conditions.size() == 1);
  CHECK(r.conditions[0].condition.name == "squeezed");
  o.conditions = {"bogus"};
  CHECK_THROWS_AS(run_noise(c, o), ConfigError);
}

TEST_CASE("sweep handles empty and unresolvable axes") {
  const ExperimentConfig c = load_config(quick());
  RunOptions o;
  o.out_dir = scratch("sweep");
  const std::vector<double> none;
  const SweepReport empty = sweep(c, "fields.psi_deg", none, o);
  CHECK(empty.rows.empty());
  const auto table = read_columns(o.out_dir / "sweep_fields_psi_deg.txt");
  CHECK(table.empty());

  const std::vector<double> values{0.0, 45.0};
  const fs::path bad = scratch("sweep_bad");
  o.out_dir = bad;
  CHECK_THROWS_AS(sweep(c, "fields.not_there", values, o), ConfigError);
  CHECK_FALSE(fs::exists(bad));

  o.out_dir = scratch("sweep_run");
  const SweepReport r = sweep(c, "fields.psi_deg", values, o);
  REQUIRE(r.rows.size() == 2);
  CHECK(r.rows[0].result.context.fields.psi == 0.0);
  CHECK(fs::exists(o.out_dir / "sweep_fields_psi_deg.txt"));
  CHECK(fs::exists(o.out_dir / "sweep" / "1" / "fits" / "coherent_polarized_Q.txt"));
}

TEST_CASE("simulate writes I/Q records and trajectories") {
  const ExperimentConfig c = load_config({{"run", {{"record_s", 0.01}}}});
  RunOptions o;
  o.out_dir = scratch("simulate");
  o.conditions = {"coherent"};
  const auto files = simulate_run(c, o, {true, 50});
  REQUIRE(files.size() == 2);
  const auto iq = read_columns(files[0]);
  REQUIRE(iq.size() == 3);
  CHECK(iq[0].size() == static_cast<std::size_t>(std::llround(c.base.duration() / c.base.output_dt())));
  const auto tr = read_columns(files[1]);
  REQUIRE(tr.size() == 4);
  CHECK(tr[0][1] - tr[0][0] == doctest::Approx(50 * c.base.dt));
}

TEST_CASE("command-line exit codes") {
  CHECK(run_cli("--help") == 0);
  const fs::path dir = scratch("cli");
  fs::create_directories(dir);
  {
    std::ofstream(dir / "bad.json") << R"({"fields": {"psi_deg": "x"}})";
    std::ofstream(dir / "unknown.json") << R"({"nope": 1})";
    std::ofstream(dir / "broken.json") << "{";
    std::ofstream(dir / "quick.json") << R"({"run": {"n_iterations": 2, "record_s": 0.02}})";
    std::ofstream(dir / "blocker") << "file";
  }
  CHECK(run_cli("noise --config " + (dir / "bad.json").string()) == kExitConfig);
  CHECK(run_cli("noise --config " + (dir / "unknown.json").string()) == kExitConfig);
  CHECK(run_cli("noise --config " + (dir / "broken.json").string()) == kExitConfig);
  CHECK(run_cli("sweep --axis fields.nothing --values 1 --config " + (dir / "quick.json").string()) ==
        kExitConfig);
  CHECK(run_cli("noise --condition coherent --config " + (dir / "quick.json").string() + " --out " +
                (dir / "blocker" / "sub").string()) == kExitIo);
  CHECK(run_cli("simulate --condition coherent --seed 9 --config " + (dir / "quick.json").string() +
                " --out " + (dir / "sim").string()) == kExitOk);
  CHECK(slurp(dir / "sim" / "simulate" / "coherent_iq.txt").find("# seed: 9") != std::string::npos);
  CHECK(run_cli("sweep --axis fields.psi_deg --config " + (dir / "quick.json").string() + " --out " +
                (dir / "empty").string()) == kExitOk);
}
