#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "hopm/analytic.hpp"
#include "hopm/noise_model.hpp"
#include "hopm/pipeline.hpp"
#include "hopm/sensitivity.hpp"

namespace hopm {

inline constexpr const char* kToolVersion = "0.1.0";

/// Process exit codes of the command-line runner.
enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitNumerical = 3, kExitIo = 4 };

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Failure inside a pipeline stage; carries the stage name, the config hash
/// and the exit code the runner should return.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, std::uint64_t hash, const std::string& what, int exit_code);
  const std::string& stage() const { return stage_; }
  std::uint64_t config_hash() const { return hash_; }
  int exit_code() const { return code_; }

 private:
  std::string stage_;
  std::uint64_t hash_;
  int code_;
};

struct ProbeCondition {
  std::string name;
  double squeezing_db = 0.0;
  double antisqueezing_db = 0.0;
};

std::uint64_t fnv1a(std::string_view bytes);

/// Built-in configuration: psi = 45 deg, coherent / squeezed (1.6 dB, 3 dB) /
/// antisqueezed probes, 50 iterations.
nlohmann::json default_config_json();

/// Validated configuration. `json` is the defaults merged with user values.
struct ExperimentConfig {
  nlohmann::json json;
  std::uint64_t hash = 0;
  std::vector<ProbeCondition> conditions;
  SimContext base;  // coherent probe, demodulation phase not yet calibrated
  int iterations = 50;
  std::uint64_t seed = 1;
  int bins_per_decade = 20;
  std::vector<double> test_freqs;
  int response_iterations = 0;
  std::string output_dir;

  /// Operating point with the probe of one condition.
  SimContext context(const ProbeCondition& condition) const;
  const ProbeCondition& condition(std::string_view name) const;
  std::size_t condition_index(std::string_view name) const;
};

/// Merges `overrides` over the defaults (RFC 7386) and validates. Unknown
/// keys and invalid values raise ConfigError.
ExperimentConfig load_config(const nlohmann::json& overrides = nlohmann::json::object());
ExperimentConfig load_config_file(const std::filesystem::path& path,
                                  const nlohmann::json& extra = nlohmann::json::object());

/// Resolves a dotted path ("fields.psi_deg", "probe.conditions.1.antisqueezing_db")
/// to a numeric entry; throws ConfigError otherwise.
double config_value(const nlohmann::json& config, const std::string& path);
nlohmann::json with_value(const nlohmann::json& config, const std::string& path, double value);

struct RunOptions {
  std::filesystem::path out_dir = "hopm_out";
  int jobs = 1;
  std::vector<std::string> conditions;  // empty: all
};

struct ConditionResult {
  ProbeCondition condition;
  SimContext context;
  QuadratureSpectra polarized;
  QuadratureSpectra unpolarized;
  std::array<FitResult, 2> fit_polarized;    // I, Q
  std::array<FitResult, 2> fit_unpolarized;  // I, Q
  std::array<BudgetDecomposition, 2> decomposition;
};

struct NoiseReport {
  std::vector<ConditionResult> conditions;
  std::vector<std::filesystem::path> files;
};

/// Polarized and unpolarized spectra, fits and budget decomposition for each
/// requested condition.
NoiseReport run_noise(const ExperimentConfig& config, const RunOptions& options);

struct ChannelResult {
  ToneChannel channel = ToneChannel::kDc;
  std::string condition;
  StaticResponse static_response;
  Responsivity responsivity;
  Spectrum noise;  // quadrature read by the channel
  MagneticNoiseSpectrum magnetic;
};

struct SensitivityReport {
  std::vector<ChannelResult> results;
  std::vector<std::filesystem::path> files;
};

/// Responsivity calibration, ratio-method spectrum and equivalent magnetic
/// noise for the dc and rf channels under every requested condition. Tone
/// runs reuse the same seeds for every condition.
SensitivityReport run_sensitivity(const ExperimentConfig& config, const RunOptions& options);

struct SweepRow {
  double value = 0.0;
  ConditionResult result;
};

struct SweepReport {
  std::string axis;
  std::vector<SweepRow> rows;
  std::vector<std::filesystem::path> files;
};

/// Full noise pipeline for one condition (the first requested, default
/// coherent) at each value of `axis`. The path is resolved before any run.
SweepReport sweep(const ExperimentConfig& config, const std::string& axis,
                  std::span<const double> values, const RunOptions& options);

struct CheckReport {
  std::vector<OracleRow> rows;
  std::vector<std::filesystem::path> files;

  bool passed() const;
};

/// Analytic-oracle suite at the configured operating point.
CheckReport check(const ExperimentConfig& config, const RunOptions& options);

struct SimulateOptions {
  bool trajectory = false;
  std::size_t stride = 1;
};

/// One polarized run per requested condition: demodulated (t, I, Q) and,
/// optionally, the spin trajectory (t, F_x, F_y, F_z).
std::vector<std::filesystem::path> simulate_run(const ExperimentConfig& config,
                                                const RunOptions& options,
                                                const SimulateOptions& sim = {});

}  // namespace hopm
