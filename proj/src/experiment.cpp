#include "hopm/experiment.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "hopm/rng.hpp"
#include "hopm/text_io.hpp"

namespace hopm {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kZ95 = 1.959963984540054;
constexpr std::uint64_t kResponseStreams = 1000;

template <class F>
auto stage(const char* name, std::uint64_t hash, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const IoError& e) {
    throw StageError(name, hash, e.what(), kExitIo);
  } catch (const ConfigError& e) {
    throw StageError(name, hash, e.what(), kExitConfig);
  } catch (const std::invalid_argument& e) {
    throw StageError(name, hash, e.what(), kExitConfig);
  } catch (const std::exception& e) {
    throw StageError(name, hash, e.what(), kExitNumerical);
  }
}

void check_keys(const json& user, const json& defaults, const std::string& path) {
  if (!user.is_object() || !defaults.is_object()) return;
  for (const auto& [key, value] : user.items()) {
    const std::string where = path.empty() ? key : path + "." + key;
    if (!defaults.contains(key)) throw ConfigError("unknown config key '" + where + "'");
    check_keys(value, defaults.at(key), where);
  }
}

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> parts;
  std::stringstream ss(path);
  std::string item;
  while (std::getline(ss, item, '.')) parts.push_back(item);
  if (parts.empty() || std::any_of(parts.begin(), parts.end(), [](const auto& p) { return p.empty(); })) {
    throw ConfigError("malformed config path '" + path + "'");
  }
  return parts;
}

json::json_pointer to_pointer(const json& config, const std::string& path) {
  json::json_pointer ptr;
  const json* node = &config;
  for (const auto& part : split_path(path)) {
    if (node->is_object() && node->contains(part)) {
      node = &node->at(part);
    } else if (node->is_array() && !part.empty() && std::all_of(part.begin(), part.end(), ::isdigit) &&
               std::stoul(part) < node->size()) {
      node = &node->at(std::stoul(part));
    } else {
      throw ConfigError("config path '" + path + "' does not resolve");
    }
    ptr /= part;
  }
  if (!node->is_number()) throw ConfigError("config path '" + path + "' is not a scalar number");
  return ptr;
}

std::vector<std::size_t> selected_conditions(const ExperimentConfig& config, const RunOptions& options) {
  std::vector<std::size_t> out;
  if (options.conditions.empty()) {
    for (std::size_t i = 0; i < config.conditions.size(); ++i) out.push_back(i);
  } else {
    for (const auto& name : options.conditions) out.push_back(config.condition_index(name));
  }
  return out;
}

std::uint64_t condition_seed(const ExperimentConfig& config, std::size_t index) {
  return derive_seed(config.seed, index);
}

// Polarized and unpolarized ensembles draw independent streams.
std::uint64_t run_seed(const ExperimentConfig& config, std::size_t index, bool polarized, std::size_t iteration) {
  return derive_seed(derive_seed(condition_seed(config, index), polarized ? 0 : 1), iteration);
}

FileHeader base_header(const ExperimentConfig& config) {
  FileHeader h;
  h.add("tool", std::string("hopm ") + kToolVersion);
  h.add("config_hash", hex_hash(config.hash));
  h.add("seed", std::to_string(config.seed));
  return h;
}

std::string ensemble_name(bool polarized) { return polarized ? "polarized" : "unpolarized"; }

void write_spectrum(const fs::path& path, FileHeader header, const Spectrum& s) {
  header.add("n_averages", std::to_string(s.n_averages));
  header.add("window", window_name(s.window));
  header.add("enbw_hz", s.enbw);
  header.add("df_hz", s.df);
  if (s.bin_counts.empty()) {
    write_columns(path, header, {"freq_hz", "psd_signal2_per_hz"}, {s.freqs, s.psd});
  } else {
    std::vector<double> counts(s.bin_counts.begin(), s.bin_counts.end());
    write_columns(path, header, {"freq_hz", "psd_signal2_per_hz", "bins_averaged"}, {s.freqs, s.psd, counts});
  }
}

std::vector<std::string> estimate_row(const std::string& name, const ParameterEstimate& e,
                                      const std::string& units) {
  return {name,
          format_number(e.value),
          format_number(e.ci68.low),
          format_number(e.ci68.high),
          format_number(e.ci95.low),
          format_number(e.ci95.high),
          units};
}

void write_fit(const fs::path& path, FileHeader header, const FitResult& f) {
  header.add("mode", fit_mode_name(f.mode));
  header.add("xi2", f.budget.xi2);
  header.add("xibar2", f.budget.xibar2);
  header.add("log_likelihood", f.log_likelihood);
  header.add("n_points", std::to_string(f.n_points));
  header.add("starts_converged", std::to_string(f.starts_converged));
  header.add("degenerate_linewidth", f.degenerate_linewidth ? "true" : "false");
  const std::string atomic = f.mode == FitMode::kPolarized ? "spn_plus_xibar2_mba" : "spn";
  write_rows(path, header,
             {"parameter", "estimate", "ci68_low", "ci68_high", "ci95_low", "ci95_high", "units"},
             {estimate_row("psn", f.psn, "signal2_per_hz"),
              estimate_row(atomic, f.atomic, "signal2_per_hz"),
              estimate_row("delta_omega", f.delta_omega, "rad_per_s")});
}

std::vector<std::string> budget_cells(const BudgetDecomposition& d, const ConditionResult& r) {
  const int q = d.quadrature == Quadrature::kI ? 0 : 1;
  return {quadrature_name(d.quadrature),
          format_number(d.psn),
          format_number(d.psn_sigma),
          format_number(d.spn),
          format_number(d.spn_sigma),
          format_number(d.mba_level),
          format_number(d.mba_sigma),
          format_number(d.mba_level_raw),
          format_number(d.mba_coefficient),
          format_number(d.xibar2),
          format_number(r.fit_unpolarized[q].delta_omega.value),
          format_number(r.fit_polarized[q].delta_omega.value),
          d.clamped ? "1" : "0"};
}

const std::vector<std::string> kBudgetColumns{
    "quadrature",      "psn_signal2_per_hz", "psn_sigma",       "spn_signal2_per_hz",
    "spn_sigma",       "mba_level_signal2_per_hz", "mba_sigma", "mba_level_raw",
    "mba_coefficient", "xibar2",             "delta_omega_unpolarized_rad_per_s",
    "delta_omega_polarized_rad_per_s", "clamped"};

SimContext calibrated_base(const ExperimentConfig& config) {
  return stage("calibrate", config.hash, [&] {
    SimContext c = config.base;
    calibrate(c);
    return c;
  });
}

SimContext with_probe(const ExperimentConfig& config, const SimContext& cal, std::size_t ci) {
  SimContext ctx = config.context(config.conditions[ci]);
  ctx.demod_phase = cal.demod_phase;
  return ctx;
}

// Spectra, fits and decomposition for a set of conditions. Jobs are indexed
// by (condition, ensemble, iteration) so results do not depend on `jobs`.
std::vector<ConditionResult> noise_pipeline(const ExperimentConfig& config,
                                            const std::vector<std::size_t>& which, int jobs) {
  const SimContext cal = calibrated_base(config);
  std::vector<ConditionResult> results(which.size());
  for (std::size_t k = 0; k < which.size(); ++k) {
    results[k].condition = config.conditions[which[k]];
    results[k].context = with_probe(config, cal, which[k]);
  }

  const auto iters = static_cast<std::size_t>(config.iterations);
  std::vector<QuadratureSpectra> parts(which.size() * 2 * iters);
  stage("simulate", config.hash, [&] {
    parallel_for(parts.size(), jobs, [&](std::size_t job) {
      const std::size_t k = job / (2 * iters);
      const bool polarized = (job / iters) % 2 == 0;
      const std::size_t it = job % iters;
      parts[job] = record_spectra(simulate_iq(results[k].context, polarized, run_seed(config, which[k], polarized, it)));
    });
  });

  stage("spectra", config.hash, [&] {
    for (std::size_t k = 0; k < which.size(); ++k) {
      for (int e = 0; e < 2; ++e) {
        std::vector<Spectrum> si;
        std::vector<Spectrum> sq;
        for (std::size_t it = 0; it < iters; ++it) {
          auto& p = parts[(k * 2 + static_cast<std::size_t>(e)) * iters + it];
          si.push_back(std::move(p.I));
          sq.push_back(std::move(p.Q));
        }
        QuadratureSpectra avg{average_spectra(si), average_spectra(sq)};
        avg.I.config_hash = avg.Q.config_hash = config.hash;
        (e == 0 ? results[k].polarized : results[k].unpolarized) = std::move(avg);
      }
    }
  });

  stage("fit", config.hash, [&] {
    parallel_for(which.size() * 4, jobs, [&](std::size_t job) {
      ConditionResult& r = results[job / 4];
      const bool polarized = (job / 2) % 2 == 0;
      const int q = static_cast<int>(job % 2);
      const Quadrature quad = q == 0 ? Quadrature::kI : Quadrature::kQ;
      const QuadratureSpectra& s = polarized ? r.polarized : r.unpolarized;
      const FitOptions o =
          r.context.fit_options(polarized ? FitMode::kPolarized : FitMode::kUnpolarized, quad);
      (polarized ? r.fit_polarized : r.fit_unpolarized)[static_cast<std::size_t>(q)] =
          fit_noise_model(q == 0 ? s.I : s.Q, o);
    });
  });

  stage("decompose", config.hash, [&] {
    for (auto& r : results) {
      for (std::size_t q = 0; q < 2; ++q) {
        r.decomposition[q] = decompose_budget(r.fit_unpolarized[q], r.fit_polarized[q]);
      }
    }
  });
  return results;
}

std::vector<fs::path> write_condition(const ExperimentConfig& config, const ConditionResult& r,
                                      const fs::path& dir, bool spectra) {
  std::vector<fs::path> files;
  for (int e = 0; e < 2; ++e) {
    const bool polarized = e == 0;
    const QuadratureSpectra& s = polarized ? r.polarized : r.unpolarized;
    for (std::size_t q = 0; q < 2; ++q) {
      const Quadrature quad = q == 0 ? Quadrature::kI : Quadrature::kQ;
      const std::string stem = r.condition.name + "_" + ensemble_name(polarized) + "_" + quadrature_name(quad);
      FileHeader h = base_header(config);
      h.add("condition", r.condition.name);
      h.add("ensemble", ensemble_name(polarized));
      h.add("quadrature", quadrature_name(quad));
      if (spectra) {
        const Spectrum& raw = q == 0 ? s.I : s.Q;
        files.push_back(dir / "spectra" / (stem + ".txt"));
        write_spectrum(files.back(), h, raw);
        files.push_back(dir / "spectra_logbin" / (stem + ".txt"));
        FileHeader hb = h;
        hb.add("bins_per_decade", std::to_string(config.bins_per_decade));
        write_spectrum(files.back(), hb, log_bin(raw, config.bins_per_decade));
      }
      files.push_back(dir / "fits" / (stem + ".txt"));
      write_fit(files.back(), h, (polarized ? r.fit_polarized : r.fit_unpolarized)[q]);
    }
  }
  return files;
}

std::string sanitize(const std::string& s) {
  std::string out = s;
  for (auto& c : out) {
    if (!std::isalnum(static_cast<unsigned char>(c))) c = '_';
  }
  return out;
}

OracleRow relative_row(std::string name, double predicted, double simulated, double tolerance,
                       bool asserted) {
  OracleRow r;
  r.quantity = std::move(name);
  r.predicted = predicted;
  r.simulated = simulated;
  r.ratio = predicted != 0.0 ? simulated / predicted : 0.0;
  r.pass = std::abs(simulated - predicted) <= tolerance * std::abs(predicted);
  r.asserted = asserted;
  return r;
}

OracleRow interval_row(std::string name, double predicted, double simulated, double sigma,
                       bool asserted) {
  OracleRow r;
  r.quantity = std::move(name);
  r.predicted = predicted;
  r.simulated = simulated;
  r.ratio = predicted != 0.0 ? simulated / predicted : 0.0;
  r.pass = std::abs(simulated - predicted) <= kZ95 * sigma;
  r.asserted = asserted;
  return r;
}

}  // namespace

StageError::StageError(std::string stage, std::uint64_t hash, const std::string& what, int exit_code)
    : std::runtime_error("stage '" + stage + "' failed (config " + hex_hash(hash) + "): " + what),
      stage_(std::move(stage)),
      hash_(hash),
      code_(exit_code) {}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

json default_config_json() {
  const SimContext d = default_context(std::numbers::pi / 4.0);
  json conditions = json::array();
  conditions.push_back({{"name", "coherent"}, {"squeezing_db", 0.0}, {"antisqueezing_db", 0.0}});
  conditions.push_back({{"name", "squeezed"}, {"squeezing_db", 1.6}, {"antisqueezing_db", 3.0}});
  conditions.push_back({{"name", "antisqueezed"}, {"squeezing_db", -3.0}, {"antisqueezing_db", -1.6}});
  json j;
  j["probe"] = {{"photon_flux", d.probe.photon_flux}, {"conditions", conditions}};
  j["fields"] = {{"psi_deg", 45.0}, {"detuning_hz", 0.0}, {"b_rf_amp_t", 0.0}};
  j["spin"] = {{"gamma", d.spin.gamma},
               {"relaxation", d.spin.relaxation},
               {"f_max", d.spin.f_max},
               {"pump_rate", d.spin.pump_rate},
               {"pump_duty", d.spin.pump_duty},
               {"pump_freq_hz", d.spin.omega_p / kTwoPi},
               {"pump_phase", d.spin.pump_phase},
               {"coupling", d.spin.coupling},
               {"spn_strength", d.spin.spn_strength},
               {"pump_mode", "pulsed"}};
  j["run"] = {{"settle_s", d.settle},
              {"record_s", d.record},
              {"steps_per_period", 200},
              {"decimation", d.decimation},
              {"n_iterations", 50},
              {"seed", 1},
              {"unpolarized_mode", "depolarizing_pump"}};
  j["analysis"] = {{"bins_per_decade", 20},
                   {"fit_f_min_hz", d.fit_f_min},
                   {"fit_f_max_hz", d.fit_f_max},
                   {"mask_hz", json::array()},
                   {"test_freqs_hz", {20.0, 50.0, 100.0, 200.0, 300.0, 500.0, 1000.0, 2000.0, 3000.0}},
                   {"response_iterations", 0}};
  j["outputs"] = {{"directory", "hopm_out"}};
  return j;
}

SimContext ExperimentConfig::context(const ProbeCondition& c) const {
  SimContext ctx = base;
  ctx.probe = make_probe(base.probe.photon_flux, c.squeezing_db, c.antisqueezing_db);
  return ctx;
}

std::size_t ExperimentConfig::condition_index(std::string_view name) const {
  for (std::size_t i = 0; i < conditions.size(); ++i) {
    if (conditions[i].name == name) return i;
  }
  throw ConfigError("unknown probe condition '" + std::string(name) + "'");
}

const ProbeCondition& ExperimentConfig::condition(std::string_view name) const {
  return conditions[condition_index(name)];
}

ExperimentConfig load_config(const json& overrides) {
  if (!overrides.is_object()) throw ConfigError("config must be a JSON object");
  const json defaults = default_config_json();
  check_keys(overrides, defaults, "");
  ExperimentConfig cfg;
  cfg.json = defaults;
  cfg.json.merge_patch(overrides);
  cfg.hash = fnv1a(cfg.json.dump());

  try {
    const json& j = cfg.json;
    SimContext& b = cfg.base;
    const json& sp = j.at("spin");
    b.spin.gamma = sp.at("gamma").get<double>();
    b.spin.relaxation = sp.at("relaxation").get<double>();
    b.spin.f_max = sp.at("f_max").get<double>();
    b.spin.pump_rate = sp.at("pump_rate").get<double>();
    b.spin.pump_duty = sp.at("pump_duty").get<double>();
    b.spin.omega_p = kTwoPi * sp.at("pump_freq_hz").get<double>();
    b.spin.pump_phase = sp.at("pump_phase").get<double>();
    b.spin.coupling = sp.at("coupling").get<double>();
    b.spin.spn_strength = sp.at("spn_strength").get<double>();
    const auto mode = sp.at("pump_mode").get<std::string>();
    if (mode == "pulsed") {
      b.spin.pump_mode = PumpMode::kPulsed;
    } else if (mode == "kick") {
      b.spin.pump_mode = PumpMode::kKick;
    } else {
      throw ConfigError("spin.pump_mode must be 'pulsed' or 'kick'");
    }
    if (!(b.spin.gamma > 0.0)) throw ConfigError("spin.gamma must be positive");
    if (!(b.spin.omega_p > 0.0)) throw ConfigError("spin.pump_freq_hz must be positive");

    const json& fl = j.at("fields");
    b.fields.psi = fl.at("psi_deg").get<double>() * std::numbers::pi / 180.0;
    b.fields.b_dc = (b.spin.omega_p + kTwoPi * fl.at("detuning_hz").get<double>()) / b.spin.gamma;
    b.fields.b_rf_amp = fl.at("b_rf_amp_t").get<double>();
    b.fields.omega_rf = b.spin.omega_p;
    b.fields.b_rf_phase = in_phase_rf_phase(b.spin);

    const json& run = j.at("run");
    const int steps = run.at("steps_per_period").get<int>();
    if (steps < 1) throw ConfigError("run.steps_per_period must be >= 1");
    b.dt = kTwoPi / b.spin.omega_p / steps;
    b.settle = run.at("settle_s").get<double>();
    b.record = run.at("record_s").get<double>();
    const int decimation = run.at("decimation").get<int>();
    if (decimation < 1) throw ConfigError("run.decimation must be >= 1");
    b.decimation = static_cast<std::size_t>(decimation);
    cfg.iterations = run.at("n_iterations").get<int>();
    if (cfg.iterations < 1) throw ConfigError("run.n_iterations must be >= 1");
    cfg.seed = run.at("seed").get<std::uint64_t>();
    const auto um = run.at("unpolarized_mode").get<std::string>();
    if (um == "depolarizing_pump") {
      b.unpolarized_mode = UnpolarizedMode::kDepolarizingPump;
    } else if (um == "pump_off") {
      b.unpolarized_mode = UnpolarizedMode::kPumpOff;
    } else {
      throw ConfigError("run.unpolarized_mode must be 'depolarizing_pump' or 'pump_off'");
    }

    const json& an = j.at("analysis");
    cfg.bins_per_decade = an.at("bins_per_decade").get<int>();
    if (cfg.bins_per_decade < 1) throw ConfigError("analysis.bins_per_decade must be >= 1");
    b.fit_f_min = an.at("fit_f_min_hz").get<double>();
    b.fit_f_max = an.at("fit_f_max_hz").get<double>();
    for (const auto& band : an.at("mask_hz")) {
      if (!band.is_array() || band.size() != 2) throw ConfigError("analysis.mask_hz entries must be [lo, hi]");
      b.mask.push_back({band[0].get<double>(), band[1].get<double>()});
    }
    cfg.test_freqs = an.at("test_freqs_hz").get<std::vector<double>>();
    cfg.response_iterations = an.at("response_iterations").get<int>();
    if (cfg.response_iterations < 0) throw ConfigError("analysis.response_iterations must be >= 0");
    cfg.output_dir = j.at("outputs").at("directory").get<std::string>();

    const json& pr = j.at("probe");
    b.probe.photon_flux = pr.at("photon_flux").get<double>();
    for (const auto& c : pr.at("conditions")) {
      ProbeCondition pc{c.at("name").get<std::string>(), c.at("squeezing_db").get<double>(),
                        c.at("antisqueezing_db").get<double>()};
      for (const auto& other : cfg.conditions) {
        if (other.name == pc.name) throw ConfigError("duplicate probe condition '" + pc.name + "'");
      }
      make_probe(b.probe.photon_flux, pc.squeezing_db, pc.antisqueezing_db);
      cfg.conditions.push_back(pc);
    }
    if (cfg.conditions.empty()) throw ConfigError("probe.conditions is empty");
    b.config_hash = cfg.hash;
    b.validate();
    if (1.0 / b.output_dt() < 4.0 * b.fit_f_max) {
      throw ConfigError("output rate is below 4x the analysis bandwidth");
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return cfg;
}

ExperimentConfig load_config_file(const fs::path& path, const json& extra) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  json user;
  try {
    user = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  if (!user.is_object()) throw ConfigError("config " + path.string() + " must hold a JSON object");
  check_keys(extra, default_config_json(), "");
  user.merge_patch(extra);
  return load_config(user);
}

double config_value(const json& config, const std::string& path) {
  return config.at(to_pointer(config, path)).get<double>();
}

json with_value(const json& config, const std::string& path, double value) {
  json out = config;
  const auto ptr = to_pointer(config, path);
  if (out.at(ptr).is_number_integer() || out.at(ptr).is_number_unsigned()) {
    if (value != std::floor(value)) throw ConfigError("config path '" + path + "' takes integers");
    out[ptr] = static_cast<std::int64_t>(value);
  } else {
    out[ptr] = value;
  }
  return out;
}

NoiseReport run_noise(const ExperimentConfig& config, const RunOptions& options) {
  NoiseReport report;
  report.conditions = noise_pipeline(config, selected_conditions(config, options), options.jobs);
  stage("write", config.hash, [&] {
    std::vector<std::vector<std::string>> rows;
    for (const auto& r : report.conditions) {
      auto files = write_condition(config, r, options.out_dir, true);
      report.files.insert(report.files.end(), files.begin(), files.end());
      for (const auto& d : r.decomposition) {
        auto cells = budget_cells(d, r);
        cells.insert(cells.begin(), r.condition.name);
        rows.push_back(std::move(cells));
      }
    }
    std::vector<std::string> cols = kBudgetColumns;
    cols.insert(cols.begin(), "condition");
    report.files.push_back(options.out_dir / "budget_summary.txt");
    write_rows(report.files.back(), base_header(config), cols, rows);
  });
  return report;
}

SensitivityReport run_sensitivity(const ExperimentConfig& config, const RunOptions& options) {
  SensitivityReport report;
  const SimContext cal = calibrated_base(config);
  const auto which = selected_conditions(config, options);

  std::vector<QuadratureSpectra> noise(which.size());
  stage("simulate", config.hash, [&] {
    for (std::size_t k = 0; k < which.size(); ++k) {
      noise[k] = noise_spectra(with_probe(config, cal, which[k]), true, config.iterations,
                               derive_seed(condition_seed(config, which[k]), 0), options.jobs);
    }
  });

  for (ToneChannel channel : {ToneChannel::kDc, ToneChannel::kRf}) {
    const double bound = stage("linear_bound", config.hash, [&] { return linear_bound(channel, cal); });
    const double amplitude = 0.1 * bound;
    const std::vector<double> ladder{-amplitude, -0.5 * amplitude, 0.5 * amplitude, amplitude};
    for (std::size_t k = 0; k < which.size(); ++k) {
      const std::size_t ci = which[k];
      const SimContext ctx = with_probe(config, cal, ci);
      const std::uint64_t seed =
          derive_seed(derive_seed(config.seed, kResponseStreams), static_cast<std::uint64_t>(channel));
      const ResponseOptions ro{config.response_iterations, seed, options.jobs};
      ChannelResult r;
      r.channel = channel;
      r.condition = config.conditions[ci].name;
      r.static_response = stage("responsivity", config.hash, [&] {
        return responsivity_at_zero(channel, ctx, ladder, ro);
      });
      r.responsivity = stage("responsivity", config.hash, [&] {
        return responsivity_spectrum(channel, ctx, config.test_freqs, amplitude, ro);
      });
      r.noise = channel == ToneChannel::kDc ? noise[k].Q : noise[k].I;
      r.magnetic = stage("equivalent_noise", config.hash, [&] {
        const Responsivity usable = r.responsivity.reliable_only();
        return equivalent_noise(crop(r.noise, usable.freqs.front(), usable.freqs.back()), usable);
      });
      report.results.push_back(std::move(r));
    }
  }

  stage("write", config.hash, [&] {
    for (const auto& r : report.results) {
      const std::string stem = channel_name(r.channel) + "_" + r.condition;
      FileHeader h = base_header(config);
      h.add("condition", r.condition);
      h.add("channel", channel_name(r.channel));
      h.add("quadrature", r.channel == ToneChannel::kDc ? "Q" : "I");
      h.add("r0_signal_per_t", r.responsivity.r0);
      h.add("static_r0_signal_per_t", r.static_response.r0);
      h.add("static_r0_sigma", r.static_response.r0_sigma);
      h.add("static_linear", r.static_response.linear ? "true" : "false");
      h.add("test_amplitude_t", r.responsivity.amplitude);
      report.files.push_back(options.out_dir / "sensitivity" / (stem + ".txt"));
      write_columns(report.files.back(), h, {"freq_hz", "sqrt_s_b_t_per_rthz"},
                    {r.magnetic.freqs, r.magnetic.amplitude_density()});
      const Responsivity& rs = r.responsivity;
      std::vector<double> reliable(rs.reliable.begin(), rs.reliable.end());
      report.files.push_back(options.out_dir / "responsivity" / (stem + ".txt"));
      write_columns(report.files.back(), h,
                    {"freq_hz", "r_ratio", "r_ratio_sigma", "direct_ratio", "snr", "reliable"},
                    {rs.freqs, rs.r_ratio, rs.r_ratio_sigma, rs.direct_ratio, rs.snr, reliable});
    }
  });
  return report;
}

SweepReport sweep(const ExperimentConfig& config, const std::string& axis,
                  std::span<const double> values, const RunOptions& options) {
  SweepReport report;
  report.axis = axis;
  config_value(config.json, axis);
  std::vector<ExperimentConfig> configs;
  for (double v : values) configs.push_back(load_config(with_value(config.json, axis, v)));

  const std::string name = options.conditions.empty() ? config.conditions.front().name
                                                      : options.conditions.front();
  for (std::size_t i = 0; i < configs.size(); ++i) {
    const std::size_t ci = configs[i].condition_index(name);
    SweepRow row;
    row.value = values[i];
    row.result = noise_pipeline(configs[i], {ci}, options.jobs).front();
    report.rows.push_back(std::move(row));
  }

  stage("write", config.hash, [&] {
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < report.rows.size(); ++i) {
      const auto& r = report.rows[i];
      auto files = write_condition(configs[i], r.result, options.out_dir / "sweep" / std::to_string(i), false);
      report.files.insert(report.files.end(), files.begin(), files.end());
      for (const auto& d : r.result.decomposition) {
        auto cells = budget_cells(d, r.result);
        cells.insert(cells.begin(), format_number(r.value));
        cells.push_back(hex_hash(configs[i].hash));
        rows.push_back(std::move(cells));
      }
    }
    std::vector<std::string> cols = kBudgetColumns;
    cols.insert(cols.begin(), "value");
    cols.push_back("config_hash");
    FileHeader h = base_header(config);
    h.add("axis", axis);
    h.add("condition", name);
    report.files.push_back(options.out_dir / ("sweep_" + sanitize(axis) + ".txt"));
    write_rows(report.files.back(), h, cols, rows);
  });
  return report;
}

bool CheckReport::passed() const {
  return std::all_of(rows.begin(), rows.end(), [](const auto& r) { return !r.asserted || r.pass; });
}

CheckReport check(const ExperimentConfig& config, const RunOptions& options) {
  CheckReport report;
  const SimContext cal = calibrated_base(config);
  const double quality = quality_factor(cal.fields, cal.spin);
  const bool gate = quality > kHighQThreshold;
  const double psi = cal.fields.psi;
  const double wl = larmor_frequency(cal.fields, cal.spin);

  stage("oracle", config.hash, [&] {
    if (psi < std::numbers::pi / 2.0) {
      double residual = 0.0;
      const Vec3 axis = cal.fields.dc_direction();
      for (int k = 0; k < 64; ++k) {
        const double t = k * 0.1 / wl;
        const Vec3 u(-std::sin(psi), 0.0, std::cos(psi));
        const Vec3 rate = -wl * std::sin(wl * t) * u + wl * std::cos(wl * t) * Vec3::UnitY();
        const Vec3 expected = -wl * axis.cross(unperturbed_spin(psi, wl, t));
        residual = std::max(residual, (rate - expected).norm() / wl);
      }
      OracleRow r{"unperturbed_precession_residual", 0.0, residual, 0.0, residual < 1e-10, true};
      report.rows.push_back(r);
    }
    report.rows.push_back(relative_row("mba_power_scaling", std::pow(std::sin(psi), 2),
                                       mba_power_scaling(psi), 1e-12, true));

    const SteadyState ss = periodic_steady_state(cal.fields, cal.spin);
    const Carrier sim = carrier(cal);
    const Carrier pred = predicted_carrier(cal);
    report.rows.push_back(relative_row("carrier_i", pred.i, sim.i, 0.01, gate));
    OracleRow phase{"demod_phase_rad", ss.demod_phase(), cal.demod_phase, 0.0,
                    std::abs(std::remainder(ss.demod_phase() - cal.demod_phase, kTwoPi)) < 0.005, gate};
    report.rows.push_back(phase);

    for (ToneChannel ch : {ToneChannel::kDc, ToneChannel::kRf}) {
      const double a = 0.1 * linear_bound(ch, cal);
      const std::vector<double> ladder{-a, -0.5 * a, 0.5 * a, a};
      const StaticResponse s = responsivity_at_zero(ch, cal, ladder);
      report.rows.push_back(relative_row(channel_name(ch) + "_slope", predicted_slope(cal, ch), s.r0, 0.02, gate));
    }
  });

  const std::size_t ci = config.condition_index(
      options.conditions.empty() ? config.conditions.front().name : options.conditions.front());
  const ConditionResult res = noise_pipeline(config, {ci}, options.jobs).front();
  stage("oracle", config.hash, [&] {
    for (std::size_t q = 0; q < 2; ++q) {
      const Quadrature quad = q == 0 ? Quadrature::kI : Quadrature::kQ;
      const NoiseBudget b = predicted_budget(res.context, quad);
      const BudgetDecomposition& d = res.decomposition[q];
      const std::string s = "_" + quadrature_name(quad);
      report.rows.push_back(interval_row("psn" + s, b.psn, res.fit_unpolarized[q].psn.value,
                                         res.fit_unpolarized[q].psn.sigma(), gate));
      report.rows.push_back(interval_row("spn" + s, b.spn, d.spn, d.spn_sigma, gate));
      report.rows.push_back(interval_row("xibar2_mba" + s, b.xibar2 * b.mba, d.mba_level_raw, d.mba_sigma, gate));
      const auto& dw = res.fit_polarized[q].delta_omega;
      OracleRow w{"delta_omega" + s, b.delta_omega, dw.value, dw.value / b.delta_omega,
                  dw.ci95.contains(b.delta_omega), gate};
      report.rows.push_back(w);
    }
  });

  SimContext zero = config.base;
  zero.fields.psi = 0.0;
  stage("calibrate", config.hash, [&] { calibrate(zero); });
  const EvasionReport ev = stage("evasion", config.hash, [&] {
    return bbopm_evasion_check(zero, config.iterations, derive_seed(config.seed, 2 * kResponseStreams),
                               options.jobs);
  });
  for (auto r : ev.rows) {
    r.quantity = "psi0_" + r.quantity;
    report.rows.push_back(r);
  }
  report.rows.push_back(OracleRow{"psi0_excess_consistent_with_zero", 1.0, ev.consistent_with_zero ? 1.0 : 0.0,
                                  0.0, ev.consistent_with_zero, true});

  stage("write", config.hash, [&] {
    std::vector<std::vector<std::string>> rows;
    for (const auto& r : report.rows) {
      rows.push_back({r.quantity, format_number(r.predicted), format_number(r.simulated),
                      format_number(r.ratio), r.pass ? "pass" : "fail", r.asserted ? "asserted" : "reported"});
    }
    FileHeader h = base_header(config);
    h.add("quality_factor", quality);
    report.files.push_back(options.out_dir / "check_report.txt");
    write_rows(report.files.back(), h, {"quantity", "predicted", "simulated", "ratio", "result", "gate"}, rows);
  });
  return report;
}

std::vector<fs::path> simulate_run(const ExperimentConfig& config, const RunOptions& options,
                                   const SimulateOptions& sim) {
  if (sim.stride < 1) throw ConfigError("trajectory stride must be >= 1");
  std::vector<fs::path> files;
  const SimContext cal = calibrated_base(config);
  for (std::size_t ci : selected_conditions(config, options)) {
    const SimContext ctx = with_probe(config, cal, ci);
    const std::uint64_t seed = run_seed(config, ci, true, 0);
    const SpinTrajectory traj = stage("simulate", config.hash, [&] {
      return simulate(ctx.fields, ctx.spin, ctx.probe, ctx.duration(), ctx.dt, seed, ctx.noise);
    });
    const IQSeries iq = demodulate(faraday_signal(traj), ctx.spin.omega_p, ctx.demod_phase, ctx.decimation);
    const std::string& name = config.conditions[ci].name;
    stage("write", config.hash, [&] {
      FileHeader h = base_header(config);
      h.add("condition", name);
      h.add("demod_phase_rad", iq.demod_phase);
      h.add("settle_s", ctx.settle);
      std::vector<double> t(iq.size());
      for (std::size_t m = 0; m < t.size(); ++m) t[m] = iq.t0 + static_cast<double>(m) * iq.dt_out;
      files.push_back(options.out_dir / "simulate" / (name + "_iq.txt"));
      write_columns(files.back(), h, {"t_s", "I_signal", "Q_signal"}, {t, iq.I, iq.Q});
      if (sim.trajectory) {
        std::vector<double> tt, fx, fy, fz;
        for (std::size_t k = 0; k < traj.size(); k += sim.stride) {
          tt.push_back(traj.time(k));
          fx.push_back(traj.F[k].x());
          fy.push_back(traj.F[k].y());
          fz.push_back(traj.F[k].z());
        }
        FileHeader ht = h;
        ht.add("stride", std::to_string(sim.stride));
        ht.add("max_norm", traj.max_norm);
        files.push_back(options.out_dir / "simulate" / (name + "_trajectory.txt"));
        write_columns(files.back(), ht, {"t_s", "F_x", "F_y", "F_z"}, {tt, fx, fy, fz});
      }
    });
  }
  return files;
}

}  // namespace hopm
