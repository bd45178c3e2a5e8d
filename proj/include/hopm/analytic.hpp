#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hopm/noise_model.hpp"
#include "hopm/pipeline.hpp"
#include "hopm/spin_sim.hpp"

namespace hopm {

/// Oracle comparisons are asserted only above this omega_L / linewidth.
inline constexpr double kHighQThreshold = 50.0;

/// F0(t) = (-x sin(psi) + z cos(psi)) cos(wL t) + y sin(wL t) + B_dc_hat tan(psi),
/// unit transverse amplitude. psi must lie in [0, pi/2).
Vec3 unperturbed_spin(double psi, double omega_L, double t);

/// Component of F orthogonal to B_dc_hat = x cos(psi) + z sin(psi).
Vec3 transverse_part(const Vec3& F, double psi);

/// Back-action perturbation rates with unit proportionality constants:
/// amplitude ~ S3 sin(wL t) sin(psi), phase ~ S3 (1 - cos(wL t)) sin(psi).
struct MbaRates {
  double amplitude = 0.0;
  double phase = 0.0;
};
MbaRates mba_rates(double psi, double omega_L, double t, double s3);

/// Relative back-action noise power, sin^2(psi).
double mba_power_scaling(double psi);

/// omega_L over the magnetic linewidth.
double quality_factor(const FieldConfig& fields, const SpinParams& params);

/// Noise-free periodic orbit locked to the pump, from the fixed point of the
/// exact one-period map (piecewise-constant field and pump over
/// `samples_per_period` sub-intervals). F_z(t) in the lab reads
/// mean_fz + a cos(wp t) + b sin(wp t) + higher harmonics; `rotating` is the
/// period mean of F in the frame co-rotating with the pump about B_dc_hat.
struct SteadyState {
  Vec3 rotating = Vec3::Zero();
  double mean_fz = 0.0;
  double a = 0.0;
  double b = 0.0;

  double amplitude() const;
  /// Demodulation phase that zeroes Q with I > 0.
  double demod_phase() const;
};

SteadyState periodic_steady_state(const FieldConfig& fields, const SpinParams& params,
                                  int samples_per_period = 4096);

/// Noise-free I and Q predicted by the steady state at ctx.demod_phase.
Carrier predicted_carrier(const SimContext& ctx);

/// Slope of Q against a B_dc offset (dc) or of I against the in-phase rf
/// amplitude (rf), signal units per tesla, by central differences of the
/// steady state.
double predicted_slope(const SimContext& ctx, ToneChannel channel);

/// Linear-response noise budget of one quadrature at the context's operating
/// point. Levels are one-sided PSD values of the demodulated signal.
NoiseBudget predicted_budget(const SimContext& ctx, Quadrature quadrature);

struct OracleRow {
  std::string quantity;
  double predicted = 0.0;
  double simulated = 0.0;
  double ratio = 0.0;
  bool pass = false;
  bool asserted = true;  // false below the high-Q gate
};

struct EvasionReport {
  double psi = 0.0;
  double quality = 0.0;
  std::vector<OracleRow> rows;
  bool consistent_with_zero = false;  // both quadratures, at 95%

  bool passed() const;
};

/// Paired polarized runs at xibar2 = 1 and 4 with shared seeds for every
/// noise source. Reports the low-frequency atomic excess difference in each
/// quadrature and whether it is consistent with zero at 95% confidence.
EvasionReport bbopm_evasion_check(const SimContext& ctx, int iterations, std::uint64_t seed,
                                  int jobs = 1);

}  // namespace hopm
