#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <cstdint>
#include <vector>

#include "hopm/probe_noise.hpp"

namespace hopm {

using Vec3 = Eigen::Vector3d;

/// Which field a harmonic test perturbation modulates.
enum class ToneChannel { kNone, kDc, kRf };

/// Small harmonic perturbation used for responsivity measurements.
/// kDc: B_dc magnitude gets amplitude*cos(omega*t + phase).
/// kRf: the rf envelope gets amplitude*cos(omega*t + phase).
struct TestTone {
  ToneChannel channel = ToneChannel::kNone;
  double amplitude = 0.0;  // T
  double omega = 0.0;      // rad/s
  double phase = 0.0;      // rad
};

/// Magnetic fields. B_dc lies in the x-z plane at angle psi from x;
/// B_rf is along x and phase locked to the pump.
struct FieldConfig {
  double b_dc = 0.0;        // T
  double psi = 0.0;         // rad, in [0, pi/2]
  double b_rf_amp = 0.0;    // T
  double b_rf_phase = 0.0;  // rad
  double omega_rf = 0.0;    // rad/s
  TestTone tone;

  Vec3 dc_direction() const;
  /// Total field at time t.
  Vec3 field(double t) const;
  void validate() const;
};

enum class PumpMode {
  kPulsed,  // rectangular P(t), integrated with the other linear terms
  kKick,    // instantaneous F -> F + p(z*F_max - F) once per period
};

struct SpinParams {
  double gamma = 0.0;         // rad s^-1 T^-1
  double relaxation = 1.0;    // Gamma, s^-1
  double f_max = 1.0;         // maximum polarization
  double pump_rate = 0.0;     // peak P(t), s^-1
  double pump_duty = 0.1;     // fraction of the cycle the pump is on
  double omega_p = 1.0;       // pump repetition, rad/s
  double pump_phase = 0.0;    // pulses start where omega_p*t - pump_phase = 0 mod 2pi
  double coupling = 0.0;      // G, rad per photon
  double spn_strength = 0.0;  // q, s^-1/2 per component
  PumpMode pump_mode = PumpMode::kPulsed;

  double pump_period() const;
  double mean_pump_rate() const { return pump_rate * pump_duty; }
  /// Magnetic resonance half-width: relaxation plus cycle-averaged pumping.
  double linewidth() const { return relaxation + mean_pump_rate(); }
  /// P(t) in pulsed mode, 0 in kick mode.
  double pump_at(double t) const;
  /// Fraction of F removed per kick in kick mode; matches the pulsed mean rate.
  double kick_strength() const;
  /// Time within a period at which the pump deposits its orientation
  /// (pulse centre, or the kick instant).
  double pump_center_time() const;
  void validate() const;
};

/// Independent switches for the three stochastic inputs.
struct NoiseSwitches {
  bool spin_noise = true;     // N_F
  bool readout_noise = true;  // delta S2 (affects readout only)
  bool back_action = true;    // delta S3
};

struct SpinTrajectory {
  double dt = 0.0;
  std::vector<Vec3> F;  // F[k] at t = k*dt
  StokesSeries stokes;  // stokes.ds*[k] acts over [t_k, t_k + dt)
  FieldConfig fields;
  SpinParams params;
  ProbeParams probe;
  double max_norm = 0.0;

  std::size_t size() const { return F.size(); }
  double time(std::size_t k) const { return static_cast<double>(k) * dt; }
};

/// Largest precession angle per step accepted by step().
inline constexpr double kMaxRotationPerStep = 0.1;

/// Larmor frequency gamma*|B_dc|.
double larmor_frequency(const FieldConfig& fields, const SpinParams& params);

/// Default step: 200 per pump period.
double default_dt(double omega_p);

/// rf phase for which the rf field drives the precession amplitude (I) rather
/// than its phase (Q), given the pump timing.
double in_phase_rf_phase(const SpinParams& params);

/// One step of dF = [-gamma B(t) + G S3 z] x F dt - Gamma F dt + P(t)(z F_max - F) dt + q dW.
/// The rotation (field and back-action angle G*ds3 about z together) is applied
/// exactly in two half steps around an Euler-Maruyama update for relaxation,
/// pumping and spin noise.
/// `dW` holds unit-rate Wiener increments, i.e. components ~ N(0, dt).
Vec3 step(const Vec3& F, const FieldConfig& fields, const SpinParams& params, double ds3,
          const Vec3& dW, double t, double dt);

/// Integrates a full trajectory from `initial`. Deterministic for a given seed.
SpinTrajectory simulate(const FieldConfig& fields, const SpinParams& params,
                        const ProbeParams& probe, double duration, double dt, std::uint64_t seed,
                        const NoiseSwitches& noise = {}, const Vec3& initial = Vec3::Zero());

enum class UnpolarizedMode {
  kPumpOff,          // pump_rate = 0; linewidth is Gamma alone
  kDepolarizingPump, // pump timing kept, F_max = 0; linewidth matches the polarized run
};

/// Same as simulate() for an ensemble that is not oriented by the pump.
SpinTrajectory unpolarized_run(const FieldConfig& fields, const SpinParams& params,
                               const ProbeParams& probe, double duration, double dt,
                               std::uint64_t seed,
                               UnpolarizedMode mode = UnpolarizedMode::kPumpOff,
                               const NoiseSwitches& noise = {});

}  // namespace hopm
