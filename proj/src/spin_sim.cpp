#include "hopm/spin_sim.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

#include "hopm/rng.hpp"

namespace hopm {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

inline Vec3 rotate(const Vec3& v, const Vec3& rotation) {
  const double angle = rotation.norm();
  if (angle == 0.0) return v;
  const Vec3 k = rotation / angle;
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return v * c + k.cross(v) * s + k * (k.dot(v) * (1.0 - c));
}

// Number of whole pump cycles elapsed, counted from the pulse start.
inline double pump_cycles(const SpinParams& p, double t) {
  return (p.omega_p * t - p.pump_phase) / kTwoPi;
}

}  // namespace

Vec3 FieldConfig::dc_direction() const { return Vec3(std::cos(psi), 0.0, std::sin(psi)); }

Vec3 FieldConfig::field(double t) const {
  double dc = b_dc;
  double rf = b_rf_amp;
  if (tone.channel == ToneChannel::kDc) {
    dc += tone.amplitude * std::cos(tone.omega * t + tone.phase);
  } else if (tone.channel == ToneChannel::kRf) {
    rf += tone.amplitude * std::cos(tone.omega * t + tone.phase);
  }
  Vec3 b = dc * dc_direction();
  if (rf != 0.0) b.x() += rf * std::cos(omega_rf * t + b_rf_phase);
  return b;
}

void FieldConfig::validate() const {
  if (!(b_dc >= 0.0)) throw std::invalid_argument("fields: B_dc must be non-negative");
  if (!(b_rf_amp >= 0.0)) throw std::invalid_argument("fields: B_rf amplitude must be non-negative");
  if (!(psi >= 0.0 && psi <= std::numbers::pi / 2.0)) {
    throw std::invalid_argument("fields: psi must lie in [0, pi/2]");
  }
  if (tone.channel != ToneChannel::kNone && !(tone.amplitude >= 0.0 && tone.omega >= 0.0)) {
    throw std::invalid_argument("fields: test tone amplitude and frequency must be non-negative");
  }
}

double SpinParams::pump_period() const { return kTwoPi / omega_p; }

double SpinParams::pump_at(double t) const {
  if (pump_mode != PumpMode::kPulsed || pump_rate == 0.0) return 0.0;
  const double c = pump_cycles(*this, t);
  return (c - std::floor(c)) < pump_duty ? pump_rate : 0.0;
}

double SpinParams::kick_strength() const {
  return 1.0 - std::exp(-mean_pump_rate() * pump_period());
}

double SpinParams::pump_center_time() const {
  const double offset = pump_mode == PumpMode::kPulsed ? std::numbers::pi * pump_duty : 0.0;
  return (pump_phase + offset) / omega_p;
}

void SpinParams::validate() const {
  if (!(relaxation > 0.0)) throw std::invalid_argument("spin: relaxation rate must be positive");
  if (!(pump_duty > 0.0 && pump_duty <= 1.0)) {
    throw std::invalid_argument("spin: pump duty must lie in (0, 1]");
  }
  if (!(omega_p > 0.0)) throw std::invalid_argument("spin: pump frequency must be positive");
  if (!(pump_rate >= 0.0)) throw std::invalid_argument("spin: pump rate must be non-negative");
  if (!(spn_strength >= 0.0)) throw std::invalid_argument("spin: spin-noise strength must be non-negative");
  if (!(f_max >= 0.0)) throw std::invalid_argument("spin: F_max must be non-negative");
  if (!std::isfinite(gamma) || !std::isfinite(coupling)) {
    throw std::invalid_argument("spin: gamma and G must be finite");
  }
}

double larmor_frequency(const FieldConfig& fields, const SpinParams& params) {
  return std::abs(params.gamma) * fields.b_dc;
}

double default_dt(double omega_p) { return kTwoPi / omega_p / 200.0; }

double in_phase_rf_phase(const SpinParams& params) {
  const double phase = -std::numbers::pi / 2.0 - params.omega_p * params.pump_center_time();
  return std::remainder(phase, kTwoPi);
}

namespace {

void check_stability(const FieldConfig& fields, const SpinParams& params, double dt) {
  const double angle = larmor_frequency(fields, params) * dt;
  if (!(dt > 0.0) || angle >= kMaxRotationPerStep) {
    throw std::invalid_argument("step: dt*omega_L = " + std::to_string(angle) +
                                " rad exceeds the stability bound");
  }
}

inline Vec3 step_unchecked(const Vec3& F, const FieldConfig& fields, const SpinParams& params,
                           double ds3, const Vec3& dW, double t, double dt) {
  const double tm = t + 0.5 * dt;
  Vec3 rotation = -params.gamma * dt * fields.field(tm);
  rotation.z() += params.coupling * ds3;
  const Vec3 half = 0.5 * rotation;
  const Vec3 Fr = rotate(F, half);

  const double pump = params.pump_at(tm);
  Vec3 drift = -(params.relaxation + pump) * Fr;
  drift.z() += pump * params.f_max;
  return rotate(Fr + drift * dt + params.spn_strength * dW, half);
}

}  // namespace

Vec3 step(const Vec3& F, const FieldConfig& fields, const SpinParams& params, double ds3,
          const Vec3& dW, double t, double dt) {
  check_stability(fields, params, dt);
  return step_unchecked(F, fields, params, ds3, dW, t, dt);
}

SpinTrajectory simulate(const FieldConfig& fields, const SpinParams& params,
                        const ProbeParams& probe, double duration, double dt, std::uint64_t seed,
                        const NoiseSwitches& noise, const Vec3& initial) {
  fields.validate();
  params.validate();
  probe.validate();
  check_stability(fields, params, dt);
  if (!(duration > 0.0)) throw std::invalid_argument("simulate: duration must be positive");
  const auto n = static_cast<std::size_t>(std::llround(duration / dt));
  if (n < 1) throw std::invalid_argument("simulate: duration shorter than one step");

  SpinTrajectory traj;
  traj.dt = dt;
  traj.fields = fields;
  traj.params = params;
  traj.probe = probe;
  traj.stokes = sample_stokes(probe, dt, n, seed);
  if (!noise.readout_noise) std::fill(traj.stokes.ds2.begin(), traj.stokes.ds2.end(), 0.0);
  if (!noise.back_action) std::fill(traj.stokes.ds3.begin(), traj.stokes.ds3.end(), 0.0);

  const bool spin_noise = noise.spin_noise && params.spn_strength > 0.0;
  Engine engine = make_stream(seed, NoiseStream::kSpin);
  std::normal_distribution<double> normal;
  const double sqrt_dt = std::sqrt(dt);

  const bool kicks = params.pump_mode == PumpMode::kKick && params.pump_rate > 0.0;
  const double kick = params.kick_strength();

  traj.F.resize(n);
  Vec3 F = initial;
  double max_norm = F.norm();
  double cycles = std::floor(pump_cycles(params, 0.0));
  for (std::size_t k = 0; k < n; ++k) {
    traj.F[k] = F;
    const double t = static_cast<double>(k) * dt;
    Vec3 dW = Vec3::Zero();
    if (spin_noise) {
      dW.x() = sqrt_dt * normal(engine);
      dW.y() = sqrt_dt * normal(engine);
      dW.z() = sqrt_dt * normal(engine);
    }
    F = step_unchecked(F, fields, params, traj.stokes.ds3[k], dW, t, dt);
    if (kicks) {
      const double c = std::floor(pump_cycles(params, t + dt));
      if (c > cycles) {
        F += kick * (Vec3(0.0, 0.0, params.f_max) - F);
        cycles = c;
      }
    }
    max_norm = std::max(max_norm, F.norm());
  }
  traj.max_norm = max_norm;
  return traj;
}

SpinTrajectory unpolarized_run(const FieldConfig& fields, const SpinParams& params,
                               const ProbeParams& probe, double duration, double dt,
                               std::uint64_t seed, UnpolarizedMode mode,
                               const NoiseSwitches& noise) {
  SpinParams p = params;
  if (mode == UnpolarizedMode::kPumpOff) {
    p.pump_rate = 0.0;
  } else {
    p.f_max = 0.0;
  }
  return simulate(fields, p, probe, duration, dt, seed, noise);
}

}  // namespace hopm
