#include "hopm/analytic.hpp"

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace hopm {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kZ95 = 1.959963984540054;

Eigen::Matrix3d skew(const Vec3& v) {
  Eigen::Matrix3d m;
  m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return m;
}

// Lab-frame rotation of the co-rotating frame at time t.
Eigen::Matrix3d frame(const Vec3& axis, double omega_p, double t) {
  return Eigen::AngleAxisd(-omega_p * t, axis).toRotationMatrix();
}

// Geometric factor of the pulse-averaged pump orientation.
double pulse_factor(const SpinParams& p) {
  if (p.pump_mode != PumpMode::kPulsed) return 1.0;
  const double x = std::numbers::pi * p.pump_duty;
  return x / std::sin(x);
}

struct Affine {
  Eigen::Matrix3d M = Eigen::Matrix3d::Identity();
  Vec3 c = Vec3::Zero();

  Vec3 apply(const Vec3& v) const { return M * v + c; }
};

// outer o inner
Affine compose(const Affine& outer, const Affine& inner) {
  return {outer.M * inner.M, outer.M * inner.c + outer.c};
}

Carrier quadratures(const SteadyState& ss, double scale, double phase) {
  return {scale * (ss.a * std::cos(phase) - ss.b * std::sin(phase)),
          scale * (ss.a * std::sin(phase) + ss.b * std::cos(phase))};
}

}  // namespace

Vec3 unperturbed_spin(double psi, double omega_L, double t) {
  if (!(psi >= 0.0 && psi < std::numbers::pi / 2.0)) {
    throw std::invalid_argument("unperturbed_spin: psi must lie in [0, pi/2)");
  }
  const double s = std::sin(psi);
  const double c = std::cos(psi);
  const Vec3 u(-s, 0.0, c);
  const Vec3 axis(c, 0.0, s);
  return u * std::cos(omega_L * t) + Vec3::UnitY() * std::sin(omega_L * t) + axis * std::tan(psi);
}

Vec3 transverse_part(const Vec3& F, double psi) {
  const Vec3 axis(std::cos(psi), 0.0, std::sin(psi));
  return F - F.dot(axis) * axis;
}

MbaRates mba_rates(double psi, double omega_L, double t, double s3) {
  const double s = std::sin(psi);
  return {s3 * std::sin(omega_L * t) * s, s3 * (1.0 - std::cos(omega_L * t)) * s};
}

double mba_power_scaling(double psi) {
  const double s = std::sin(psi);
  return s * s;
}

double quality_factor(const FieldConfig& fields, const SpinParams& params) {
  return larmor_frequency(fields, params) / params.linewidth();
}

double SteadyState::amplitude() const { return std::hypot(a, b); }

double SteadyState::demod_phase() const { return std::atan2(-b, a); }

SteadyState periodic_steady_state(const FieldConfig& fields, const SpinParams& params,
                                  int samples_per_period) {
  fields.validate();
  params.validate();
  if (samples_per_period < 16) {
    throw std::invalid_argument("steady state: need at least 16 samples per period");
  }
  if (fields.b_rf_amp != 0.0 && fields.omega_rf != params.omega_p) {
    throw std::invalid_argument("steady state: rf field must be locked to the pump frequency");
  }
  FieldConfig static_fields = fields;
  static_fields.tone = {};
  const double period = params.pump_period();
  const int n = samples_per_period;
  const double h = period / n;
  const bool kicks = params.pump_mode == PumpMode::kKick && params.pump_rate > 0.0;
  const double t0 = kicks ? std::fmod(std::fmod(params.pump_phase, kTwoPi) + kTwoPi, kTwoPi) / params.omega_p
                          : 0.0;

  // Affine map F -> M F + c of each sub-interval, exact for piecewise
  // constant field and pump rate.
  std::vector<Affine> maps(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    const double tm = t0 + (j + 0.5) * h;
    const Vec3 omega = -params.gamma * static_fields.field(tm);
    const double pump = params.pump_at(tm);
    const double decay = params.relaxation + pump;
    const Vec3 source = pump * params.f_max * Vec3::UnitZ();
    const Eigen::Matrix3d A = skew(omega) - decay * Eigen::Matrix3d::Identity();
    const Vec3 equilibrium = A.partialPivLu().solve(-source);
    const double angle = omega.norm();
    Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
    if (angle > 0.0) R = Eigen::AngleAxisd(angle * h, omega / angle).toRotationMatrix();
    Affine& m = maps[static_cast<std::size_t>(j)];
    m.M = std::exp(-decay * h) * R;
    m.c = equilibrium - m.M * equilibrium;
  }
  Affine kick;
  if (kicks) {
    const double p = params.kick_strength();
    kick.M = (1.0 - p) * Eigen::Matrix3d::Identity();
    kick.c = p * params.f_max * Vec3::UnitZ();
  }

  // Fixed point of one period, starting just after the kick.
  Affine period_map;
  for (const auto& m : maps) period_map = compose(m, period_map);
  if (kicks) period_map = compose(kick, period_map);
  SteadyState ss;
  Vec3 F = (Eigen::Matrix3d::Identity() - period_map.M).partialPivLu().solve(period_map.c);
  const Vec3 axis = fields.dc_direction();
  for (int j = 0; j < n; ++j) {
    const Vec3 next = maps[static_cast<std::size_t>(j)].apply(F);
    const double tm = t0 + (j + 0.5) * h;
    const double fz = 0.5 * (F.z() + next.z());
    const double phase = params.omega_p * tm;
    ss.mean_fz += fz / n;
    ss.a += 2.0 * fz * std::cos(phase) / n;
    ss.b += 2.0 * fz * std::sin(phase) / n;
    ss.rotating += frame(axis, params.omega_p, tm).transpose() * (0.5 * (F + next)) / n;
    F = next;
  }
  return ss;
}

Carrier predicted_carrier(const SimContext& ctx) {
  const SteadyState ss = periodic_steady_state(ctx.fields, ctx.spin);
  const double scale = ctx.spin.coupling * ctx.probe.photon_flux * ctx.dt;
  return quadratures(ss, scale, ctx.demod_phase);
}

double predicted_slope(const SimContext& ctx, ToneChannel channel) {
  const double scale = ctx.spin.coupling * ctx.probe.photon_flux * ctx.dt;
  const double h = 1e-4 * ctx.spin.linewidth() / std::abs(ctx.spin.gamma);
  FieldConfig plus = ctx.fields;
  FieldConfig minus = ctx.fields;
  if (channel == ToneChannel::kDc) {
    plus.b_dc += h;
    minus.b_dc -= h;
  } else if (channel == ToneChannel::kRf) {
    plus.b_rf_amp = minus.b_rf_amp = h;
    plus.b_rf_phase = in_phase_rf_phase(ctx.spin);
    minus.b_rf_phase = plus.b_rf_phase + std::numbers::pi;
  } else {
    throw std::invalid_argument("predicted_slope: channel must be dc or rf");
  }
  const Carrier hi = quadratures(periodic_steady_state(plus, ctx.spin), scale, ctx.demod_phase);
  const Carrier lo = quadratures(periodic_steady_state(minus, ctx.spin), scale, ctx.demod_phase);
  return channel == ToneChannel::kDc ? (hi.q - lo.q) / (2.0 * h) : (hi.i - lo.i) / (2.0 * h);
}

NoiseBudget predicted_budget(const SimContext& ctx, Quadrature quadrature) {
  const SpinParams& sp = ctx.spin;
  const double flux = ctx.probe.photon_flux;
  const double scale = sp.coupling * flux * ctx.dt;
  const double width = sp.linewidth();
  const double psi = ctx.fields.psi;
  const double kappa = sp.coupling * sp.coupling * flux;
  const double carrier_i =
      scale * periodic_steady_state(ctx.fields, sp).amplitude();
  const double c2 = std::pow(pulse_factor(sp), 2);

  NoiseBudget b;
  b.quadrature = quadrature;
  b.xi2 = ctx.probe.xi2;
  b.xibar2 = ctx.probe.xibar2;
  b.delta_omega = width;
  b.psn = 4.0 * flux * ctx.dt * ctx.dt;
  b.spn = scale * scale * 2.0 * sp.spn_strength * sp.spn_strength *
          std::pow(std::cos(psi), 2) / (width * width);
  const double geometry = quadrature == Quadrature::kI ? c2 : 2.0 + c2;
  b.mba = kappa * geometry * mba_power_scaling(psi) * carrier_i * carrier_i / (width * width);
  return b;
}

bool EvasionReport::passed() const {
  for (const auto& r : rows) {
    if (r.asserted && !r.pass) return false;
  }
  return psi != 0.0 || consistent_with_zero;
}

EvasionReport bbopm_evasion_check(const SimContext& ctx, int iterations, std::uint64_t seed,
                                  int jobs) {
  EvasionReport report;
  report.psi = ctx.fields.psi;
  report.quality = quality_factor(ctx.fields, ctx.spin);
  const bool gate = report.quality > kHighQThreshold;

  constexpr double kLow = 1.0;
  constexpr double kHigh = 4.0;
  SimContext lo = ctx;
  SimContext hi = ctx;
  lo.probe.xibar2 = std::max(kLow, 1.0 / ctx.probe.xi2);
  hi.probe.xibar2 = kHigh;
  const QuadratureSpectra s_lo = noise_spectra(lo, true, iterations, seed, jobs);
  const QuadratureSpectra s_hi = noise_spectra(hi, true, iterations, seed, jobs);

  report.consistent_with_zero = true;
  for (Quadrature q : {Quadrature::kI, Quadrature::kQ}) {
    const FitResult f_lo =
        fit_noise_model(q == Quadrature::kI ? s_lo.I : s_lo.Q, lo.fit_options(FitMode::kPolarized, q));
    const FitResult f_hi =
        fit_noise_model(q == Quadrature::kI ? s_hi.I : s_hi.Q, hi.fit_options(FitMode::kPolarized, q));
    const double diff = f_hi.atomic.value - f_lo.atomic.value;
    const double sigma = std::hypot(f_hi.atomic.sigma(), f_lo.atomic.sigma());
    const double expected =
        (hi.probe.xibar2 - lo.probe.xibar2) * predicted_budget(ctx, q).mba;
    OracleRow row;
    row.quantity = "atomic_excess_difference_" + quadrature_name(q);
    row.predicted = expected;
    row.simulated = diff;
    row.ratio = expected > 0.0 ? diff / expected : 0.0;
    row.pass = std::abs(diff - expected) <= kZ95 * sigma;
    row.asserted = gate;
    report.rows.push_back(row);
    if (std::abs(diff) > kZ95 * sigma) report.consistent_with_zero = false;
  }
  return report;
}

}  // namespace hopm
