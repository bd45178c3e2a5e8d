#include <doctest.h>

#include <cmath>
#include <numbers>
#include <numeric>

#include "hopm/pipeline.hpp"
#include "hopm/spin_sim.hpp"

using namespace hopm;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

SpinParams bare_params() {
  SpinParams p;
  p.gamma = kTwoPi * 7e9;
  p.relaxation = 2.0 * kTwoPi * 150.0;
  p.omega_p = kTwoPi * 40e3;
  p.pump_rate = 0.0;
  p.f_max = 1.0;
  return p;
}

FieldConfig resonant(const SpinParams& p, double psi) {
  FieldConfig f;
  f.psi = psi;
  f.b_dc = p.omega_p / p.gamma;
  return f;
}

}  // namespace

TEST_CASE("exact rotation conserves the norm without damping") {
  SpinParams p = bare_params();
  p.relaxation = 0.0;
  const FieldConfig f = resonant(p, 0.4);
  const double dt = p.pump_period() / 200.0;
  Vec3 F(0.3, -0.5, 0.8);
  const double n0 = F.norm();
  for (std::size_t k = 0; k < 200 * 10000; ++k) F = step(F, f, p, 0.0, Vec3::Zero(), k * dt, dt);
  CHECK(std::abs(F.norm() - n0) / n0 < 1e-10);
}

TEST_CASE("noiseless precession follows the analytic rotation") {
  SpinParams p = bare_params();
  p.relaxation = 1e-9;
  const FieldConfig f = resonant(p, 0.6);
  const double dt = p.pump_period() / 200.0;
  const Vec3 F0(0.0, 1.0, 0.0);
  const auto traj = simulate(f, p, make_probe(1.0, 0.0), 5 * p.pump_period(), dt, 1,
                             NoiseSwitches{false, false, false}, F0);
  const double wl = larmor_frequency(f, p);
  const Vec3 b = f.dc_direction();
  for (std::size_t k = 0; k < traj.size(); k += 37) {
    const double t = traj.time(k);
    // Rodrigues rotation of F0 by angle -wL t about b
    const double a = -wl * t;
    const Vec3 expected = F0 * std::cos(a) + b.cross(F0) * std::sin(a) + b * b.dot(F0) * (1 - std::cos(a));
    CHECK((traj.F[k] - expected).norm() < 1e-9);
  }
}

TEST_CASE("step rejects rotation angles beyond the stability bound") {
  const SpinParams p = bare_params();
  const FieldConfig f = resonant(p, 0.0);
  const double dt = 0.11 / larmor_frequency(f, p);
  CHECK_THROWS_AS(step(Vec3::Zero(), f, p, 0.0, Vec3::Zero(), 0.0, dt), std::invalid_argument);
  CHECK_NOTHROW(step(Vec3::Zero(), f, p, 0.0, Vec3::Zero(), 0.0, 0.09 / larmor_frequency(f, p)));
}

TEST_CASE("invalid parameters are rejected") {
  SpinParams p = bare_params();
  FieldConfig f = resonant(p, 0.0);
  f.psi = 2.0;
  CHECK_THROWS_AS(f.validate(), std::invalid_argument);
  p.pump_duty = 0.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}

TEST_CASE("unpolarized spin noise reaches the Ornstein-Uhlenbeck variance") {
  SpinParams p = bare_params();
  p.spn_strength = 50.0;
  const FieldConfig f = resonant(p, std::numbers::pi / 4.0);
  const double dt = p.pump_period() / 200.0;
  const double settle = 10.0 / p.relaxation;
  const double record = 0.2;
  double acc = 0.0;
  std::size_t count = 0;
  for (int run = 0; run < 20; ++run) {
    const auto traj = unpolarized_run(f, p, make_probe(1.0, 0.0), settle + record, dt,
                                      static_cast<std::uint64_t>(run) + 1, UnpolarizedMode::kPumpOff,
                                      NoiseSwitches{true, false, false});
    for (std::size_t k = static_cast<std::size_t>(settle / dt); k < traj.size(); k += 50) {
      acc += traj.F[k].z() * traj.F[k].z();
      ++count;
    }
  }
  const double expected = p.spn_strength * p.spn_strength / (2.0 * p.relaxation);
  CHECK(acc / static_cast<double>(count) == doctest::Approx(expected).epsilon(0.1));
}

TEST_CASE("longitudinal pumping saturates at the rate-balance value") {
  SpinParams p = bare_params();
  p.pump_rate = kTwoPi * 1500.0;
  p.pump_duty = 0.1;
  const FieldConfig f = resonant(p, std::numbers::pi / 2.0);  // B_dc along the pump axis
  const double dt = p.pump_period() / 200.0;
  const double duration = 20.0 / p.linewidth();
  const auto traj = simulate(f, p, make_probe(1.0, 0.0), duration, dt, 1, NoiseSwitches{false, false, false});
  const std::size_t per = 200;
  double mean = 0.0;
  for (std::size_t k = traj.size() - 10 * per; k < traj.size(); ++k) mean += traj.F[k].z();
  mean /= 10.0 * per;
  const double expected = p.f_max * p.mean_pump_rate() / (p.relaxation + p.mean_pump_rate());
  CHECK(mean == doctest::Approx(expected).epsilon(0.01));
}

TEST_CASE("kick pumping deposits the per-cycle fraction") {
  SpinParams p = bare_params();
  p.pump_rate = kTwoPi * 1500.0;
  p.pump_mode = PumpMode::kKick;
  const double frac = 1.0 - std::exp(-p.pump_rate * p.pump_duty * p.pump_period());
  CHECK(p.kick_strength() == doctest::Approx(frac));
  const FieldConfig f = resonant(p, std::numbers::pi / 2.0);
  const double dt = p.pump_period() / 200.0;
  const auto traj = simulate(f, p, make_probe(1.0, 0.0), 30.0 / p.linewidth(), dt, 1,
                             NoiseSwitches{false, false, false});
  // fixed point of decay over one period followed by one kick
  const double decay = std::exp(-p.relaxation * p.pump_period());
  const double after_kick = frac * p.f_max / (1.0 - decay * (1.0 - frac));
  double hi = 0.0;
  for (std::size_t k = traj.size() - 400; k < traj.size(); ++k) hi = std::max(hi, traj.F[k].z());
  CHECK(hi == doctest::Approx(after_kick).epsilon(2e-3));
}

TEST_CASE("same seed reproduces a trajectory bit for bit") {
  const SimContext ctx = default_context();
  const double d = 0.002;
  const auto a = simulate(ctx.fields, ctx.spin, ctx.probe, d, ctx.dt, 77);
  const auto b = simulate(ctx.fields, ctx.spin, ctx.probe, d, ctx.dt, 77);
  const auto c = simulate(ctx.fields, ctx.spin, ctx.probe, d, ctx.dt, 78);
  REQUIRE(a.size() == b.size());
  bool same = true;
  for (std::size_t k = 0; k < a.size(); ++k) same = same && a.F[k] == b.F[k];
  CHECK(same);
  CHECK(a.F.back() != c.F.back());
}
