#include <doctest.h>

#include <cmath>
#include <numbers>
#include <numeric>

#include "hopm/pipeline.hpp"
#include "hopm/readout.hpp"

using namespace hopm;

TEST_CASE("demodulation recovers quadrature amplitudes") {
  const double w = 2.0 * std::numbers::pi * 40e3;
  const double dt = 2.0 * std::numbers::pi / w / 200.0;
  const double phi = 0.37;
  RawSignal raw;
  raw.dt = dt;
  for (std::size_t k = 0; k < 200 * 30 + 17; ++k) {
    const double t = static_cast<double>(k) * dt;
    raw.samples.push_back(1.5 * std::cos(w * t + phi) - 0.25 * std::sin(w * t + phi));
  }
  const auto iq = demodulate(raw, w, phi, 200);
  REQUIRE(iq.size() == 30);
  for (std::size_t m = 0; m < iq.size(); ++m) {
    CHECK(iq.I[m] == doctest::Approx(1.5).epsilon(1e-9));
    CHECK(iq.Q[m] == doctest::Approx(-0.25).epsilon(1e-9));
  }
  CHECK(iq.dt_out == doctest::Approx(200 * dt));
  const auto tail = iq.tail(10);
  CHECK(tail.size() == 20);
  CHECK(tail.t0 == doctest::Approx(10 * iq.dt_out));
}

TEST_CASE("Faraday signal is linear in F_z plus the stored S2 noise") {
  const SimContext ctx = default_context();
  const auto traj = simulate(ctx.fields, ctx.spin, ctx.probe, 0.001, ctx.dt, 5);
  const auto raw = faraday_signal(traj);
  REQUIRE(raw.samples.size() == traj.size());
  const double s1 = ctx.probe.photon_flux * ctx.dt;
  for (std::size_t k = 0; k < traj.size(); k += 101) {
    CHECK(raw.samples[k] ==
          doctest::Approx(ctx.spin.coupling * traj.F[k].z() * s1 + traj.stokes.ds2[k]).epsilon(1e-12));
  }
  CHECK(raw.small_angle_ok());
}

TEST_CASE("white readout noise demodulates to 4 flux dt^2") {
  SimContext ctx = default_context();
  ctx.spin.coupling = 0.0;
  double acc = 0.0;
  std::size_t n = 0;
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const auto traj = simulate(ctx.fields, ctx.spin, ctx.probe, 0.02, ctx.dt, seed);
    const auto iq = demodulate(faraday_signal(traj), ctx.spin.omega_p, 0.0, ctx.decimation);
    for (std::size_t m = 0; m < iq.size(); ++m) {
      acc += iq.I[m] * iq.I[m] + iq.Q[m] * iq.Q[m];
      n += 2;
    }
  }
  // Var(I) = 2 flux dt / D; one-sided PSD = 2 Var(I) * D dt
  const double var = 2.0 * ctx.probe.photon_flux * ctx.dt / static_cast<double>(ctx.decimation);
  CHECK(acc / static_cast<double>(n) == doctest::Approx(var).epsilon(0.03));
}

TEST_CASE("calibrated phase zeroes the mean Q quadrature") {
  SimContext ctx = default_context();
  calibrate(ctx);
  const Carrier c = carrier(ctx);
  CHECK(c.i > 0.0);
  CHECK(std::abs(c.q) < 1e-6 * c.i);
  SimContext shifted = ctx;
  shifted.demod_phase += std::numbers::pi / 2.0;
  const Carrier s = carrier(shifted);
  CHECK(std::hypot(s.i, s.q) == doctest::Approx(c.i).epsilon(1e-6));
}
