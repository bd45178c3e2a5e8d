#include "hopm/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <thread>
#include <vector>

#include "hopm/rng.hpp"

namespace hopm {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::vector<double> centered(const std::vector<double>& v) {
  const double m = mean(v);
  std::vector<double> out(v.size());
  std::transform(v.begin(), v.end(), out.begin(), [m](double x) { return x - m; });
  return out;
}

}  // namespace

void SimContext::validate() const {
  fields.validate();
  spin.validate();
  probe.validate();
  if (!(dt > 0.0)) throw std::invalid_argument("context: dt must be positive");
  if (!(settle >= 0.0)) throw std::invalid_argument("context: settle time must be non-negative");
  if (!(record > 0.0)) throw std::invalid_argument("context: record length must be positive");
  if (decimation < 1) throw std::invalid_argument("context: decimation must be >= 1");
  if (record < 16.0 * output_dt()) {
    throw std::invalid_argument("context: record shorter than 16 output samples");
  }
  if (!(fit_f_max > fit_f_min && fit_f_min >= 0.0)) {
    throw std::invalid_argument("context: fit band must satisfy 0 <= f_min < f_max");
  }
}

FitOptions SimContext::fit_options(FitMode mode, Quadrature quadrature) const {
  FitOptions o;
  o.xi2 = probe.xi2;
  o.xibar2 = probe.xibar2;
  o.mode = mode;
  o.quadrature = quadrature;
  o.mask = mask;
  o.f_min_hz = fit_f_min;
  o.f_max_hz = fit_f_max;
  return o;
}

SimContext default_context(double psi) {
  SimContext ctx;
  const double f_p = 40e3;
  ctx.spin.omega_p = kTwoPi * f_p;
  ctx.spin.gamma = kTwoPi * 7e9;
  ctx.spin.relaxation = kTwoPi * 150.0;
  ctx.spin.pump_rate = kTwoPi * 1500.0;
  ctx.spin.pump_duty = 0.1;
  ctx.spin.f_max = 1e4;
  ctx.probe.photon_flux = 1e13;
  const double linewidth = ctx.spin.linewidth();
  ctx.spin.coupling = std::sqrt(1e-3 * linewidth / ctx.probe.photon_flux);
  ctx.spin.spn_strength = std::sqrt(4000.0 * linewidth);

  ctx.fields.b_dc = ctx.spin.omega_p / ctx.spin.gamma;
  ctx.fields.psi = psi;
  ctx.fields.omega_rf = ctx.spin.omega_p;

  ctx.dt = default_dt(ctx.spin.omega_p);
  ctx.decimation = 200;
  ctx.settle = 10.0 / linewidth;
  ctx.record = 0.05;
  return ctx;
}

void calibrate(SimContext& ctx) {
  ctx.validate();
  const NoiseSwitches quiet{false, false, false};
  const SpinTrajectory traj =
      simulate(ctx.fields, ctx.spin, ctx.probe, ctx.duration(), ctx.dt, 0, quiet);
  ctx.demod_phase =
      calibrate_demod_phase(traj, ctx.spin.coupling, ctx.spin.omega_p, ctx.decimation, ctx.settle);
}

Carrier carrier(const SimContext& ctx) {
  SimContext quiet = ctx;
  quiet.noise = {false, false, false};
  const IQSeries iq = simulate_iq(quiet, true, 0);
  return {mean(iq.I), mean(iq.Q)};
}

IQSeries simulate_iq(const SimContext& ctx, bool polarized, std::uint64_t seed) {
  ctx.validate();
  const SpinTrajectory traj =
      polarized ? simulate(ctx.fields, ctx.spin, ctx.probe, ctx.duration(), ctx.dt, seed, ctx.noise)
                : unpolarized_run(ctx.fields, ctx.spin, ctx.probe, ctx.duration(), ctx.dt, seed,
                                  ctx.unpolarized_mode, ctx.noise);
  const IQSeries iq =
      demodulate(faraday_signal(traj), ctx.spin.omega_p, ctx.demod_phase, ctx.decimation);
  const auto skip = static_cast<std::size_t>(std::ceil(ctx.settle / iq.dt_out - 1e-9));
  return iq.tail(skip);
}

QuadratureSpectra record_spectra(const IQSeries& iq, Window window) {
  return {psd(centered(iq.I), iq.dt_out, window), psd(centered(iq.Q), iq.dt_out, window)};
}

QuadratureSpectra noise_spectra(const SimContext& ctx, bool polarized, int iterations,
                                std::uint64_t seed, int jobs) {
  if (iterations < 1) throw std::invalid_argument("noise_spectra: need at least one iteration");
  std::vector<QuadratureSpectra> parts(static_cast<std::size_t>(iterations));
  parallel_for(parts.size(), jobs, [&](std::size_t i) {
    parts[i] = record_spectra(simulate_iq(ctx, polarized, derive_seed(seed, i)));
  });
  std::vector<Spectrum> si;
  std::vector<Spectrum> sq;
  for (auto& p : parts) {
    si.push_back(std::move(p.I));
    sq.push_back(std::move(p.Q));
  }
  QuadratureSpectra out{average_spectra(si), average_spectra(sq)};
  out.I.config_hash = ctx.config_hash;
  out.Q.config_hash = ctx.config_hash;
  return out;
}

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  const auto workers = static_cast<std::size_t>(std::clamp<long>(jobs, 1, static_cast<long>(std::max<std::size_t>(n, 1))));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next = n;
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace hopm
