#include "hopm/readout.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace hopm {

namespace {

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

MeanSe mean_and_se(const std::vector<double>& v) {
  MeanSe out;
  if (v.empty()) return out;
  const double n = static_cast<double>(v.size());
  out.mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - out.mean) * (x - out.mean);
    out.se = std::sqrt(ss / (n - 1.0) / n);
  }
  return out;
}

}  // namespace

IQSeries IQSeries::tail(std::size_t n) const {
  IQSeries out = *this;
  n = std::min(n, I.size());
  out.I.erase(out.I.begin(), out.I.begin() + static_cast<std::ptrdiff_t>(n));
  out.Q.erase(out.Q.begin(), out.Q.begin() + static_cast<std::ptrdiff_t>(n));
  out.t0 = t0 + static_cast<double>(n) * dt_out;
  return out;
}

RawSignal faraday_signal(const SpinTrajectory& traj, double coupling) {
  if (traj.F.size() != traj.stokes.size()) {
    throw std::invalid_argument("faraday_signal: trajectory and Stokes series lengths differ");
  }
  RawSignal raw;
  raw.dt = traj.dt;
  raw.samples.resize(traj.F.size());
  const double scale = coupling * traj.stokes.s1 * traj.dt;
  double max_angle = 0.0;
  for (std::size_t k = 0; k < traj.F.size(); ++k) {
    const double fz = traj.F[k].z();
    max_angle = std::max(max_angle, std::abs(coupling * fz));
    raw.samples[k] = scale * fz + traj.stokes.ds2[k];
  }
  raw.max_rotation = max_angle;
  return raw;
}

IQSeries demodulate(const RawSignal& raw, double omega_p, double demod_phase,
                    std::size_t decimation) {
  if (decimation < 1) throw std::invalid_argument("demodulate: decimation must be >= 1");
  IQSeries out;
  out.dt_out = raw.dt * static_cast<double>(decimation);
  out.demod_phase = demod_phase;
  out.omega_p = omega_p;
  const std::size_t blocks = raw.samples.size() / decimation;
  out.I.resize(blocks);
  out.Q.resize(blocks);

  // Rotate the reference phasor incrementally and re-anchor it each block to
  // keep the phase error from accumulating over long records.
  const double dphi = omega_p * raw.dt;
  const double cd = std::cos(dphi);
  const double sd = std::sin(dphi);
  const double norm = 2.0 / static_cast<double>(decimation);
  for (std::size_t m = 0; m < blocks; ++m) {
    const std::size_t k0 = m * decimation;
    const double phase0 = std::fmod(omega_p * raw.dt * static_cast<double>(k0), 2.0 * std::numbers::pi) + demod_phase;
    double c = std::cos(phase0);
    double s = std::sin(phase0);
    double si = 0.0;
    double sq = 0.0;
    for (std::size_t j = 0; j < decimation; ++j) {
      const double x = raw.samples[k0 + j];
      si += x * c;
      sq += x * s;
      const double cn = c * cd - s * sd;
      s = s * cd + c * sd;
      c = cn;
    }
    out.I[m] = norm * si;
    out.Q[m] = norm * sq;
  }
  return out;
}

double calibrate_demod_phase(const SpinTrajectory& traj, double coupling, double omega_p,
                             std::size_t decimation, double skip_time) {
  const IQSeries iq = demodulate(faraday_signal(traj, coupling), omega_p, 0.0, decimation);
  const auto skip = static_cast<std::size_t>(std::ceil(skip_time / iq.dt_out));
  if (skip >= iq.size()) {
    throw std::invalid_argument("calibrate_demod_phase: trajectory shorter than the skip time");
  }
  const IQSeries steady = iq.tail(skip);
  const MeanSe i = mean_and_se(steady.I);
  const MeanSe q = mean_and_se(steady.Q);
  const double envelope = std::hypot(i.mean, q.mean);
  const double noise = std::max(i.se, q.se);
  if (!(envelope > 0.0) || envelope < 10.0 * noise) {
    throw std::runtime_error("calibrate_demod_phase: no oscillation at the pump frequency");
  }
  return std::atan2(-q.mean, i.mean);
}

}  // namespace hopm
