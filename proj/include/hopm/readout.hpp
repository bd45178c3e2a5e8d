#pragma once

#include <cstddef>
#include <vector>

#include "hopm/spin_sim.hpp"

namespace hopm {

/// Detected S2 after the cell, one sample per integration step (photon counts).
struct RawSignal {
  double dt = 0.0;
  std::vector<double> samples;
  /// Largest Faraday angle |G*F_z| seen; the linear readout assumes < 0.1 rad.
  double max_rotation = 0.0;

  bool small_angle_ok() const { return max_rotation < 0.1; }
};

/// Demodulated quadratures. Sample m covers raw samples [m*D, (m+1)*D).
struct IQSeries {
  double dt_out = 0.0;
  double t0 = 0.0;  // start time of sample 0
  std::vector<double> I;
  std::vector<double> Q;
  double demod_phase = 0.0;
  double omega_p = 0.0;

  std::size_t size() const { return I.size(); }
  /// Drops the first `n` samples (settling).
  IQSeries tail(std::size_t n) const;
};

/// S2_out[k] = G*F_z[k]*S1*dt + dS2[k], reusing the dS2 realization stored in
/// the trajectory so that readout noise and back-action share one probe state.
RawSignal faraday_signal(const SpinTrajectory& traj, double coupling);
inline RawSignal faraday_signal(const SpinTrajectory& traj) {
  return faraday_signal(traj, traj.params.coupling);
}

/// Boxcar lock-in: I = <raw * 2cos(w t + phase)>, Q = <raw * 2sin(w t + phase)>
/// over consecutive blocks of `decimation` samples, so the raw signal reads
/// I cos(w t + phase) + Q sin(w t + phase). A trailing partial block is dropped.
IQSeries demodulate(const RawSignal& raw, double omega_p, double demod_phase,
                    std::size_t decimation);

/// Demodulation phase that zeroes mean(Q) over the trajectory after
/// `skip_time`, with mean(I) > 0. Throws std::runtime_error when the
/// oscillation is not resolved above the noise of the mean.
double calibrate_demod_phase(const SpinTrajectory& traj, double coupling, double omega_p,
                             std::size_t decimation, double skip_time = 0.0);

}  // namespace hopm
