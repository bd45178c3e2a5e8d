#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>

#include "hopm/noise_model.hpp"
#include "hopm/readout.hpp"
#include "hopm/spectral.hpp"
#include "hopm/spin_sim.hpp"

namespace hopm {

/// Everything needed to turn a seed into demodulated quadratures at one
/// operating point.
struct SimContext {
  FieldConfig fields;
  SpinParams spin;
  ProbeParams probe;
  double dt = 0.0;
  double settle = 0.0;  // s discarded before analysis
  double record = 0.0;  // s analysed
  std::size_t decimation = 200;
  double demod_phase = 0.0;
  UnpolarizedMode unpolarized_mode = UnpolarizedMode::kDepolarizingPump;
  NoiseSwitches noise;
  double fit_f_min = 50.0;    // Hz
  double fit_f_max = 5000.0;  // Hz
  std::vector<FrequencyBand> mask;
  std::uint64_t config_hash = 0;

  double duration() const { return settle + record; }
  double output_dt() const { return dt * static_cast<double>(decimation); }
  void validate() const;
  /// Fit settings for this context's analysis band and probe.
  FitOptions fit_options(FitMode mode, Quadrature quadrature) const;
};

/// Resonant hybrid operating point: pump and Larmor frequency f_p, tip angle
/// psi, 200 steps per pump period, one pump period per output sample.
SimContext default_context(double psi = 0.7853981633974483);

/// Sets demod_phase from a noiseless polarized run so that mean(Q) = 0.
void calibrate(SimContext& ctx);

/// Noise-free polarized steady state: time-mean of I and Q after settling.
struct Carrier {
  double i = 0.0;
  double q = 0.0;
};
Carrier carrier(const SimContext& ctx);

/// Demodulated record after the settling time.
IQSeries simulate_iq(const SimContext& ctx, bool polarized, std::uint64_t seed);

struct QuadratureSpectra {
  Spectrum I;
  Spectrum Q;
};

/// Mean-subtracted periodograms of both quadratures for one record.
QuadratureSpectra record_spectra(const IQSeries& iq, Window window = Window::kHann);

/// Average over `iterations` records; iteration i uses derive_seed(seed, i).
QuadratureSpectra noise_spectra(const SimContext& ctx, bool polarized, int iterations,
                                std::uint64_t seed, int jobs = 1);

/// Runs fn(0..n-1) on up to `jobs` threads. Results must not depend on the
/// execution order; the first exception thrown is rethrown.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

}  // namespace hopm
