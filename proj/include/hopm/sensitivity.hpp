#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hopm/pipeline.hpp"
#include "hopm/spectral.hpp"

namespace hopm {

std::string channel_name(ToneChannel channel);

/// Noise handling for responsivity runs. iterations = 0 runs noise-free;
/// otherwise responses are averaged over that many seeded runs.
struct ResponseOptions {
  int iterations = 0;
  std::uint64_t seed = 1;
  int jobs = 1;
};

/// Linear fit of the steady-state response around the operating point.
/// dc: mean(Q) against a B_dc offset; rf: mean(I) against the in-phase rf
/// amplitude (negative amplitudes flip the rf phase).
struct StaticResponse {
  ToneChannel channel = ToneChannel::kDc;
  double r0 = 0.0;         // signal units per T
  double r0_sigma = 0.0;   // standard error over iterations, 0 when noise-free
  double intercept = 0.0;  // response shift at zero amplitude
  double max_residual_fraction = 0.0;  // of the response span
  bool linear = false;                 // residual below 2% of the span
  std::vector<double> amplitudes;
  std::vector<double> responses;  // shift from the unperturbed operating point
};

StaticResponse responsivity_at_zero(ToneChannel channel, const SimContext& ctx,
                                    std::span<const double> amplitudes,
                                    const ResponseOptions& options = {});

/// Largest amplitude of a doubling ladder whose five-point static fit stays
/// linear.
double linear_bound(ToneChannel channel, const SimContext& ctx);

/// Ratio-method responsivity. Index 0 is the anchor tone at
/// 1/(10*ctx.record), which stands in for omega -> 0.
struct Responsivity {
  ToneChannel channel = ToneChannel::kDc;
  double amplitude = 0.0;  // test tone, T
  double r0 = 0.0;         // anchor gain magnitude, signal units per T
  double r0_sigma = 0.0;
  std::vector<double> freqs;  // Hz, increasing
  std::vector<double> r_ratio;        // R^2(f)/R^2(anchor) from tone power spectra
  std::vector<double> r_ratio_sigma;  // 0 when noise-free
  std::vector<double> direct_ratio;   // same ratio from a least-squares lock-in at f
  std::vector<double> snr;            // tone power over the local noise floor
  std::vector<bool> reliable;         // snr >= 10

  double anchor_hz() const { return freqs.front(); }
  /// Log-log interpolation of r_ratio; throws outside the measured range.
  double ratio_at(double f_hz) const;
  /// Anchor plus the reliable test frequencies.
  Responsivity reliable_only() const;
};

Responsivity responsivity_spectrum(ToneChannel channel, const SimContext& ctx,
                                   std::span<const double> test_freqs, double test_amplitude,
                                   const ResponseOptions& options = {});

/// Equivalent magnetic noise S_B(f) = S(f) / (r0^2 r_ratio(f)).
struct MagneticNoiseSpectrum {
  ToneChannel channel = ToneChannel::kDc;
  std::vector<double> freqs;  // Hz
  std::vector<double> s_b;    // T^2/Hz
  std::uint64_t config_hash = 0;

  std::vector<double> amplitude_density() const;  // T/sqrt(Hz)
};

/// Pointwise division on the spectrum's axis. Every spectrum frequency must
/// lie inside the responsivity's measured range.
MagneticNoiseSpectrum equivalent_noise(const Spectrum& noise, const Responsivity& resp);

}  // namespace hopm
