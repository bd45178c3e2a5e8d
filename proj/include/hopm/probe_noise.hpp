#pragma once

#include <cstdint>
#include <optional>
#include <vector>

namespace hopm {

/// Probe light: mean photon flux and the variance factors applied to the S2
/// (readout) and S3 (back-action) fluctuations relative to coherent light.
struct ProbeParams {
  double photon_flux = 1.0;  // photons/s, mean S1
  double xi2 = 1.0;          // squeezing factor on S2
  double xibar2 = 1.0;       // antisqueezing factor on S3

  double squeezing_db() const;
  double antisqueezing_db() const;

  /// Throws std::invalid_argument if any invariant is violated.
  void validate() const;
};

/// Builds probe parameters from dB figures. Positive `squeezing_db` reduces S2
/// noise. Without an override the S3 factor is the minimum-uncertainty partner
/// 1/xi2; an override models impure states and must keep xi2*xibar2 >= 1.
ProbeParams make_probe(double photon_flux, double squeezing_db,
                       std::optional<double> antisqueezing_db = std::nullopt);

/// Integrated Stokes fluctuations per integration step, in photon counts.
struct StokesSeries {
  double dt = 0.0;
  double s1 = 0.0;  // mean S1 flux, photons/s
  std::vector<double> ds2;
  std::vector<double> ds3;

  std::size_t size() const { return ds2.size(); }
};

/// Independent white Gaussian increments with Var(ds2) = xi2*flux*dt and
/// Var(ds3) = xibar2*flux*dt. Each channel draws from its own stream of `seed`,
/// so runs that differ only in xi2 or xibar2 see scaled copies of the same noise.
StokesSeries sample_stokes(const ProbeParams& probe, double dt, std::size_t n_steps,
                           std::uint64_t seed);

}  // namespace hopm
