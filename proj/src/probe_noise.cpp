#include "hopm/probe_noise.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "hopm/rng.hpp"

namespace hopm {

namespace {

// Relative slack for the uncertainty product, so that a pure state built from
// dB figures is not rejected over rounding.
constexpr double kPurityTolerance = 1e-12;

double db_to_factor(double db) { return std::pow(10.0, db / 10.0); }

}  // namespace

double ProbeParams::squeezing_db() const { return -10.0 * std::log10(xi2); }

double ProbeParams::antisqueezing_db() const { return 10.0 * std::log10(xibar2); }

void ProbeParams::validate() const {
  if (!(photon_flux > 0.0) || !std::isfinite(photon_flux)) {
    throw std::invalid_argument("probe: photon flux must be positive and finite");
  }
  if (!(xi2 > 0.0) || !(xibar2 > 0.0) || !std::isfinite(xi2) || !std::isfinite(xibar2)) {
    throw std::invalid_argument("probe: squeezing factors must be positive and finite");
  }
  if (xi2 * xibar2 < 1.0 - kPurityTolerance) {
    throw std::invalid_argument("probe: xi2*xibar2 = " + std::to_string(xi2 * xibar2) +
                                " violates the uncertainty bound");
  }
}

ProbeParams make_probe(double photon_flux, double squeezing_db,
                       std::optional<double> antisqueezing_db) {
  if (!std::isfinite(squeezing_db)) {
    throw std::invalid_argument("probe: squeezing must be finite");
  }
  ProbeParams p;
  p.photon_flux = photon_flux;
  p.xi2 = db_to_factor(-squeezing_db);
  if (antisqueezing_db) {
    if (!std::isfinite(*antisqueezing_db)) {
      throw std::invalid_argument("probe: antisqueezing must be finite");
    }
    p.xibar2 = db_to_factor(*antisqueezing_db);
  } else {
    p.xibar2 = 1.0 / p.xi2;
  }
  p.validate();
  return p;
}

StokesSeries sample_stokes(const ProbeParams& probe, double dt, std::size_t n_steps,
                           std::uint64_t seed) {
  probe.validate();
  if (!(dt > 0.0)) throw std::invalid_argument("sample_stokes: dt must be positive");
  if (n_steps < 1) throw std::invalid_argument("sample_stokes: need at least one step");

  StokesSeries out;
  out.dt = dt;
  out.s1 = probe.photon_flux;
  out.ds2.resize(n_steps);
  out.ds3.resize(n_steps);

  const double sigma2 = std::sqrt(probe.xi2 * probe.photon_flux * dt);
  const double sigma3 = std::sqrt(probe.xibar2 * probe.photon_flux * dt);
  Engine e2 = make_stream(seed, NoiseStream::kStokesS2);
  Engine e3 = make_stream(seed, NoiseStream::kStokesS3);
  std::normal_distribution<double> normal;
  for (auto& v : out.ds2) v = sigma2 * normal(e2);
  normal.reset();
  for (auto& v : out.ds3) v = sigma3 * normal(e3);
  return out;
}

}  // namespace hopm
