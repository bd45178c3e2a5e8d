#include "hopm/sensitivity.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <limits>
#include <string>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "hopm/rng.hpp"

namespace hopm {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kLinearResidual = 0.02;
constexpr double kMinSnr = 10.0;

const std::vector<double>& channel_series(const IQSeries& iq, ToneChannel channel) {
  return channel == ToneChannel::kDc ? iq.Q : iq.I;
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Applies a static perturbation of signed size `a` on the channel.
SimContext perturbed(const SimContext& ctx, ToneChannel channel, double a) {
  SimContext out = ctx;
  if (channel == ToneChannel::kDc) {
    out.fields.b_dc += a;
  } else {
    out.fields.b_rf_amp = std::abs(a);
    out.fields.b_rf_phase = in_phase_rf_phase(ctx.spin) + (a < 0.0 ? std::numbers::pi : 0.0);
  }
  return out;
}

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double max_residual = 0.0;
};

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  for (std::size_t i = 0; i < x.size(); ++i) {
    f.max_residual = std::max(f.max_residual, std::abs(y[i] - f.intercept - f.slope * x[i]));
  }
  return f;
}

double mean_se(const std::vector<double>& v, double& se) {
  const double m = mean_of(v);
  se = 0.0;
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    se = std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
  }
  return m;
}

// Tone measurement of one record.
struct ToneReading {
  double power = 0.0;  // noise-corrected tone power (mean square)
  double noise = 0.0;  // noise power inside the tone window
  std::complex<double> phasor;  // least-squares amplitude c1 - i c2
};

ToneReading read_tone(const std::vector<double>& y, double dt, double f) {
  ToneReading r;
  std::vector<double> centred = y;
  const double offset = mean_of(y);
  for (double& v : centred) v -= offset;
  const Spectrum s = psd(centred, dt, Window::kHann);
  const auto k0 = static_cast<long>(std::llround(f / s.df));
  const long n = static_cast<long>(s.size());
  double tone = 0.0;
  int tone_bins = 0;
  for (long k = std::max(1L, k0 - 2); k <= std::min(n - 1, k0 + 2); ++k) {
    tone += s.psd[static_cast<std::size_t>(k)] * s.df;
    ++tone_bins;
  }
  std::vector<double> floor;
  for (long k = k0 + 4; k <= k0 + 40 && k < n; ++k) floor.push_back(s.psd[static_cast<std::size_t>(k)]);
  for (long k = k0 - 4; k >= std::max(2L, k0 - 40); --k) floor.push_back(s.psd[static_cast<std::size_t>(k)]);
  const double level = floor.empty() ? 0.0 : mean_of(floor);
  r.noise = level * s.df * tone_bins;
  r.power = tone - r.noise;

  const Eigen::Index m = static_cast<Eigen::Index>(y.size());
  Eigen::MatrixXd A(m, 3);
  Eigen::VectorXd b(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double ph = kTwoPi * f * static_cast<double>(i) * dt;
    A(i, 0) = 1.0;
    A(i, 1) = std::cos(ph);
    A(i, 2) = std::sin(ph);
    b(i) = y[static_cast<std::size_t>(i)];
  }
  const Eigen::Vector3d c = A.colPivHouseholderQr().solve(b);
  r.phasor = {c(1), -c(2)};
  return r;
}

}  // namespace

std::string channel_name(ToneChannel channel) {
  switch (channel) {
    case ToneChannel::kDc: return "dc";
    case ToneChannel::kRf: return "rf";
    default: return "none";
  }
}

StaticResponse responsivity_at_zero(ToneChannel channel, const SimContext& ctx,
                                    std::span<const double> amplitudes,
                                    const ResponseOptions& options) {
  if (channel == ToneChannel::kNone) throw std::invalid_argument("responsivity: no channel");
  if (amplitudes.size() < 2) throw std::invalid_argument("responsivity: need two amplitudes");
  StaticResponse out;
  out.channel = channel;
  out.amplitudes.assign(amplitudes.begin(), amplitudes.end());

  const bool noisy = options.iterations > 0;
  const std::size_t runs = noisy ? static_cast<std::size_t>(options.iterations) : 1;
  const std::size_t points = amplitudes.size() + 1;  // last entry is the baseline
  std::vector<double> level(runs * points);
  SimContext base = ctx;
  if (!noisy) base.noise = {false, false, false};
  parallel_for(level.size(), options.jobs, [&](std::size_t job) {
    const std::size_t run = job / points;
    const std::size_t p = job % points;
    const double a = p < amplitudes.size() ? amplitudes[p] : 0.0;
    const IQSeries iq = simulate_iq(perturbed(base, channel, a), true, derive_seed(options.seed, run));
    level[job] = mean_of(channel_series(iq, channel));
  });

  std::vector<double> slopes;
  out.responses.assign(amplitudes.size(), 0.0);
  for (std::size_t run = 0; run < runs; ++run) {
    std::vector<double> y(amplitudes.size());
    for (std::size_t p = 0; p < amplitudes.size(); ++p) {
      y[p] = level[run * points + p] - level[run * points + amplitudes.size()];
      out.responses[p] += y[p] / static_cast<double>(runs);
    }
    slopes.push_back(fit_line(out.amplitudes, y).slope);
  }
  const LineFit f = fit_line(out.amplitudes, out.responses);
  out.r0 = f.slope;
  out.intercept = f.intercept;
  if (noisy) mean_se(slopes, out.r0_sigma);
  const auto [lo, hi] = std::minmax_element(out.responses.begin(), out.responses.end());
  const double span = std::max(*hi, 0.0) - std::min(*lo, 0.0);
  out.max_residual_fraction = span > 0.0 ? f.max_residual / span : 0.0;
  out.linear = span > 0.0 && out.max_residual_fraction < kLinearResidual;
  return out;
}

double linear_bound(ToneChannel channel, const SimContext& ctx) {
  double a = 0.01 * ctx.spin.linewidth() / std::abs(ctx.spin.gamma);
  double best = 0.0;
  for (int k = 0; k < 14; ++k, a *= 2.0) {
    const std::vector<double> ladder{-a, -0.5 * a, 0.5 * a, a};
    if (!responsivity_at_zero(channel, ctx, ladder).linear) break;
    best = a;
  }
  if (best == 0.0) throw std::runtime_error("linear_bound: no linear regime found for " + channel_name(channel));
  return best;
}

double Responsivity::ratio_at(double f_hz) const {
  if (freqs.empty()) throw std::invalid_argument("responsivity: empty");
  const double rel = 1e-9;
  if (f_hz < freqs.front() * (1.0 - rel) || f_hz > freqs.back() * (1.0 + rel)) {
    throw std::out_of_range("responsivity: " + std::to_string(f_hz) +
                            " Hz outside the measured range (no extrapolation)");
  }
  if (freqs.size() == 1) return r_ratio.front();
  const auto it = std::upper_bound(freqs.begin(), freqs.end(), f_hz);
  const std::size_t j = std::clamp<std::size_t>(static_cast<std::size_t>(it - freqs.begin()), 1, freqs.size() - 1);
  const double x0 = std::log(freqs[j - 1]);
  const double x1 = std::log(freqs[j]);
  const double t = std::clamp((std::log(f_hz) - x0) / (x1 - x0), 0.0, 1.0);
  return std::exp((1.0 - t) * std::log(r_ratio[j - 1]) + t * std::log(r_ratio[j]));
}

Responsivity Responsivity::reliable_only() const {
  Responsivity out = *this;
  out.freqs.clear();
  out.r_ratio.clear();
  out.r_ratio_sigma.clear();
  out.direct_ratio.clear();
  out.snr.clear();
  out.reliable.clear();
  for (std::size_t i = 0; i < freqs.size(); ++i) {
    if (i != 0 && !reliable[i]) continue;
    out.freqs.push_back(freqs[i]);
    out.r_ratio.push_back(r_ratio[i]);
    out.r_ratio_sigma.push_back(r_ratio_sigma[i]);
    out.direct_ratio.push_back(direct_ratio[i]);
    out.snr.push_back(snr[i]);
    out.reliable.push_back(reliable[i]);
  }
  return out;
}

Responsivity responsivity_spectrum(ToneChannel channel, const SimContext& ctx,
                                   std::span<const double> test_freqs, double test_amplitude,
                                   const ResponseOptions& options) {
  if (channel == ToneChannel::kNone) throw std::invalid_argument("responsivity: no channel");
  if (!(test_amplitude > 0.0)) throw std::invalid_argument("responsivity: amplitude must be positive");
  Responsivity out;
  out.channel = channel;
  out.amplitude = test_amplitude;
  const double anchor = 1.0 / (10.0 * ctx.record);
  out.freqs.push_back(anchor);
  std::vector<double> sorted(test_freqs.begin(), test_freqs.end());
  std::sort(sorted.begin(), sorted.end());
  const double nyquist = 0.5 / ctx.output_dt();
  for (double f : sorted) {
    if (!(f > anchor) || !(f < nyquist)) {
      throw std::invalid_argument("responsivity: test frequency " + std::to_string(f) +
                                  " Hz outside (anchor, Nyquist)");
    }
    if (f > out.freqs.back()) out.freqs.push_back(f);
  }

  const bool noisy = options.iterations > 0;
  const std::size_t runs = noisy ? static_cast<std::size_t>(options.iterations) : 1;
  const std::size_t nf = out.freqs.size();
  std::vector<ToneReading> readings(nf * runs);
  SimContext base = ctx;
  if (!noisy) base.noise = {false, false, false};
  if (channel == ToneChannel::kRf) base.fields.b_rf_phase = in_phase_rf_phase(ctx.spin);

  parallel_for(readings.size(), options.jobs, [&](std::size_t job) {
    const std::size_t fi = job / runs;
    const std::size_t run = job % runs;
    const double f = out.freqs[fi];
    SimContext c = base;
    const double cycles = std::max(3.0, std::ceil(f * ctx.record - 1e-9));
    c.record = std::round(cycles / f / c.output_dt()) * c.output_dt();
    c.fields.tone = {channel, test_amplitude, kTwoPi * f, 0.0};
    const IQSeries iq = simulate_iq(c, true, derive_seed(options.seed, fi * runs + run));
    readings[job] = read_tone(channel_series(iq, channel), iq.dt_out, f);
  });

  std::vector<double> gain2(nf);
  std::vector<double> gain2_se(nf);
  std::vector<double> direct2(nf);
  out.snr.resize(nf);
  for (std::size_t fi = 0; fi < nf; ++fi) {
    std::vector<double> g2;
    std::complex<double> phasor = 0.0;
    double noise = 0.0;
    double power = 0.0;
    for (std::size_t run = 0; run < runs; ++run) {
      const ToneReading& r = readings[fi * runs + run];
      g2.push_back(2.0 * r.power / (test_amplitude * test_amplitude));
      phasor += r.phasor / static_cast<double>(runs);
      noise += r.noise / static_cast<double>(runs);
      power += r.power / static_cast<double>(runs);
    }
    gain2[fi] = mean_se(g2, gain2_se[fi]);
    direct2[fi] = std::norm(phasor) / (test_amplitude * test_amplitude);
    out.snr[fi] = noise > 0.0 ? power / noise : std::numeric_limits<double>::infinity();
  }
  out.r0 = std::sqrt(std::max(gain2.front(), 0.0));
  out.r0_sigma = out.r0 > 0.0 ? 0.5 * gain2_se.front() / out.r0 : 0.0;
  for (std::size_t fi = 0; fi < nf; ++fi) {
    const double ratio = gain2[fi] / gain2.front();
    out.r_ratio.push_back(ratio);
    const double rel = std::hypot(gain2_se[fi] / gain2[fi], fi == 0 ? 0.0 : gain2_se.front() / gain2.front());
    out.r_ratio_sigma.push_back(std::abs(ratio) * rel);
    out.direct_ratio.push_back(direct2[fi] / direct2.front());
    out.reliable.push_back(out.snr[fi] >= kMinSnr && ratio > 0.0);
  }
  return out;
}

std::vector<double> MagneticNoiseSpectrum::amplitude_density() const {
  std::vector<double> out(s_b.size());
  std::transform(s_b.begin(), s_b.end(), out.begin(), [](double v) { return std::sqrt(v); });
  return out;
}

MagneticNoiseSpectrum equivalent_noise(const Spectrum& noise, const Responsivity& resp) {
  if (!(resp.r0 > 0.0)) throw std::invalid_argument("equivalent_noise: responsivity is zero");
  MagneticNoiseSpectrum out;
  out.channel = resp.channel;
  out.config_hash = noise.config_hash;
  for (std::size_t i = 0; i < noise.size(); ++i) {
    const double r2 = resp.r0 * resp.r0 * resp.ratio_at(noise.freqs[i]);
    if (!(r2 > 0.0)) throw std::invalid_argument("equivalent_noise: non-positive responsivity");
    out.freqs.push_back(noise.freqs[i]);
    out.s_b.push_back(noise.psd[i] / r2);
  }
  return out;
}

}  // namespace hopm
