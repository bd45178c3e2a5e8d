#include "hopm/spectral.hpp"

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>
#include <stdexcept>

namespace hopm {

namespace {

// FFTW planning is not thread safe; execution on a private plan is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

std::vector<double> make_window(Window w, std::size_t n) {
  std::vector<double> out(n, 1.0);
  if (w == Window::kHann) {
    // periodic (DFT-even) Hann
    for (std::size_t i = 0; i < n; ++i) {
      out[i] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                     static_cast<double>(n)));
    }
  }
  return out;
}

std::vector<std::complex<double>> real_fft(const std::vector<double>& x) {
  const int n = static_cast<int>(x.size());
  std::vector<double> in(x);
  std::vector<std::complex<double>> out(x.size() / 2 + 1);
  fftw_plan plan;
  {
    std::lock_guard lock(planner_mutex());
    plan = fftw_plan_dft_r2c_1d(n, in.data(), reinterpret_cast<fftw_complex*>(out.data()),
                                FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan);
  }
  return out;
}

bool same_axis(const Spectrum& a, const Spectrum& b) {
  if (a.freqs.size() != b.freqs.size()) return false;
  for (std::size_t i = 0; i < a.freqs.size(); ++i) {
    if (std::abs(a.freqs[i] - b.freqs[i]) > 1e-12 * std::max(1.0, std::abs(a.freqs[i]))) {
      return false;
    }
  }
  return a.bin_counts == b.bin_counts && a.window == b.window;
}

}  // namespace

std::string window_name(Window w) { return w == Window::kHann ? "hann" : "rectangular"; }

double windowed_mean_square(std::span<const double> series, Window window) {
  const auto w = make_window(window, series.size());
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < series.size(); ++i) {
    num += w[i] * w[i] * series[i] * series[i];
    den += w[i] * w[i];
  }
  return num / den;
}

double window_bin_correlation_factor(Window window) {
  return window == Window::kHann ? 35.0 / 18.0 : 1.0;
}

Spectrum psd(std::span<const double> series, double dt, Window window) {
  const std::size_t n = series.size();
  if (n < 16) throw std::invalid_argument("psd: need at least 16 samples");
  if (!(dt > 0.0)) throw std::invalid_argument("psd: dt must be positive");
  for (double v : series) {
    if (!std::isfinite(v)) throw std::invalid_argument("psd: non-finite sample");
  }

  const auto w = make_window(window, n);
  std::vector<double> x(n);
  double s1 = 0.0;
  double s2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = w[i] * series[i];
    s1 += w[i];
    s2 += w[i] * w[i];
  }
  const auto X = real_fft(x);

  Spectrum out;
  out.window = window;
  out.df = 1.0 / (static_cast<double>(n) * dt);
  out.enbw = s2 / (s1 * s1) / dt;
  out.freqs.resize(X.size());
  out.psd.resize(X.size());
  const double scale = dt / s2;
  for (std::size_t k = 0; k < X.size(); ++k) {
    const bool edge = k == 0 || (n % 2 == 0 && k == n / 2);
    out.freqs[k] = static_cast<double>(k) * out.df;
    out.psd[k] = (edge ? 1.0 : 2.0) * std::norm(X[k]) * scale;
  }
  return out;
}

Spectrum psd_segmented(std::span<const double> series, double dt, std::size_t segment_length,
                       Window window) {
  if (segment_length < 16 || segment_length > series.size()) {
    throw std::invalid_argument("psd_segmented: segment length out of range");
  }
  const std::size_t hop = segment_length / 2;
  std::vector<Spectrum> parts;
  for (std::size_t start = 0; start + segment_length <= series.size(); start += hop) {
    parts.push_back(psd(series.subspan(start, segment_length), dt, window));
  }
  return average_spectra(parts);
}

Spectrum average_spectra(std::span<const Spectrum> spectra) {
  if (spectra.empty()) throw std::invalid_argument("average_spectra: nothing to average");
  Spectrum out = spectra.front();
  std::fill(out.psd.begin(), out.psd.end(), 0.0);
  int total = 0;
  for (const auto& s : spectra) {
    if (!same_axis(s, out)) throw std::invalid_argument("average_spectra: frequency axes differ");
    if (s.config_hash != out.config_hash) out.config_hash = 0;
    total += s.n_averages;
  }
  for (const auto& s : spectra) {
    const double weight = static_cast<double>(s.n_averages) / static_cast<double>(total);
    for (std::size_t i = 0; i < out.psd.size(); ++i) out.psd[i] += weight * s.psd[i];
  }
  out.n_averages = total;
  return out;
}

Spectrum log_bin(const Spectrum& spectrum, int bins_per_decade) {
  if (bins_per_decade < 1) throw std::invalid_argument("log_bin: bins_per_decade must be >= 1");
  Spectrum out = spectrum;
  out.freqs.clear();
  out.psd.clear();
  out.bin_counts.clear();

  const double bpd = static_cast<double>(bins_per_decade);
  bool open = false;
  long current = 0;
  double sum = 0.0;
  double first = 0.0;
  double last = 0.0;
  int count = 0;
  auto flush = [&] {
    if (count == 0) return;
    out.freqs.push_back(std::sqrt(first * last));
    out.psd.push_back(sum / count);
    out.bin_counts.push_back(count);
  };
  for (std::size_t i = 0; i < spectrum.freqs.size(); ++i) {
    const double f = spectrum.freqs[i];
    if (!(f > 0.0)) continue;
    const int weight = spectrum.bin_counts.empty() ? 1 : spectrum.bin_counts[i];
    const auto idx = static_cast<long>(std::floor(std::log10(f) * bpd + 1e-9));
    if (!open || idx != current) {
      flush();
      open = true;
      current = idx;
      sum = 0.0;
      count = 0;
      first = f;
    }
    sum += spectrum.psd[i] * weight;
    count += weight;
    last = f;
  }
  flush();
  return out;
}

Spectrum crop(const Spectrum& spectrum, double f_lo, double f_hi) {
  Spectrum out = spectrum;
  out.freqs.clear();
  out.psd.clear();
  out.bin_counts.clear();
  for (std::size_t i = 0; i < spectrum.freqs.size(); ++i) {
    if (spectrum.freqs[i] < f_lo || spectrum.freqs[i] > f_hi) continue;
    out.freqs.push_back(spectrum.freqs[i]);
    out.psd.push_back(spectrum.psd[i]);
    if (!spectrum.bin_counts.empty()) out.bin_counts.push_back(spectrum.bin_counts[i]);
  }
  return out;
}

}  // namespace hopm
