#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace hopm {

enum class Window { kHann, kRectangular };

std::string window_name(Window w);

/// Single-sided power spectral density. For a raw periodogram `bin_counts` is
/// empty; after log binning it holds the number of periodogram bins averaged
/// into each point.
struct Spectrum {
  std::vector<double> freqs;  // Hz, strictly increasing
  std::vector<double> psd;    // input units^2 / Hz
  int n_averages = 1;
  Window window = Window::kHann;
  double enbw = 0.0;  // Hz
  double df = 0.0;    // periodogram bin spacing, Hz
  std::vector<int> bin_counts;
  std::uint64_t config_hash = 0;  // producer's configuration, 0 if unknown

  std::size_t size() const { return freqs.size(); }
};

/// Windowed single-sided periodogram. White noise of variance s^2 sampled at
/// dt has expected level 2 s^2 dt; sum(psd)*df equals the window-weighted
/// mean square sum((w x)^2)/sum(w^2). Requires >= 16 finite samples.
Spectrum psd(std::span<const double> series, double dt, Window window = Window::kHann);

/// Welch estimate for a single long record: segments of `segment_length`
/// samples with 50% overlap, averaged.
Spectrum psd_segmented(std::span<const double> series, double dt, std::size_t segment_length,
                       Window window = Window::kHann);

/// Pointwise mean weighted by each spectrum's n_averages; axes must match.
Spectrum average_spectra(std::span<const Spectrum> spectra);

/// Averages psd within logarithmically spaced bins with edges at
/// 10^(j/bins_per_decade) Hz. Each point sits at the geometric mean of the
/// first and last frequency in its bin; empty bins and f = 0 are dropped.
Spectrum log_bin(const Spectrum& spectrum, int bins_per_decade);

/// sum((w x)^2)/sum(w^2), the quantity matched by sum(psd)*df.
double windowed_mean_square(std::span<const double> series, Window window);

/// Ratio of the variance of a sum of neighbouring periodogram bins to the
/// variance that independent bins would give; 1 for rectangular, 35/18 for
/// Hann. Used to temper the per-bin likelihood of windowed spectra.
double window_bin_correlation_factor(Window window);

/// Restricts a spectrum to f_lo <= f <= f_hi.
Spectrum crop(const Spectrum& spectrum, double f_lo, double f_hi);

}  // namespace hopm
