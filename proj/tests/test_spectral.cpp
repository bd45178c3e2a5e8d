#include <doctest.h>

#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "hopm/spectral.hpp"

using namespace hopm;

namespace {

std::vector<double> white(std::size_t n, double sigma, unsigned seed) {
  std::mt19937_64 eng(seed);
  std::normal_distribution<double> g(0.0, sigma);
  std::vector<double> x(n);
  for (auto& v : x) v = g(eng);
  return x;
}

}  // namespace

TEST_CASE("Parseval identity holds for both windows") {
  const auto x = white(4096, 1.3, 1);
  for (Window w : {Window::kHann, Window::kRectangular}) {
    const auto s = psd(x, 1e-4, w);
    const double total = std::accumulate(s.psd.begin(), s.psd.end(), 0.0) * s.df;
    CHECK(total == doctest::Approx(windowed_mean_square(x, w)).epsilon(1e-9));
  }
  const auto odd = white(1001, 0.7, 2);
  const auto s = psd(odd, 1e-3);
  CHECK(std::accumulate(s.psd.begin(), s.psd.end(), 0.0) * s.df ==
        doctest::Approx(windowed_mean_square(odd, Window::kHann)).epsilon(1e-9));
}

TEST_CASE("white noise sits at 2 sigma^2 dt") {
  const double sigma = 2.0;
  const double dt = 1e-3;
  std::vector<Spectrum> runs;
  for (unsigned k = 0; k < 40; ++k) runs.push_back(psd(white(2048, sigma, 100 + k), dt));
  const auto avg = average_spectra(runs);
  CHECK(avg.n_averages == 40);
  const double mean = std::accumulate(avg.psd.begin() + 1, avg.psd.end() - 1, 0.0) /
                      static_cast<double>(avg.size() - 2);
  CHECK(mean == doctest::Approx(2.0 * sigma * sigma * dt).epsilon(0.01));
}

TEST_CASE("a bin-centred sinusoid lands in its bin with the right power") {
  const std::size_t n = 1000;
  const double dt = 1e-3;
  const double f0 = 50.0;  // bin 50
  const double amp = 3.0;
  std::vector<double> x(n);
  for (std::size_t k = 0; k < n; ++k) x[k] = amp * std::cos(2 * std::numbers::pi * f0 * k * dt);
  const auto s = psd(x, dt, Window::kRectangular);
  const auto peak = std::max_element(s.psd.begin(), s.psd.end()) - s.psd.begin();
  CHECK(s.freqs[static_cast<std::size_t>(peak)] == doctest::Approx(f0));
  CHECK(s.psd[static_cast<std::size_t>(peak)] * s.df == doctest::Approx(amp * amp / 2.0).epsilon(1e-9));
}

TEST_CASE("Hann bin correlation factor matches a Monte Carlo estimate") {
  CHECK(window_bin_correlation_factor(Window::kRectangular) == 1.0);
  // adjacent Hann bins correlate with coefficients (2/3)^2 and (1/6)^2
  CHECK(window_bin_correlation_factor(Window::kHann) ==
        doctest::Approx(1.0 + 2.0 * (4.0 / 9.0 + 1.0 / 36.0)));

  const std::size_t width = 32;
  std::vector<double> sums;
  std::vector<double> singles;
  for (unsigned r = 0; r < 600; ++r) {
    const auto s = psd(white(1024, 1.0, 5000 + r), 1.0);
    double acc = 0.0;
    for (std::size_t k = 100; k < 100 + width; ++k) acc += s.psd[k];
    sums.push_back(acc);
    singles.push_back(s.psd[300]);
  }
  auto var = [](const std::vector<double>& v) {
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double a = 0.0;
    for (double x : v) a += (x - m) * (x - m);
    return a / static_cast<double>(v.size() - 1);
  };
  const double ratio = var(sums) / (static_cast<double>(width) * var(singles));
  CHECK(ratio == doctest::Approx(window_bin_correlation_factor(Window::kHann)).epsilon(0.2));
}

TEST_CASE("log binning conserves bins and places points at geometric means") {
  const auto s = psd(white(20000, 1.0, 3), 1e-4);
  const auto b = log_bin(s, 10);
  CHECK(b.bin_counts.size() == b.size());
  const int total = std::accumulate(b.bin_counts.begin(), b.bin_counts.end(), 0);
  CHECK(total == static_cast<int>(s.size()) - 1);  // f = 0 dropped
  for (std::size_t i = 1; i < b.size(); ++i) CHECK(b.freqs[i] > b.freqs[i - 1]);
  // first point: bin [1, 10^0.1) Hz holds only 1 Hz bins
  CHECK(b.freqs.front() > 0.0);
  double weighted = 0.0;
  double raw = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) weighted += b.psd[i] * b.bin_counts[i];
  for (std::size_t i = 1; i < s.size(); ++i) raw += s.psd[i];
  CHECK(weighted == doctest::Approx(raw).epsilon(1e-12));
}

TEST_CASE("crop and input validation") {
  const auto s = psd(white(512, 1.0, 4), 1e-3);
  const auto c = crop(s, 100.0, 200.0);
  CHECK(c.freqs.front() >= 100.0);
  CHECK(c.freqs.back() <= 200.0);
  std::vector<double> tiny(8, 1.0);
  CHECK_THROWS(psd(tiny, 1e-3));
  std::vector<double> bad(64, 0.0);
  bad[3] = std::nan("");
  CHECK_THROWS(psd(bad, 1e-3));
  auto other = psd(white(256, 1.0, 5), 1e-3);
  std::vector<Spectrum> mixed{s, other};
  CHECK_THROWS(average_spectra(mixed));
}

TEST_CASE("segmented estimate agrees with the white level") {
  const auto s = psd_segmented(white(65536, 1.0, 8), 1e-3, 1024);
  const double mean = std::accumulate(s.psd.begin() + 1, s.psd.end() - 1, 0.0) /
                      static_cast<double>(s.size() - 2);
  CHECK(mean == doctest::Approx(2e-3).epsilon(0.03));
}
