#pragma once

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "hopm/spectral.hpp"

namespace hopm {

enum class Quadrature { kI, kQ };
enum class FitMode { kPolarized, kUnpolarized };
enum class ParamSpace { kLog, kLinear };

std::string quadrature_name(Quadrature q);
std::string fit_mode_name(FitMode m);

/// Three-component noise budget of a demodulated quadrature:
///   S(w) = xi2*psn + L(w)*(spn + xibar2*mba),  L(w) = dw^2/(w^2 + dw^2).
/// psn and mba are the squeezing-independent coefficients.
struct NoiseBudget {
  double psn = 0.0;
  double spn = 0.0;
  double mba = 0.0;
  double delta_omega = 1.0;  // rad/s
  double xi2 = 1.0;
  double xibar2 = 1.0;
  Quadrature quadrature = Quadrature::kI;

  double floor() const { return xi2 * psn; }
  double atomic_level() const { return spn + xibar2 * mba; }
  void validate() const;
};

double lorentzian(double omega, double delta_omega);

/// Evaluates the budget at angular frequency omega >= 0.
double model_psd(const NoiseBudget& budget, double omega);

struct FrequencyBand {
  double lo_hz = 0.0;
  double hi_hz = 0.0;
};

struct FitOptions {
  double xi2 = 1.0;
  double xibar2 = 1.0;
  FitMode mode = FitMode::kPolarized;
  Quadrature quadrature = Quadrature::kI;
  std::vector<FrequencyBand> mask;  // excluded from the likelihood
  double f_min_hz = 0.0;            // f = 0 is always excluded
  double f_max_hz = std::numeric_limits<double>::infinity();
  ParamSpace space = ParamSpace::kLog;
  int n_starts = 8;
  double tolerance = 1e-9;  // in log-likelihood
  bool compute_intervals = true;
};

struct Interval {
  double low = 0.0;
  double high = 0.0;

  bool contains(double v) const { return v >= low && v <= high; }
};

struct ParameterEstimate {
  double value = 0.0;
  Interval ci68;
  Interval ci95;

  /// Symmetrized 1-sigma from the 68% profile interval.
  double sigma() const { return 0.5 * (ci68.high - ci68.low); }
};

/// Maximum-likelihood fit. `atomic` is the Lorentzian amplitude: reported as
/// spn in unpolarized mode and as xibar2*mba in polarized mode.
struct FitResult {
  NoiseBudget budget;
  ParameterEstimate psn;
  ParameterEstimate atomic;
  ParameterEstimate delta_omega;
  FitMode mode = FitMode::kPolarized;
  double log_likelihood = 0.0;
  double shape = 0.0;  // effective gamma shape per periodogram bin
  int n_points = 0;
  int evaluations = 0;
  int starts_converged = 0;
  bool degenerate_linewidth = false;
  std::uint64_t config_hash = 0;
};

class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Whittle log-likelihood: each averaged bin is gamma distributed with mean
/// model_psd and shape n_averages*bin_count, divided by the window's
/// neighbouring-bin correlation factor.
double whittle_log_likelihood(const Spectrum& spectrum, const NoiseBudget& budget,
                              const FitOptions& options);

/// Fits psn, the atomic amplitude and the linewidth with xi2, xibar2 held
/// fixed. Multi-start simplex over log-spaced linewidth guesses; intervals are
/// profile-likelihood bounds. Throws FitError when no start converges.
FitResult fit_noise_model(const Spectrum& spectrum, const FitOptions& options);

/// PSN, SPN and MBA levels inferred from an unpolarized/polarized fit pair.
struct BudgetDecomposition {
  Quadrature quadrature = Quadrature::kI;
  double psn = 0.0;  // coefficient, weighted over both fits
  double psn_sigma = 0.0;
  double spn = 0.0;
  double spn_sigma = 0.0;
  double mba_level = 0.0;      // xibar2*S_MBA, clamped at 0
  double mba_level_raw = 0.0;  // before clamping
  double mba_sigma = 0.0;
  double mba_coefficient = 0.0;  // mba_level / xibar2
  double xibar2 = 1.0;
  bool clamped = false;
  std::vector<std::string> warnings;
};

/// spn = unpolarized atomic term; mba = polarized atomic term - spn.
/// Rejects fits that come from different configurations or probe settings.
BudgetDecomposition decompose_budget(const FitResult& unpolarized, const FitResult& polarized);

}  // namespace hopm
