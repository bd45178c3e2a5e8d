#include "hopm/noise_model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "hopm/nelder_mead.hpp"

namespace hopm {

namespace {

// Profile-likelihood drops for two-sided 68.27% and 95% intervals (chi2_1 / 2).
constexpr double kDelta68 = 0.5;
constexpr double kDelta95 = 1.920729410347062;

using Params = std::array<double, 3>;  // psn, atomic, linewidth (scaled units)

struct Prepared {
  std::vector<double> w2;     // (omega / omega_scale)^2
  std::vector<double> power;  // psd / power_scale
  std::vector<double> shape;
  double power_scale = 1.0;
  double omega_scale = 1.0;
  double xi2 = 1.0;
  double constant = 0.0;  // log-likelihood terms that do not depend on the model
  double f_lo = 0.0;
  double f_hi = 0.0;
};

bool masked(double f, const std::vector<FrequencyBand>& mask) {
  for (const auto& b : mask) {
    if (f >= b.lo_hz && f <= b.hi_hz) return true;
  }
  return false;
}

double median(std::vector<double> v) {
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

Prepared prepare(const Spectrum& spectrum, const FitOptions& opt) {
  Prepared p;
  p.xi2 = opt.xi2;
  std::vector<double> freqs;
  std::vector<double> raw;
  const double inflation = window_bin_correlation_factor(spectrum.window);
  for (std::size_t i = 0; i < spectrum.size(); ++i) {
    const double f = spectrum.freqs[i];
    if (!(f > 0.0) || f < opt.f_min_hz || f > opt.f_max_hz || masked(f, opt.mask)) continue;
    if (!(spectrum.psd[i] > 0.0) || !std::isfinite(spectrum.psd[i])) {
      throw FitError("fit: spectrum has a non-positive or non-finite bin at " + std::to_string(f) +
                     " Hz");
    }
    const double count = spectrum.bin_counts.empty() ? 1.0 : spectrum.bin_counts[i];
    freqs.push_back(f);
    raw.push_back(spectrum.psd[i]);
    p.shape.push_back(spectrum.n_averages * count / inflation);
  }
  if (freqs.size() < 12) {
    throw FitError("fit: only " + std::to_string(freqs.size()) +
                   " unmasked points; need at least 4 per free parameter");
  }
  p.power_scale = median(raw);
  p.omega_scale = 2.0 * std::numbers::pi * median(freqs);
  p.f_lo = freqs.front();
  p.f_hi = freqs.back();
  p.w2.resize(freqs.size());
  p.power.resize(freqs.size());
  for (std::size_t i = 0; i < freqs.size(); ++i) {
    const double w = 2.0 * std::numbers::pi * freqs[i] / p.omega_scale;
    p.w2[i] = w * w;
    p.power[i] = raw[i] / p.power_scale;
    const double nu = p.shape[i];
    p.constant += (nu - 1.0) * std::log(raw[i]) - nu * std::log(p.power_scale) +
                  nu * std::log(nu) - std::lgamma(nu);
  }
  return p;
}

// Negative log-likelihood up to Prepared::constant, in scaled units.
double neg_log_likelihood(const Prepared& p, const Params& x) {
  const double floor = p.xi2 * x[0];
  const double d2 = x[2] * x[2];
  double acc = 0.0;
  for (std::size_t i = 0; i < p.w2.size(); ++i) {
    const double m = floor + x[1] * d2 / (p.w2[i] + d2);
    if (!(m > 0.0)) return std::numeric_limits<double>::infinity();
    acc += p.shape[i] * (p.power[i] / m + std::log(m));
  }
  return acc;
}

double to_natural(ParamSpace space, double u) { return space == ParamSpace::kLog ? std::exp(u) : std::abs(u); }
double to_search(ParamSpace space, double v) { return space == ParamSpace::kLog ? std::log(v) : v; }

class Fitter {
 public:
  Fitter(const Prepared& p, const FitOptions& opt) : p_(p), opt_(opt) {}

  NelderMeadResult optimize(const Params& start) {
    std::vector<double> u(3);
    for (int j = 0; j < 3; ++j) u[j] = to_search(opt_.space, std::max(start[j], 1e-300));
    NelderMeadOptions nm;
    nm.f_tol = opt_.tolerance;
    nm.x_tol = 1e-10;
    nm.max_evaluations = 20000;
    nm.initial_step.resize(3);
    for (int j = 0; j < 3; ++j) {
      nm.initial_step[j] = opt_.space == ParamSpace::kLog ? 0.3 : 0.3 * std::abs(u[j]);
    }
    auto r = nelder_mead([this](std::span<const double> v) { return nll(natural(v)); }, u, nm);
    evaluations_ += r.evaluations;
    return r;
  }

  Params natural(std::span<const double> u) const {
    return {to_natural(opt_.space, u[0]), to_natural(opt_.space, u[1]),
            to_natural(opt_.space, u[2])};
  }

  double nll(const Params& x) const { return neg_log_likelihood(p_, x); }

  // Minimum over the other two parameters with parameter `j` fixed at `value`.
  double profile(int j, double value, Params& warm) {
    std::array<int, 2> free{};
    for (int k = 0, n = 0; k < 3; ++k) {
      if (k != j) free[n++] = k;
    }
    std::vector<double> u{to_search(opt_.space, std::max(warm[free[0]], 1e-300)),
                          to_search(opt_.space, std::max(warm[free[1]], 1e-300))};
    auto assemble = [&](std::span<const double> v) {
      Params x{};
      x[j] = value;
      x[free[0]] = to_natural(opt_.space, v[0]);
      x[free[1]] = to_natural(opt_.space, v[1]);
      return x;
    };
    NelderMeadOptions nm;
    nm.f_tol = 1e-9;
    nm.x_tol = 1e-8;
    nm.max_evaluations = 4000;
    nm.max_restarts = 1;
    nm.initial_step = {opt_.space == ParamSpace::kLog ? 0.05 : 0.05 * std::abs(u[0]) + 1e-12,
                       opt_.space == ParamSpace::kLog ? 0.05 : 0.05 * std::abs(u[1]) + 1e-12};
    auto r = nelder_mead([&](std::span<const double> v) { return nll(assemble(v)); }, u, nm);
    evaluations_ += r.evaluations;
    warm = assemble(r.x);
    return r.f;
  }

  // Profile bound on one side, searched in log(value). Returns 0 or +inf when
  // the profile never crosses the target.
  double bound(int j, const Params& best, double target, int direction, bool allow_zero) {
    Params warm = best;
    if (direction < 0 && allow_zero) {
      Params w0 = best;
      if (profile(j, 0.0, w0) <= target) return 0.0;
    }
    const double s0 = std::log(best[j]);
    double inside = s0;
    double outside = s0;
    double h = 0.02;
    bool bracketed = false;
    for (int it = 0; it < 48; ++it) {
      outside = s0 + direction * h;
      if (profile(j, std::exp(outside), warm) > target) {
        bracketed = true;
        break;
      }
      inside = outside;
      h *= 2.0;
    }
    if (!bracketed) return direction > 0 ? std::numeric_limits<double>::infinity() : 0.0;
    for (int it = 0; it < 30 && std::abs(outside - inside) > 1e-6; ++it) {
      const double mid = 0.5 * (inside + outside);
      if (profile(j, std::exp(mid), warm) > target) {
        outside = mid;
      } else {
        inside = mid;
      }
    }
    return std::exp(0.5 * (inside + outside));
  }

  int evaluations() const { return evaluations_; }

 private:
  const Prepared& p_;
  const FitOptions& opt_;
  int evaluations_ = 0;
};

}  // namespace

std::string quadrature_name(Quadrature q) { return q == Quadrature::kI ? "I" : "Q"; }

std::string fit_mode_name(FitMode m) {
  return m == FitMode::kPolarized ? "polarized" : "unpolarized";
}

void NoiseBudget::validate() const {
  if (!(psn >= 0.0 && spn >= 0.0 && mba >= 0.0)) {
    throw std::invalid_argument("budget: noise levels must be non-negative");
  }
  if (!(delta_omega > 0.0)) throw std::invalid_argument("budget: linewidth must be positive");
  if (!(xi2 > 0.0 && xibar2 > 0.0)) {
    throw std::invalid_argument("budget: squeezing factors must be positive");
  }
}

double lorentzian(double omega, double delta_omega) {
  const double d2 = delta_omega * delta_omega;
  return d2 / (omega * omega + d2);
}

double model_psd(const NoiseBudget& b, double omega) {
  if (!(omega >= 0.0)) throw std::invalid_argument("model_psd: omega must be non-negative");
  return b.floor() + lorentzian(omega, b.delta_omega) * b.atomic_level();
}

double whittle_log_likelihood(const Spectrum& spectrum, const NoiseBudget& budget,
                              const FitOptions& options) {
  FitOptions opt = options;
  opt.xi2 = budget.xi2;
  const Prepared p = prepare(spectrum, opt);
  const Params x{budget.psn / p.power_scale, budget.atomic_level() / p.power_scale,
                 budget.delta_omega / p.omega_scale};
  return p.constant - neg_log_likelihood(p, x);
}

FitResult fit_noise_model(const Spectrum& spectrum, const FitOptions& opt) {
  if (opt.n_starts < 1) throw std::invalid_argument("fit: need at least one start");
  if (!(opt.xi2 > 0.0 && opt.xibar2 > 0.0)) {
    throw std::invalid_argument("fit: squeezing factors must be positive");
  }
  const Prepared p = prepare(spectrum, opt);
  Fitter fitter(p, opt);

  // Starting levels from the top and bottom of the band.
  const std::size_t n = p.power.size();
  const std::size_t tail = std::max<std::size_t>(3, n / 5);
  double high = 0.0;
  for (std::size_t i = n - tail; i < n; ++i) high += p.power[i] / static_cast<double>(tail);
  double low = 0.0;
  for (std::size_t i = 0; i < tail; ++i) low += p.power[i] / static_cast<double>(tail);
  const double psn0 = high / opt.xi2;
  const double atomic0 = std::max(low - high, 0.05 * high);

  const double w_lo = 2.0 * std::numbers::pi * 2.0 * p.f_lo / p.omega_scale;
  const double w_hi = 2.0 * std::numbers::pi * 0.5 * p.f_hi / p.omega_scale;
  std::vector<NelderMeadResult> runs;
  for (int s = 0; s < opt.n_starts; ++s) {
    const double frac = opt.n_starts == 1 ? 0.5 : static_cast<double>(s) / (opt.n_starts - 1);
    const double w0 = w_lo * std::pow(w_hi / w_lo, frac);
    runs.push_back(fitter.optimize({psn0, atomic0, w0}));
  }
  auto best = std::min_element(runs.begin(), runs.end(),
                               [](const auto& a, const auto& b) { return a.f < b.f; });
  if (!best->converged) {
    auto retry = fitter.optimize(fitter.natural(best->x));
    if (retry.f <= best->f) *best = retry;
  }
  if (!best->converged || !std::isfinite(best->f)) {
    std::ostringstream msg;
    msg << "fit: no start converged after bounded restarts (best -logL = " << best->f
        << ", evaluations = " << fitter.evaluations() << ", points = " << n << ")";
    throw FitError(msg.str());
  }

  const Params x = fitter.natural(best->x);
  FitResult out;
  out.mode = opt.mode;
  out.n_points = static_cast<int>(n);
  out.shape = p.shape.front();
  out.config_hash = spectrum.config_hash;
  out.log_likelihood = p.constant - best->f;
  for (const auto& r : runs) {
    if (r.converged && r.f <= best->f + 1e-6 * (1.0 + std::abs(best->f))) ++out.starts_converged;
  }

  const std::array<double, 3> unit{p.power_scale, p.power_scale, p.omega_scale};
  std::array<ParameterEstimate*, 3> est{&out.psn, &out.atomic, &out.delta_omega};
  for (int j = 0; j < 3; ++j) {
    est[j]->value = x[j] * unit[j];
    est[j]->ci68 = est[j]->ci95 = {est[j]->value, est[j]->value};
  }
  if (opt.compute_intervals) {
    for (int j = 0; j < 3; ++j) {
      const bool zero_ok = j == 1;
      for (auto [delta, ci] : {std::pair{kDelta68, &est[j]->ci68}, std::pair{kDelta95, &est[j]->ci95}}) {
        if (x[j] <= 0.0) {
          ci->low = 0.0;
          ci->high = est[j]->value;
          continue;
        }
        const double target = best->f + delta;
        ci->low = fitter.bound(j, x, target, -1, zero_ok) * unit[j];
        ci->high = fitter.bound(j, x, target, +1, zero_ok) * unit[j];
      }
    }
  }
  out.evaluations = fitter.evaluations();
  out.degenerate_linewidth = (opt.compute_intervals && out.atomic.ci68.low <= 0.0) ||
                             !std::isfinite(out.delta_omega.ci68.high);

  NoiseBudget& b = out.budget;
  b.xi2 = opt.xi2;
  b.xibar2 = opt.xibar2;
  b.quadrature = opt.quadrature;
  b.psn = out.psn.value;
  b.delta_omega = out.delta_omega.value;
  if (opt.mode == FitMode::kUnpolarized) {
    b.spn = out.atomic.value;
  } else {
    b.mba = out.atomic.value / opt.xibar2;
  }
  return out;
}

BudgetDecomposition decompose_budget(const FitResult& unpolarized, const FitResult& polarized) {
  if (unpolarized.mode != FitMode::kUnpolarized || polarized.mode != FitMode::kPolarized) {
    throw std::invalid_argument("decompose: expected an unpolarized and a polarized fit");
  }
  if (unpolarized.config_hash != polarized.config_hash) {
    throw std::invalid_argument("decompose: fits come from different configurations");
  }
  const NoiseBudget& u = unpolarized.budget;
  const NoiseBudget& p = polarized.budget;
  auto close = [](double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(a, b); };
  if (u.quadrature != p.quadrature || !close(u.xi2, p.xi2) || !close(u.xibar2, p.xibar2)) {
    throw std::invalid_argument("decompose: fits differ in quadrature or probe settings");
  }

  BudgetDecomposition d;
  d.quadrature = u.quadrature;
  d.xibar2 = p.xibar2;

  const double su = unpolarized.psn.sigma();
  const double sp = polarized.psn.sigma();
  if (su > 0.0 && sp > 0.0) {
    const double wu = 1.0 / (su * su);
    const double wp = 1.0 / (sp * sp);
    d.psn = (wu * unpolarized.psn.value + wp * polarized.psn.value) / (wu + wp);
    d.psn_sigma = 1.0 / std::sqrt(wu + wp);
  } else {
    d.psn = 0.5 * (unpolarized.psn.value + polarized.psn.value);
  }

  d.spn = unpolarized.atomic.value;
  d.spn_sigma = unpolarized.atomic.sigma();
  d.mba_level_raw = polarized.atomic.value - d.spn;
  d.mba_sigma = std::hypot(polarized.atomic.sigma(), d.spn_sigma);
  d.mba_level = d.mba_level_raw;
  if (d.mba_level < 0.0) {
    d.mba_level = 0.0;
    d.clamped = true;
    std::ostringstream msg;
    msg << "negative MBA level " << d.mba_level_raw << " (" << quadrature_name(d.quadrature)
        << ") clamped to 0";
    d.warnings.push_back(msg.str());
  }
  d.mba_coefficient = d.mba_level / d.xibar2;
  return d;
}

}  // namespace hopm
