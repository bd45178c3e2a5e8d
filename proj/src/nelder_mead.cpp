#include "hopm/nelder_mead.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace hopm {

namespace {

struct Simplex {
  std::vector<std::vector<double>> x;
  std::vector<double> f;
};

class Counter {
 public:
  Counter(const Objective& f, int budget) : f_(f), budget_(budget) {}
  double operator()(const std::vector<double>& x) {
    ++count_;
    const double v = f_(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  }
  bool exhausted() const { return count_ >= budget_; }
  int count() const { return count_; }

 private:
  const Objective& f_;
  int budget_;
  int count_ = 0;
};

bool collapsed(const Simplex& s, std::size_t best, double f_tol, double x_tol) {
  const auto [lo, hi] = std::minmax_element(s.f.begin(), s.f.end());
  if (!(*hi - *lo <= f_tol)) return false;
  for (const auto& v : s.x) {
    for (std::size_t j = 0; j < v.size(); ++j) {
      if (std::abs(v[j] - s.x[best][j]) > x_tol * (1.0 + std::abs(s.x[best][j]))) return false;
    }
  }
  return true;
}

// One simplex run; returns true on collapse, false when the budget ran out.
bool run_simplex(Simplex& s, Counter& eval, double f_tol, double x_tol) {
  const std::size_t n = s.x.front().size();
  std::vector<std::size_t> order(n + 1);
  std::vector<double> centroid(n), trial(n), trial2(n);
  while (true) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return s.f[a] < s.f[b]; });
    const std::size_t best = order.front();
    const std::size_t worst = order.back();
    const std::size_t second = order[n - 1];
    if (collapsed(s, best, f_tol, x_tol)) return true;
    if (eval.exhausted()) return false;

    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t i = 0; i <= n; ++i) {
      if (i == worst) continue;
      for (std::size_t j = 0; j < n; ++j) centroid[j] += s.x[i][j] / static_cast<double>(n);
    }
    auto along = [&](double t, std::vector<double>& out) {
      for (std::size_t j = 0; j < n; ++j) out[j] = centroid[j] + t * (s.x[worst][j] - centroid[j]);
    };

    along(-1.0, trial);
    const double fr = eval(trial);
    if (fr < s.f[best]) {
      along(-2.0, trial2);
      const double fe = eval(trial2);
      if (fe < fr) {
        s.x[worst] = trial2;
        s.f[worst] = fe;
      } else {
        s.x[worst] = trial;
        s.f[worst] = fr;
      }
      continue;
    }
    if (fr < s.f[second]) {
      s.x[worst] = trial;
      s.f[worst] = fr;
      continue;
    }
    const bool outside = fr < s.f[worst];
    along(outside ? -0.5 : 0.5, trial2);
    const double fc = eval(trial2);
    if (fc < (outside ? fr : s.f[worst])) {
      s.x[worst] = trial2;
      s.f[worst] = fc;
      continue;
    }
    for (std::size_t i = 0; i <= n; ++i) {
      if (i == best) continue;
      for (std::size_t j = 0; j < n; ++j) s.x[i][j] = s.x[best][j] + 0.5 * (s.x[i][j] - s.x[best][j]);
      s.f[i] = eval(s.x[i]);
    }
  }
}

Simplex build(const std::vector<double>& x0, double f0, const std::vector<double>& step,
              Counter& eval) {
  Simplex s;
  s.x.push_back(x0);
  s.f.push_back(f0);
  for (std::size_t j = 0; j < x0.size(); ++j) {
    auto v = x0;
    v[j] += step[j];
    s.f.push_back(eval(v));
    s.x.push_back(std::move(v));
  }
  return s;
}

}  // namespace

NelderMeadResult nelder_mead(const Objective& f, std::vector<double> x0,
                             const NelderMeadOptions& options) {
  if (x0.empty()) throw std::invalid_argument("nelder_mead: empty parameter vector");
  std::vector<double> step = options.initial_step;
  if (step.empty()) {
    step.resize(x0.size());
    for (std::size_t j = 0; j < x0.size(); ++j) step[j] = 0.1 * (1.0 + std::abs(x0[j]));
  }
  if (step.size() != x0.size()) throw std::invalid_argument("nelder_mead: step size mismatch");

  Counter eval(f, options.max_evaluations);
  NelderMeadResult result;
  result.x = std::move(x0);
  result.f = eval(result.x);

  for (int attempt = 0; attempt <= options.max_restarts; ++attempt) {
    Simplex s = build(result.x, result.f, step, eval);
    const bool done = run_simplex(s, eval, options.f_tol, options.x_tol);
    const auto best = static_cast<std::size_t>(
        std::min_element(s.f.begin(), s.f.end()) - s.f.begin());
    const double improvement = result.f - s.f[best];
    result.x = s.x[best];
    result.f = s.f[best];
    result.restarts = attempt;
    if (!done) break;
    if (attempt > 0 && improvement <= options.f_tol) {
      result.converged = true;
      break;
    }
    // Rebuild smaller each time; the first restart still probes broadly.
    for (auto& v : step) v *= 0.1;
  }
  result.evaluations = eval.count();
  return result;
}

}  // namespace hopm
