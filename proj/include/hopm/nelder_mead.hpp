#pragma once

#include <functional>
#include <span>
#include <vector>

namespace hopm {

struct NelderMeadOptions {
  double f_tol = 1e-9;   // absolute spread of simplex values
  double x_tol = 1e-10;  // relative simplex diameter
  int max_evaluations = 20000;
  int max_restarts = 4;
  /// Per-coordinate initial simplex offsets; defaults to 0.1*(1+|x0|).
  std::vector<double> initial_step;
};

struct NelderMeadResult {
  std::vector<double> x;
  double f = 0.0;
  int evaluations = 0;
  int restarts = 0;
  bool converged = false;
};

using Objective = std::function<double(std::span<const double>)>;

/// Downhill simplex minimizer. After the simplex collapses it is rebuilt
/// around the best point and rerun until a restart yields no improvement
/// beyond f_tol; non-finite objective values count as +infinity.
NelderMeadResult nelder_mead(const Objective& f, std::vector<double> x0,
                             const NelderMeadOptions& options = {});

}  // namespace hopm
