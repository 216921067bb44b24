#pragma once

#include <functional>
#include <vector>

#include "smallnoise/types.hpp"

namespace smallnoise {

using Objective = std::function<double(const DVec&)>;

struct NelderMeadOptions {
  int max_iterations = 4000;
  /// Stop when the simplex diameter falls below x_tol * (1 + |x_best|) ...
  double x_tol = 1e-8;
  /// ... or the spread of vertex values falls below f_tol relative to their magnitude.
  double f_tol = 1e-12;
  /// Initial edge length as a fraction of the box width.
  double initial_step = 0.1;
  /// Fresh-simplex restarts from the converged point.
  int polish_restarts = 2;
};

struct NelderMeadResult {
  DVec x;
  double value = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
};

/// Nelder-Mead with every trial point projected onto [lower, upper].
/// Uses dimension-adaptive coefficients. Non-finite values are treated as +inf.
[[nodiscard]] NelderMeadResult nelder_mead(const Objective& f, const DVec& start, const DVec& lower, const DVec& upper,
                                           const NelderMeadOptions& options = {});

struct MultiStartOptions {
  /// Cap on the quartile lattice size.
  int max_starts = 27;
  /// Lattice points (best screened values first) from which a full search is run.
  int refine_best = 3;
  NelderMeadOptions local;
};

struct MultiStartResult {
  DVec x;
  double value = 0.0;
  int iterations = 0;
  int restarts = 0;
  bool converged = false;
};

/// Per-dimension quartile lattice (0.25, 0.5, 0.75 of each side). When 3^d exceeds
/// `cap`, the center plus evenly strided lattice indices are kept.
[[nodiscard]] std::vector<DVec> lattice_starts(const DVec& lower, const DVec& upper, int cap);

/// Screens the lattice, runs Nelder-Mead from the best starts and keeps the best
/// local minimum (ties broken by start index). Deterministic.
[[nodiscard]] MultiStartResult multistart_minimize(const Objective& f, const DVec& lower, const DVec& upper,
                                                   const MultiStartOptions& options = {});

}  // namespace smallnoise
