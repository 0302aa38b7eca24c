// Field correlation C^(m)(t) from the mode expansion of the propagator.
//
// C(t) = sum_modes w_mode |<K_m, psi_mode>|^2 exp(-rate t). The constant mode
// gives C(inf); the rest, divided by B_rms^2, is the normalized C~(t).

#pragma once

#include <memory>
#include <vector>

#include "nanonmr/parallel.hpp"
#include "nanonmr/propagator.hpp"

namespace nanonmr {

struct OverlapIntegral {
  Mode mode;
  double value;
  double quadrature_error;
};

struct OverlapSet {
  ModeSet modes;              // built for a fixed m; modes[0] is the constant mode
  int m = 0;
  std::vector<double> overlap;    // aligned with modes.modes
  std::vector<double> error;      // |change| under panel bisection
  std::vector<double> amplitude;  // normalization * overlap^2, J^2 units
  int refinements = 0;

  std::vector<OverlapIntegral> integrals() const;
};

/// Quadrature of every overlap on a shared graded tensor grid, refined by
/// bisecting all panels until every overlap changes by less than rel_tol
/// (relative to the larger of itself and 1e-3 of the dominant overlap).
/// Throws NumericError if that does not happen within the refinement budget.
OverlapSet overlap_integrals(const Geometry& g, double D, int m, const Truncation& trunc, double rel_tol = 1e-5,
                             Exec exec = Exec::parallel);

/// Process-wide memo keyed by (geometry, D, m, truncation, tolerance).
std::shared_ptr<const OverlapSet> cached_overlaps(const Geometry& g, double D, int m, const Truncation& trunc,
                                                  double rel_tol = 1e-5);

struct CorrelationCurve {
  Geometry geometry;
  int m = 0;
  Truncation truncation;
  bool normalized = true;  // C~ (dimensionless) or C (J^2)
  double brms2 = 0.0;
  double c_inf = 0.0;
  std::vector<double> times;
  std::vector<double> values;
  std::vector<double> convergence;  // outer-shell share of the decaying sum
};

/// Mode sum at each time; serial and parallel paths give identical bits
/// (per-time pairwise reduction in mode order).
std::vector<double> mode_sum(const OverlapSet& ov, const std::vector<double>& times, Exec exec = Exec::parallel,
                             std::vector<double>* convergence = nullptr);

CorrelationCurve correlation_normalized(const Geometry& g, double D, int m, const std::vector<double>& times,
                                        const Truncation& trunc, Exec exec = Exec::parallel);
CorrelationCurve correlation_full(const Geometry& g, double D, int m, const std::vector<double>& times,
                                  const Truncation& trunc, Exec exec = Exec::parallel);

/// Log-spaced grid over [1e-3 tau_D, 10 tau_V].
std::vector<double> default_time_grid(const Geometry& g, double D, int points = 200);
std::vector<double> log_grid(double lo, double hi, int points);

/// Smallest non-zero decay rate among modes with non-zero amplitude.
double slowest_rate(const OverlapSet& ov);

}  // namespace nanonmr
