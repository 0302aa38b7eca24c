// Higher-level analyses shared by the command-line jobs and the acceptance
// checks: three-regime fits of correlation curves, depth scans of MD field
// traces, and the MD-versus-mode-sum overlay.

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "nanonmr/correlation.hpp"
#include "nanonmr/md.hpp"
#include "nanonmr/signal.hpp"

namespace nanonmr::analysis {

struct Window {
  double lo;
  double hi;
};

struct RegimeFits {
  // A fit is empty when its window cannot support it; `note` says why.
  std::optional<signal::FitResult> short_time;    // exponential, offset 0
  std::optional<signal::FitResult> intermediate;  // log-log linear
  std::optional<signal::FitResult> long_time;     // exponential, offset 0
  double slowest_rate = 0.0;       // of the mode set
  double long_time_rate = 0.0;     // 1 / tau_fit of the long-time fit
  double slope_spread = 0.0;       // max - min local log-log slope in the intermediate window
  double power_law_decades = 0.0;  // log10(0.1 / (slowest_rate * mid window start))
  bool intermediate_present = true;
  std::string note;
};

/// Minimum room, in decades, between the start of the intermediate window and
/// a tenth of the slowest mode's lifetime for a power law to show up.
inline constexpr double kMinPowerLawDecades = 0.5;

/// Fits a normalized decaying curve C~(t) (plateau removed) in the three
/// windows. The intermediate regime is reported missing when the slowest mode
/// cuts in before the diffusive decay has kMinPowerLawDecades to develop.
RegimeFits regime_fits(const std::vector<double>& t, const std::vector<double>& c_tilde, Window short_w,
                       Window mid_w, Window long_w, double slowest_rate);

struct DepthRow {
  double depth;
  double c0;       // autocorrelation at lag 0 (B_rms^2 estimate)
  double plateau;  // mean over the last half of the lags
  double ratio;    // plateau / c0
  double c0_spread;
};

struct DepthScan {
  std::vector<DepthRow> rows;            // ascending depth
  std::vector<signal::Autocorrelation> correlations;
  signal::FitResult brms_slope;          // log C(0) against log d over the d/R window
  bool ratio_increasing = false;
};

/// Autocorrelations of all runs at each depth (runs averaged), lag range up
/// to max_lag_fraction of the trace, and the d-scaling fit of C(0) over
/// d/R in [window.lo, window.hi].
DepthScan depth_scan(const std::vector<md::FieldTrace>& traces, double R, Window d_over_R,
                     double max_lag_fraction = 0.5);

/// Mean of the values over the last half of the lags.
double plateau(const signal::Autocorrelation& ac);

struct Overlay {
  double D = 0.0;         // fitted diffusion coefficient
  double scale = 0.0;     // analytic C(inf) / MD plateau
  double rel_rms = 0.0;   // relative RMS deviation inside the window
  double tau_V = 0.0;     // at the fitted D
  Window window{0, 0};    // in time units, after clipping to the lag range
  std::vector<double> t;
  std::vector<double> md;        // rescaled MD curve
  std::vector<double> analytic;  // C(inf) + mode sum
};

/// Rescales the MD autocorrelation so its plateau equals the analytic
/// C(inf) (unit density, m = 0) and fits D by minimizing the relative RMS
/// deviation over t in [w.lo, w.hi] tau_V(D), clipped to the available lags;
/// lag 0 is always excluded.
Overlay overlay(const signal::Autocorrelation& ac, const Geometry& g, const Truncation& trunc, Window w_over_tau_V,
                double D_lo, double D_hi);

}  // namespace nanonmr::analysis
