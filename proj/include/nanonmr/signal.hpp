// Spectra and autocorrelations of sampled field traces, and the three
// regime fits used on correlation curves.

#pragma once

#include <optional>
#include <string>
#include <vector>

namespace nanonmr::signal {

struct Spectrum {
  double dt = 0.0;
  std::vector<double> omega;  // rad per time unit, FFT order (0, +, ..., -)
  std::vector<double> power;  // dt^2 |X_k|^2 averaged over traces
  int traces = 0;
};

/// Periodogram of each trace (no window, no padding), averaged. Throws
/// std::invalid_argument when traces differ in length.
Spectrum power_spectrum(const std::vector<std::vector<double>>& traces, double dt);

struct Autocorrelation {
  double dt = 0.0;
  std::vector<double> lags;    // time units
  std::vector<double> values;  // <B(t0) B(t0 + lag)>, unbiased per lag
  std::vector<double> spread;  // standard error across traces (0 for one trace)
};

/// Wiener-Khinchin autocorrelation with zero padding to 2N, so there is no
/// circular wrap-around; each lag is divided by its N - lag overlapping pairs
/// and the mean is not removed, so lag 0 is the mean of B^2.
Autocorrelation autocorrelation(const std::vector<std::vector<double>>& traces, double dt,
                                std::optional<std::size_t> max_lag = std::nullopt);

/// The same estimator by direct lag sums, O(N * max_lag).
Autocorrelation autocorrelation_direct(const std::vector<std::vector<double>>& traces, double dt,
                                       std::size_t max_lag);

enum class FitModel { exponential, power_law, loglog_linear };
std::string model_name(FitModel m);

struct FitResult {
  FitModel model;
  // exponential: {A, tau, c}; power_law: {A, alpha}; loglog_linear: {slope, intercept}
  std::vector<double> params;
  double t_lo;
  double t_hi;
  double residual_rms;  // in the linearized (log) space
  int points;
};

/// Least squares on the linearized model over t in [t_lo, t_hi]. The
/// exponential offset c defaults to the mean of the samples in the last
/// decade of the curve. Throws FitDomainError on fewer than 5 points or
/// non-positive values under a logarithm.
FitResult fit(FitModel model, const std::vector<double>& t, const std::vector<double>& y, double t_lo, double t_hi,
              std::optional<double> offset = std::nullopt);

/// Mean of y over t >= t_max / 10.
double tail_offset(const std::vector<double>& t, const std::vector<double>& y);

}  // namespace nanonmr::signal
