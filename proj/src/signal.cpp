#include "nanonmr/signal.hpp"

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>
#include <stdexcept>

#include "nanonmr/errors.hpp"

namespace nanonmr::signal {

namespace {

// FFTW planning is not thread-safe.
std::mutex& plan_mutex() {
  static std::mutex m;
  return m;
}

std::size_t common_length(const std::vector<std::vector<double>>& traces) {
  if (traces.empty()) throw std::invalid_argument("signal: no traces");
  const std::size_t n = traces.front().size();
  for (const auto& tr : traces) {
    if (tr.size() != n) throw std::invalid_argument("signal: traces differ in length");
  }
  if (n < 2) throw std::invalid_argument("signal: traces need at least two samples");
  return n;
}

// |FFT|^2 of x zero-padded to m points, r2c layout (m/2 + 1 bins).
std::vector<double> squared_transform(const std::vector<double>& x, std::size_t m) {
  double* in = fftw_alloc_real(m);
  fftw_complex* out = fftw_alloc_complex(m / 2 + 1);
  fftw_plan plan;
  {
    std::lock_guard lock(plan_mutex());
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(m), in, out, FFTW_ESTIMATE);
  }
  for (std::size_t i = 0; i < m; ++i) in[i] = i < x.size() ? x[i] : 0.0;
  fftw_execute(plan);
  std::vector<double> p(m / 2 + 1);
  for (std::size_t k = 0; k < p.size(); ++k) p[k] = out[k][0] * out[k][0] + out[k][1] * out[k][1];
  {
    std::lock_guard lock(plan_mutex());
    fftw_destroy_plan(plan);
  }
  fftw_free(in);
  fftw_free(out);
  return p;
}

// Inverse real transform of a real, even spectrum given in r2c layout.
std::vector<double> inverse_even(const std::vector<double>& half, std::size_t m) {
  fftw_complex* in = fftw_alloc_complex(m / 2 + 1);
  double* out = fftw_alloc_real(m);
  fftw_plan plan;
  {
    std::lock_guard lock(plan_mutex());
    plan = fftw_plan_dft_c2r_1d(static_cast<int>(m), in, out, FFTW_ESTIMATE);
  }
  for (std::size_t k = 0; k < half.size(); ++k) {
    in[k][0] = half[k];
    in[k][1] = 0.0;
  }
  fftw_execute(plan);
  std::vector<double> r(out, out + m);
  for (double& v : r) v /= static_cast<double>(m);
  {
    std::lock_guard lock(plan_mutex());
    fftw_destroy_plan(plan);
  }
  fftw_free(in);
  fftw_free(out);
  return r;
}

}  // namespace

Spectrum power_spectrum(const std::vector<std::vector<double>>& traces, double dt) {
  const std::size_t n = common_length(traces);
  if (!(dt > 0.0)) throw std::invalid_argument("power_spectrum: dt must be positive");
  std::vector<double> half(n / 2 + 1, 0.0);
  for (const auto& tr : traces) {
    const auto p = squared_transform(tr, n);
    for (std::size_t k = 0; k < half.size(); ++k) half[k] += p[k];
  }
  Spectrum s;
  s.dt = dt;
  s.traces = static_cast<int>(traces.size());
  s.omega.resize(n);
  s.power.resize(n);
  const double scale = dt * dt / static_cast<double>(traces.size());
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t mirror = k <= n / 2 ? k : n - k;
    s.power[k] = half[mirror] * scale;
    const double kk = k <= n / 2 ? static_cast<double>(k) : static_cast<double>(k) - static_cast<double>(n);
    s.omega[k] = 2.0 * std::numbers::pi * kk / (static_cast<double>(n) * dt);
  }
  // The Nyquist bin of an even-length transform has no negative partner.
  if (n % 2 == 0) s.omega[n / 2] = std::abs(s.omega[n / 2]);
  return s;
}

Autocorrelation autocorrelation(const std::vector<std::vector<double>>& traces, double dt,
                                std::optional<std::size_t> max_lag) {
  const std::size_t n = common_length(traces);
  const std::size_t lags = std::min(max_lag.value_or(n - 1), n - 1) + 1;
  const std::size_t m = 2 * n;
  std::vector<double> sum(lags, 0.0);
  std::vector<double> sum2(lags, 0.0);
  for (const auto& tr : traces) {
    const auto r = inverse_even(squared_transform(tr, m), m);
    for (std::size_t k = 0; k < lags; ++k) {
      const double v = r[k] / static_cast<double>(n - k);
      sum[k] += v;
      sum2[k] += v * v;
    }
  }
  Autocorrelation a;
  a.dt = dt;
  const double nt = static_cast<double>(traces.size());
  a.lags.resize(lags);
  a.values.resize(lags);
  a.spread.assign(lags, 0.0);
  for (std::size_t k = 0; k < lags; ++k) {
    a.lags[k] = static_cast<double>(k) * dt;
    a.values[k] = sum[k] / nt;
    if (traces.size() > 1) {
      const double var = std::max(0.0, (sum2[k] - nt * a.values[k] * a.values[k]) / (nt - 1.0));
      a.spread[k] = std::sqrt(var / nt);
    }
  }
  return a;
}

Autocorrelation autocorrelation_direct(const std::vector<std::vector<double>>& traces, double dt,
                                       std::size_t max_lag) {
  const std::size_t n = common_length(traces);
  const std::size_t lags = std::min(max_lag, n - 1) + 1;
  Autocorrelation a;
  a.dt = dt;
  a.lags.resize(lags);
  a.values.assign(lags, 0.0);
  a.spread.assign(lags, 0.0);
  for (std::size_t k = 0; k < lags; ++k) {
    a.lags[k] = static_cast<double>(k) * dt;
    for (const auto& tr : traces) {
      double s = 0.0;
      for (std::size_t i = 0; i + k < n; ++i) s += tr[i] * tr[i + k];
      a.values[k] += s / static_cast<double>(n - k);
    }
    a.values[k] /= static_cast<double>(traces.size());
  }
  return a;
}

std::string model_name(FitModel m) {
  switch (m) {
    case FitModel::exponential: return "exponential";
    case FitModel::power_law: return "power-law";
    case FitModel::loglog_linear: return "loglog-linear";
  }
  return "?";
}

double tail_offset(const std::vector<double>& t, const std::vector<double>& y) {
  if (t.empty() || t.size() != y.size()) throw FitDomainError("tail_offset: bad curve");
  const double cut = t.back() / 10.0;
  double s = 0.0;
  int n = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] >= cut) {
      s += y[i];
      ++n;
    }
  }
  return s / n;
}

FitResult fit(FitModel model, const std::vector<double>& t, const std::vector<double>& y, double t_lo, double t_hi,
              std::optional<double> offset) {
  if (t.size() != y.size()) throw FitDomainError("fit: t and y differ in length");
  const double c = model == FitModel::exponential ? offset.value_or(tail_offset(t, y)) : 0.0;
  std::vector<double> xs;
  std::vector<double> ys;
  const double slack = 1e-12 * std::max(std::abs(t_lo), std::abs(t_hi));
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] < t_lo - slack || t[i] > t_hi + slack) continue;
    const double v = y[i] - c;
    if (!(v > 0.0)) throw FitDomainError("fit: non-positive value inside a logarithmic fit window");
    if (model == FitModel::exponential) {
      xs.push_back(t[i]);
    } else {
      if (!(t[i] > 0.0)) throw FitDomainError("fit: non-positive time inside a log-log window");
      xs.push_back(std::log(t[i]));
    }
    ys.push_back(std::log(v));
  }
  if (xs.size() < 5) throw FitDomainError("fit: fewer than 5 points in the window");
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  if (!(sxx > 0.0)) throw FitDomainError("fit: degenerate abscissae");
  const double slope = sxy / sxx;
  const double icpt = my - slope * mx;
  double rss = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double e = ys[i] - (icpt + slope * xs[i]);
    rss += e * e;
  }
  FitResult r{model, {}, t_lo, t_hi, std::sqrt(rss / n), static_cast<int>(xs.size())};
  switch (model) {
    case FitModel::exponential:
      if (!(slope < 0.0)) throw FitDomainError("fit: exponential window is not decaying");
      r.params = {std::exp(icpt), -1.0 / slope, c};
      break;
    case FitModel::power_law: r.params = {std::exp(icpt), slope}; break;
    case FitModel::loglog_linear: r.params = {slope, icpt}; break;
  }
  return r;
}

}  // namespace nanonmr::signal
