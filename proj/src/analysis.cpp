#include "nanonmr/analysis.hpp"

#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <cmath>
#include <map>

#include "nanonmr/analytic.hpp"
#include "nanonmr/errors.hpp"

namespace nanonmr::analysis {

namespace {

std::optional<signal::FitResult> try_fit(signal::FitModel model, const std::vector<double>& t,
                                         const std::vector<double>& y, Window w, std::string& note,
                                         const std::string& label) {
  try {
    return signal::fit(model, t, y, w.lo, w.hi, 0.0);
  } catch (const FitDomainError& e) {
    if (!note.empty()) note += "; ";
    note += label + ": " + e.what();
    return std::nullopt;
  }
}

}  // namespace

RegimeFits regime_fits(const std::vector<double>& t, const std::vector<double>& c_tilde, Window short_w,
                       Window mid_w, Window long_w, double slowest_rate) {
  RegimeFits r;
  r.slowest_rate = slowest_rate;
  r.short_time = try_fit(signal::FitModel::exponential, t, c_tilde, short_w, r.note, "short-time");
  r.long_time = try_fit(signal::FitModel::exponential, t, c_tilde, long_w, r.note, "long-time");
  if (r.long_time) r.long_time_rate = 1.0 / r.long_time->params[1];

  r.intermediate = try_fit(signal::FitModel::loglog_linear, t, c_tilde, mid_w, r.note, "intermediate");
  if (r.intermediate) {
    double lo = INFINITY, hi = -INFINITY;
    for (std::size_t i = 1; i < t.size(); ++i) {
      if (t[i - 1] < mid_w.lo || t[i] > mid_w.hi) continue;
      const double s = std::log(c_tilde[i] / c_tilde[i - 1]) / std::log(t[i] / t[i - 1]);
      lo = std::min(lo, s);
      hi = std::max(hi, s);
    }
    r.slope_spread = hi - lo;
  }
  r.power_law_decades = std::log10(0.1 / (slowest_rate * mid_w.lo));
  if (!r.intermediate || r.power_law_decades < kMinPowerLawDecades) {
    r.intermediate_present = false;
    if (!r.note.empty()) r.note += "; ";
    r.note += "missing intermediate regime: the slowest mode sets in " + std::to_string(r.power_law_decades) +
              " decades after the window start";
  }
  return r;
}

double plateau(const signal::Autocorrelation& ac) {
  const std::size_t n = ac.values.size();
  const std::size_t from = n / 2;
  double s = 0.0;
  for (std::size_t k = from; k < n; ++k) s += ac.values[k];
  return s / static_cast<double>(n - from);
}

DepthScan depth_scan(const std::vector<md::FieldTrace>& traces, double R, Window d_over_R, double max_lag_fraction) {
  std::map<double, std::vector<std::vector<double>>> by_depth;
  std::map<double, double> dt;
  for (const auto& tr : traces) {
    by_depth[tr.depth].push_back(tr.values);
    dt[tr.depth] = tr.dt;
  }
  DepthScan scan;
  std::vector<double> depths, c0;
  for (const auto& [depth, runs] : by_depth) {
    const auto lag = static_cast<std::size_t>(max_lag_fraction * static_cast<double>(runs.front().size()));
    auto ac = signal::autocorrelation(runs, dt[depth], lag);
    const double p = plateau(ac);
    scan.rows.push_back({depth, ac.values[0], p, p / ac.values[0], ac.spread[0]});
    scan.correlations.push_back(std::move(ac));
    depths.push_back(depth);
    c0.push_back(scan.rows.back().c0);
  }
  scan.brms_slope = signal::fit(signal::FitModel::loglog_linear, depths, c0, d_over_R.lo * R, d_over_R.hi * R);
  scan.ratio_increasing = scan.rows.size() >= 2;
  for (std::size_t i = 1; i < scan.rows.size(); ++i) {
    scan.ratio_increasing = scan.ratio_increasing && scan.rows[i].ratio > scan.rows[i - 1].ratio;
  }
  return scan;
}

Overlay overlay(const signal::Autocorrelation& ac, const Geometry& g, const Truncation& trunc, Window w, double D_lo,
                double D_hi) {
  if (ac.values.size() < 3) throw FitDomainError("overlay: autocorrelation too short");
  // Mode rates scale with D, so one overlap set at D = 1 serves every D.
  const auto ov = cached_overlaps(g, 1.0, 0, trunc);
  const double c_inf = analytic::long_time_value(g, 0);
  Overlay out;
  const double p = plateau(ac);
  if (!(p > 0.0)) throw FitDomainError("overlay: MD plateau is not positive, nothing to rescale");
  out.scale = c_inf / p;
  const double max_lag = ac.lags.back();
  // tau_V goes as 1/D; below this D the window would start past the longest lag.
  D_lo = std::max(D_lo, 4.0 * w.lo * g.tau_V(1.0) / max_lag);
  if (!(D_lo < D_hi)) throw FitDomainError("overlay: lags too short for the comparison window at any D in range");

  auto window_for = [&](double D) {
    const double tv = g.tau_V(D);
    return Window{std::max(w.lo * tv, ac.lags[1]), std::min(w.hi * tv, max_lag)};
  };
  // Up to 200 log-spaced lags inside the window, lag 0 excluded.
  auto samples = [&](Window win) {
    std::vector<std::size_t> idx;
    if (!(win.hi > win.lo)) return idx;
    const auto grid = log_grid(win.lo, win.hi, 200);
    for (double t : grid) {
      const auto k = static_cast<std::size_t>(std::llround(t / ac.dt));
      if (k >= 1 && k < ac.values.size() && (idx.empty() || idx.back() != k)) idx.push_back(k);
    }
    return idx;
  };
  auto deviation = [&](double D, const std::vector<std::size_t>& idx, std::vector<double>* an_out) {
    std::vector<double> times;
    for (std::size_t k : idx) times.push_back(D * ac.lags[k]);
    const auto dec = mode_sum(*ov, times, Exec::serial);
    double s = 0.0;
    for (std::size_t q = 0; q < idx.size(); ++q) {
      const double an = c_inf + dec[q];
      const double e = (out.scale * ac.values[idx[q]] - an) / an;
      s += e * e;
      if (an_out) an_out->push_back(an);
    }
    return std::sqrt(s / static_cast<double>(idx.size()));
  };

  double D = std::sqrt(D_lo * D_hi);
  Window win = window_for(D);
  for (int iter = 0; iter < 6; ++iter) {
    const auto idx = samples(win);
    if (idx.size() < 5) throw FitDomainError("overlay: fewer than 5 lags inside the comparison window");
    auto objective = [&](double logD) { return deviation(std::exp(logD), idx, nullptr); };
    const auto [best, value] =
        boost::math::tools::brent_find_minima(objective, std::log(D_lo), std::log(D_hi), 40);
    (void)value;
    D = std::exp(best);
    const Window next = window_for(D);
    const bool stable = std::abs(next.lo - win.lo) <= 1e-9 * win.lo && std::abs(next.hi - win.hi) <= 1e-9 * win.hi;
    win = next;
    if (stable) break;
  }
  const auto idx = samples(win);
  out.D = D;
  out.tau_V = g.tau_V(D);
  out.window = win;
  out.rel_rms = deviation(D, idx, &out.analytic);
  for (std::size_t k : idx) {
    out.t.push_back(ac.lags[k]);
    out.md.push_back(out.scale * ac.values[k]);
  }
  return out;
}

}  // namespace nanonmr::analysis
