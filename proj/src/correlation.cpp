#include "nanonmr/correlation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "nanonmr/analytic.hpp"
#include "nanonmr/errors.hpp"
#include "nanonmr/quadrature.hpp"
#include "nanonmr/specfun.hpp"

namespace nanonmr {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr int kMaxRefinements = 4;

struct Grid {
  std::vector<double> e1;
  std::vector<double> e2;
};

// One quadrature pass over the tensor grid (e1 x e2).
std::vector<double> cylinder_pass(const ModeSet& ms, int m, const Grid& grid, Exec exec) {
  const Geometry& g = ms.geometry;
  const double R = g.radius();
  const double L = g.height();
  const double d = g.d;
  const double zt = harmonic_coefficients(m).zeta_tilde;
  const quad::Rule rr = quad::composite_rule(grid.e1);
  const quad::Rule rz = quad::composite_rule(grid.e2);
  const std::size_t nr = rr.x.size();
  const std::size_t nz = rz.x.size();
  const int kmax = ms.truncation.second;

  std::vector<std::vector<double>> cosines(static_cast<std::size_t>(kmax) + 1, std::vector<double>(nz));
  for (int k = 0; k <= kmax; ++k) {
    for (std::size_t j = 0; j < nz; ++j) {
      cosines[static_cast<std::size_t>(k)][j] = rz.w[j] * std::cos(kPi * k * (rz.x[j] - d) / L);
    }
  }
  // A[k][i] = int dz K(rho_i, z) cos(pi k (z - d)/L)
  std::vector<std::vector<double>> A(static_cast<std::size_t>(kmax) + 1, std::vector<double>(nr));
#pragma omp parallel if (exec == Exec::parallel)
  {
    std::vector<double> row(nz);
#pragma omp for schedule(static)
    for (std::size_t i = 0; i < nr; ++i) {
      const double rho = rr.x[i];
      for (std::size_t j = 0; j < nz; ++j) {
        const double z = rz.x[j];
        const double r = std::hypot(rho, z);
        row[j] = zt * y2_theta(m, z / r, rho / r) / (r * r * r);
      }
      for (int k = 0; k <= kmax; ++k) {
        const auto& c = cosines[static_cast<std::size_t>(k)];
        double s = 0.0;
        for (std::size_t j = 0; j < nz; ++j) s += row[j] * c[j];
        A[static_cast<std::size_t>(k)][i] = s;
      }
    }
  }
  // Radial factors per distinct nu.
  std::map<int, std::vector<double>> radial;
  for (const Mode& md : ms.modes) {
    if (md.radial > 0) radial.emplace(md.radial, std::vector<double>());
  }
  std::vector<std::pair<int, std::vector<double>*>> todo;
  for (auto& [s, v] : radial) todo.emplace_back(s, &v);
  std::vector<double> nu_of(todo.size());
  for (std::size_t q = 0; q < todo.size(); ++q) {
    for (const Mode& md : ms.modes) {
      if (md.radial == todo[q].first) {
        nu_of[q] = md.nu;
        break;
      }
    }
  }
#pragma omp parallel for schedule(dynamic) if (exec == Exec::parallel)
  for (std::size_t q = 0; q < todo.size(); ++q) {
    auto& v = *todo[q].second;
    v.resize(nr);
    for (std::size_t i = 0; i < nr; ++i) v[i] = rr.w[i] * rr.x[i] * specfun::bessel_j(m, nu_of[q] * rr.x[i] / R);
  }
  std::vector<double> out(ms.modes.size(), 0.0);
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
  for (std::size_t q = 0; q < ms.modes.size(); ++q) {
    const Mode& md = ms.modes[q];
    if (md.rate == 0.0 && m != 0) continue;  // the constant mode carries no e^{i m phi}
    const auto& a = A[static_cast<std::size_t>(md.axial)];
    double s = 0.0;
    if (md.radial == 0) {
      for (std::size_t i = 0; i < nr; ++i) s += rr.w[i] * rr.x[i] * a[i];
    } else {
      const auto& v = radial.at(md.radial);
      for (std::size_t i = 0; i < nr; ++i) s += v[i] * a[i];
    }
    out[q] = 2.0 * kPi * s;
  }
  return out;
}

std::vector<double> sphere_pass(const ModeSet& ms, int m, const Grid& grid, Exec exec) {
  const Geometry& g = ms.geometry;
  const double R = g.radius();
  const double z0 = g.nv_z();
  const double zt = harmonic_coefficients(m).zeta_tilde;
  const quad::Rule rr = quad::composite_rule(grid.e1);
  const quad::Rule rt = quad::composite_rule(grid.e2);
  const std::size_t nr = rr.x.size();
  const std::size_t nt = rt.x.size();
  const int lmax = ms.truncation.second;
  const int nl = lmax - m + 1;
  if (nl <= 0) return std::vector<double>(ms.modes.size(), 0.0);

  // P[j][l - m]: normalized Legendre at the theta nodes times sin(theta) w.
  std::vector<std::vector<double>> P(nt);
  for (std::size_t j = 0; j < nt; ++j) {
    specfun::sph_legendre_column(lmax, m, std::cos(rt.x[j]), P[j]);
    const double f = rt.w[j] * std::sin(rt.x[j]);
    for (double& v : P[j]) v *= f;
  }
  // A[l - m][i] = int dtheta sin(theta) K(r_i, theta) P_l^m(cos theta)
  std::vector<std::vector<double>> A(static_cast<std::size_t>(nl), std::vector<double>(nr));
#pragma omp parallel if (exec == Exec::parallel)
  {
    std::vector<double> acc(static_cast<std::size_t>(nl));
#pragma omp for schedule(static)
    for (std::size_t i = 0; i < nr; ++i) {
      std::fill(acc.begin(), acc.end(), 0.0);
      const double r = rr.x[i];
      for (std::size_t j = 0; j < nt; ++j) {
        const double rho = r * std::sin(rt.x[j]);
        const double z = r * std::cos(rt.x[j]) - z0;
        const double rn = std::hypot(rho, z);
        const double k = zt * y2_theta(m, z / rn, rho / rn) / (rn * rn * rn);
        const auto& p = P[j];
        for (int l = 0; l < nl; ++l) acc[static_cast<std::size_t>(l)] += k * p[static_cast<std::size_t>(l)];
      }
      for (int l = 0; l < nl; ++l) A[static_cast<std::size_t>(l)][i] = acc[static_cast<std::size_t>(l)];
    }
  }
  std::vector<double> out(ms.modes.size(), 0.0);
#pragma omp parallel for schedule(dynamic) if (exec == Exec::parallel)
  for (std::size_t q = 0; q < ms.modes.size(); ++q) {
    const Mode& md = ms.modes[q];
    const auto& a = A[static_cast<std::size_t>(md.angular - m)];
    double s = 0.0;
    if (md.rate == 0.0) {
      if (m != 0) continue;
      // Constant mode: Y_0^0 = 1/sqrt(4 pi) is folded into P, undo it.
      for (std::size_t i = 0; i < nr; ++i) s += rr.w[i] * rr.x[i] * rr.x[i] * a[i];
      out[q] = 2.0 * kPi * s * std::sqrt(4.0 * kPi);
      continue;
    }
    for (std::size_t i = 0; i < nr; ++i) {
      s += rr.w[i] * rr.x[i] * rr.x[i] * a[i] * specfun::spherical_j(md.angular, md.nu * rr.x[i] / R);
    }
    out[q] = 2.0 * kPi * s;
  }
  return out;
}

Grid initial_grid(const ModeSet& ms, int m) {
  const Geometry& g = ms.geometry;
  const double R = g.radius();
  const double d = g.d;
  double nu_max = 1.0;
  for (const Mode& md : ms.modes) nu_max = std::max(nu_max, md.nu);
  const double h_r = std::min(R / 4.0, 4.0 * kPi * R / nu_max);
  if (g.kind() == ShapeKind::cylinder) {
    const double L = g.height();
    const int kmax = std::max(ms.truncation.second, 1);
    return {quad::graded_edges(0.0, R, quad::Peak::lower, std::min(0.25 * d, R / 4.0), 1.5, h_r),
            quad::graded_edges(d, d + L, quad::Peak::lower, std::min(0.25 * d, L / 4.0), 1.5,
                               std::min(L / 4.0, 4.0 * L / kmax))};
  }
  const bool sphere = g.kind() == ShapeKind::sphere;
  const double top = sphere ? kPi : 0.5 * kPi;
  const double h_t = std::min(0.25, 4.0 * kPi / (ms.truncation.second + 1.0));
  (void)m;
  return {quad::graded_edges(0.0, R, sphere ? quad::Peak::upper : quad::Peak::lower, std::min(0.25 * d, R / 4.0), 1.5,
                             h_r),
          quad::graded_edges(0.0, top, quad::Peak::upper, std::min(0.25 * d / R, 0.05), 1.5, h_t)};
}

}  // namespace

std::vector<OverlapIntegral> OverlapSet::integrals() const {
  std::vector<OverlapIntegral> out;
  out.reserve(modes.modes.size());
  for (std::size_t i = 0; i < modes.modes.size(); ++i) out.push_back({modes.modes[i], overlap[i], error[i]});
  return out;
}

OverlapSet overlap_integrals(const Geometry& g, double D, int m, const Truncation& trunc, double rel_tol, Exec exec) {
  if (std::abs(m) > 2) throw std::domain_error("overlap_integrals: |m| must be <= 2");
  const int am = std::abs(m);
  OverlapSet set;
  set.modes = enumerate_modes(g, D, trunc, am);
  set.m = m;
  const ModeSet& ms = set.modes;
  auto pass = [&](const Grid& grid) {
    return g.kind() == ShapeKind::cylinder ? cylinder_pass(ms, am, grid, exec) : sphere_pass(ms, am, grid, exec);
  };
  Grid grid = initial_grid(ms, am);
  std::vector<double> prev = pass(grid);
  const std::size_t n = ms.modes.size();
  std::vector<double> sw(n);
  for (std::size_t i = 0; i < n; ++i) sw[i] = std::sqrt(ms.modes[i].normalization);
  for (int level = 1; level <= kMaxRefinements; ++level) {
    grid = {quad::bisect_panels(grid.e1), quad::bisect_panels(grid.e2)};
    std::vector<double> cur = pass(grid);
    double umax = 0.0;
    for (std::size_t i = 0; i < n; ++i) umax = std::max(umax, std::abs(sw[i] * cur[i]));
    bool ok = true;
    set.error.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      set.error[i] = std::abs(cur[i] - prev[i]);
      const double u = std::abs(sw[i] * cur[i]);
      if (sw[i] * set.error[i] > rel_tol * std::max(u, 1e-3 * umax)) ok = false;
    }
    prev = std::move(cur);
    set.refinements = level;
    if (ok) break;
    if (level == kMaxRefinements) {
      std::ostringstream msg;
      msg << "overlap_integrals: no convergence to " << rel_tol << " after " << level << " refinements";
      throw NumericError(msg.str());
    }
  }
  set.overlap = std::move(prev);
  set.amplitude.resize(n);
  for (std::size_t i = 0; i < n; ++i) set.amplitude[i] = ms.modes[i].normalization * set.overlap[i] * set.overlap[i];
  return set;
}

std::shared_ptr<const OverlapSet> cached_overlaps(const Geometry& g, double D, int m, const Truncation& trunc,
                                                  double rel_tol) {
  static std::mutex mutex;
  static std::map<std::string, std::shared_ptr<const OverlapSet>> cache;
  std::ostringstream key;
  key.precision(17);
  key << g.name() << ' ' << g.radius() << ' ' << g.height() << ' ' << g.d << ' ' << D << ' ' << std::abs(m) << ' '
      << trunc.radial << ' ' << trunc.second << ' ' << rel_tol;
  {
    std::lock_guard lock(mutex);
    auto it = cache.find(key.str());
    if (it != cache.end()) return it->second;
  }
  auto made = std::make_shared<const OverlapSet>(overlap_integrals(g, D, m, trunc, rel_tol));
  std::lock_guard lock(mutex);
  return cache.emplace(key.str(), made).first->second;
}

std::vector<double> mode_sum(const OverlapSet& ov, const std::vector<double>& times, Exec exec,
                             std::vector<double>* convergence) {
  const auto& modes = ov.modes.modes;
  const Truncation& tr = ov.modes.truncation;
  const bool cyl = ov.modes.geometry.kind() == ShapeKind::cylinder;
  std::vector<double> out(times.size());
  if (convergence) convergence->assign(times.size(), 0.0);
  const auto nt = static_cast<std::ptrdiff_t>(times.size());
#pragma omp parallel if (exec == Exec::parallel)
  {
    std::vector<double> terms(modes.size());
#pragma omp for schedule(static)
    for (std::ptrdiff_t q = 0; q < nt; ++q) {
      const double t = times[static_cast<std::size_t>(q)];
      double shell = 0.0;
      for (std::size_t i = 0; i < modes.size(); ++i) {
        const Mode& md = modes[i];
        terms[i] = md.rate > 0.0 ? ov.amplitude[i] * std::exp(-md.rate * t) : 0.0;
        const bool outer = md.radial == tr.radial || (cyl ? md.axial == tr.second : md.angular == tr.second);
        if (outer) shell += terms[i];
      }
      const double v = pairwise_sum(terms);
      out[static_cast<std::size_t>(q)] = v;
      if (convergence) (*convergence)[static_cast<std::size_t>(q)] = v > 0.0 ? shell / v : 0.0;
    }
  }
  return out;
}

CorrelationCurve correlation_normalized(const Geometry& g, double D, int m, const std::vector<double>& times,
                                        const Truncation& trunc, Exec exec) {
  for (double t : times) {
    if (!(t >= 0.0)) throw std::domain_error("correlation: times must be >= 0");
  }
  const auto ov = cached_overlaps(g, D, m, trunc);
  CorrelationCurve c;
  c.geometry = g;
  c.m = m;
  c.truncation = trunc;
  c.normalized = true;
  c.brms2 = analytic::brms(g, m).value;
  c.c_inf = analytic::long_time_value(g, m);
  c.times = times;
  c.values = mode_sum(*ov, times, exec, &c.convergence);
  for (double& v : c.values) v /= c.brms2;
  return c;
}

CorrelationCurve correlation_full(const Geometry& g, double D, int m, const std::vector<double>& times,
                                  const Truncation& trunc, Exec exec) {
  CorrelationCurve c = correlation_normalized(g, D, m, times, trunc, exec);
  c.normalized = false;
  for (double& v : c.values) v = v * c.brms2 + c.c_inf;
  return c;
}

std::vector<double> log_grid(double lo, double hi, int points) {
  if (!(lo > 0.0) || !(hi > lo) || points < 2) throw std::domain_error("log_grid: need 0 < lo < hi and >= 2 points");
  std::vector<double> t(static_cast<std::size_t>(points));
  const double a = std::log(lo);
  const double b = std::log(hi);
  for (int i = 0; i < points; ++i) t[static_cast<std::size_t>(i)] = std::exp(a + (b - a) * i / (points - 1));
  return t;
}

std::vector<double> default_time_grid(const Geometry& g, double D, int points) {
  return log_grid(1e-3 * g.tau_D(D), 10.0 * g.tau_V(D), points);
}

double slowest_rate(const OverlapSet& ov) {
  const double total = pairwise_sum(ov.amplitude);
  double best = 0.0;
  for (std::size_t i = 0; i < ov.modes.modes.size(); ++i) {
    const double r = ov.modes.modes[i].rate;
    if (r > 0.0 && ov.amplitude[i] > 1e-12 * total && (best == 0.0 || r < best)) best = r;
  }
  return best;
}

}  // namespace nanonmr
