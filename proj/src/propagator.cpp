#include "nanonmr/propagator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "nanonmr/errors.hpp"
#include "nanonmr/quadrature.hpp"
#include "nanonmr/rng.hpp"
#include "nanonmr/specfun.hpp"

namespace nanonmr {

namespace {

constexpr double kPi = std::numbers::pi;
using specfun::BesselKind;

bool is_cylinder(const Geometry& g) { return g.kind() == ShapeKind::cylinder; }

double cylinder_weight(int n, double nu, int k, double V) {
  const double axial = k == 0 ? 2.0 : 1.0;
  if (nu == 0.0) return 2.0 / (V * axial);
  const double jn = specfun::bessel_j(n, nu);
  return 2.0 / (V * jn * jn * (1.0 - static_cast<double>(n) * n / (nu * nu)) * axial);
}

double sphere_weight(int l, double nu, double V) {
  const double jl = specfun::spherical_j(l, nu);
  return (8.0 * kPi / 3.0) / (V * jl * jl * (1.0 - l * (l + 1.0) / (nu * nu)));
}

bool outer_shell(const ModeSet& ms, const Mode& md) {
  const Truncation& t = ms.truncation;
  if (is_cylinder(ms.geometry)) return md.radial == t.radial || md.axial == t.second || md.angular == t.azimuthal;
  return md.radial == t.radial || md.angular == t.second;
}

}  // namespace

Truncation default_truncation(const Geometry& g) {
  if (is_cylinder(g)) return {25, 25, 25};
  return {30, 30, 0};
}

ModeSet enumerate_modes(const Geometry& g, double D, const Truncation& trunc, std::optional<int> m) {
  if (trunc.radial < 1 || trunc.second < 0 || (is_cylinder(g) && !m && trunc.azimuthal < 0)) {
    throw std::domain_error("enumerate_modes: truncation limits out of range");
  }
  if (!(D > 0.0)) throw std::domain_error("enumerate_modes: D must be positive");
  const double V = g.volume();
  const double R = g.radius();
  ModeSet set{g, D, trunc, m, {}};
  set.modes.push_back({0, 0, 0, 0.0, 0.0, 1.0 / V});
  if (is_cylinder(g)) {
    const double L = g.height();
    const int n_lo = m ? std::abs(*m) : 0;
    const int n_hi = m ? std::abs(*m) : trunc.azimuthal;
    for (int n = n_lo; n <= n_hi; ++n) {
      const auto zeros = specfun::global_zero_cache().zeros(BesselKind::cylindrical, n, trunc.radial);
      std::vector<double> weights(zeros.size());
      for (std::size_t s = 0; s < zeros.size(); ++s) weights[s] = cylinder_weight(n, zeros[s], 1, V);
      for (int k = 0; k <= trunc.second; ++k) {
        const double axial_rate = D * std::pow(kPi * k / L, 2);
        if (n == 0 && k >= 1) set.modes.push_back({0, 0, k, 0.0, axial_rate, 2.0 / V});
        for (std::size_t s = 0; s < zeros.size(); ++s) {
          const double nu = zeros[s];
          const double w = k == 0 ? 0.5 * weights[s] : weights[s];
          set.modes.push_back({n, static_cast<int>(s) + 1, k, nu, D * std::pow(nu / R, 2) + axial_rate, w});
        }
      }
    }
  } else {
    const bool hemi = g.kind() == ShapeKind::hemisphere;
    const int l_lo = m ? std::abs(*m) : 0;
    for (int l = l_lo; l <= trunc.second; ++l) {
      const auto zeros = specfun::global_zero_cache().zeros(BesselKind::spherical, l, trunc.radial);
      const bool killed = hemi && m && (l + std::abs(*m)) % 2 != 0;
      for (std::size_t k = 0; k < zeros.size(); ++k) {
        const double nu = zeros[k];
        const double w = killed ? 0.0 : sphere_weight(l, nu, V);
        set.modes.push_back({l, static_cast<int>(k) + 1, 0, nu, D * std::pow(nu / R, 2), w});
      }
    }
  }
  std::stable_sort(set.modes.begin() + 1, set.modes.end(), [](const Mode& a, const Mode& b) { return a.rate < b.rate; });
  return set;
}

PropagatorValue propagator_eval(const ModeSet& ms, const Vec3& r, const Vec3& r0, double t, Exec exec) {
  const Geometry& g = ms.geometry;
  if (ms.m) throw std::domain_error("propagator_eval: needs a mode set built without a fixed m");
  if (!g.contains(r) || !g.contains(r0)) throw std::domain_error("propagator_eval: point outside the container");
  if (!(t >= 0.0)) throw std::domain_error("propagator_eval: t must be >= 0");
  const double R = g.radius();
  const std::size_t n = ms.modes.size();
  std::vector<double> terms(n, 0.0);
  terms[0] = ms.modes[0].normalization;

  if (is_cylinder(g)) {
    const double L = g.height();
    const double rho = std::hypot(r[0], r[1]);
    const double rho0 = std::hypot(r0[0], r0[1]);
    const double dphi = std::atan2(r[1], r[0]) - std::atan2(r0[1], r0[0]);
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
    for (std::size_t i = 1; i < n; ++i) {
      const Mode& md = ms.modes[i];
      const double decay = std::exp(-md.rate * t);
      if (decay == 0.0) continue;
      const double axial = std::cos(kPi * md.axial * r[2] / L) * std::cos(kPi * md.axial * r0[2] / L);
      const double radial = md.radial == 0 ? 1.0
                                           : specfun::bessel_j(md.angular, md.nu * rho / R) *
                                                 specfun::bessel_j(md.angular, md.nu * rho0 / R);
      const double az = md.angular == 0 ? 1.0 : 2.0 * std::cos(md.angular * dphi);
      terms[i] = md.normalization * axial * radial * az * decay;
    }
  } else {
    const bool hemi = g.kind() == ShapeKind::hemisphere;
    const double rr = std::sqrt(r[0] * r[0] + r[1] * r[1] + r[2] * r[2]);
    const double rr0 = std::sqrt(r0[0] * r0[0] + r0[1] * r0[1] + r0[2] * r0[2]);
    double cg = 1.0;
    double cg_mirror = 1.0;
    if (rr > 0.0 && rr0 > 0.0) {
      const double dot = r[0] * r0[0] + r[1] * r0[1];
      cg = std::clamp((dot + r[2] * r0[2]) / (rr * rr0), -1.0, 1.0);
      cg_mirror = std::clamp((dot - r[2] * r0[2]) / (rr * rr0), -1.0, 1.0);
    }
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
    for (std::size_t i = 1; i < n; ++i) {
      const Mode& md = ms.modes[i];
      const double decay = std::exp(-md.rate * t);
      if (decay == 0.0) continue;
      const int l = md.angular;
      double ang = (2.0 * l + 1.0) / (4.0 * kPi) * std::legendre(l, cg);
      if (hemi) ang = 0.5 * (ang + (2.0 * l + 1.0) / (4.0 * kPi) * std::legendre(l, cg_mirror));
      const double radial = specfun::spherical_j(l, md.nu * rr / R) * specfun::spherical_j(l, md.nu * rr0 / R);
      terms[i] = md.normalization * radial * ang * decay;
    }
  }
  double shell = 0.0;
  for (std::size_t i = 1; i < n; ++i) {
    if (outer_shell(ms, ms.modes[i])) shell += std::abs(terms[i]);
  }
  const double value = pairwise_sum(terms);
  return {value, value != 0.0 ? shell / std::abs(value) : 0.0};
}

int bin_index(const Geometry& g, const Binning& b, const Vec3& p) {
  const double R = g.radius();
  auto clampi = [](int v, int n) { return std::clamp(v, 0, n - 1); };
  if (is_cylinder(g)) {
    const double rho2 = (p[0] * p[0] + p[1] * p[1]) / (R * R);
    const double phi = std::atan2(p[1], p[0]);
    const int i = clampi(static_cast<int>(rho2 * b.n1), b.n1);
    const int j = clampi(static_cast<int>((phi + kPi) / (2.0 * kPi) * b.n2), b.n2);
    const int k = clampi(static_cast<int>(p[2] / g.height() * b.n3), b.n3);
    return (i * b.n2 + j) * b.n3 + k;
  }
  const double r = std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
  const double u = std::pow(r / R, 3);
  const double c = r > 0.0 ? p[2] / r : 1.0;
  const double phi = std::atan2(p[1], p[0]);
  const bool hemi = g.kind() == ShapeKind::hemisphere;
  const int i = clampi(static_cast<int>(u * b.n1), b.n1);
  const int j = clampi(static_cast<int>((hemi ? c : 0.5 * (c + 1.0)) * b.n2), b.n2);
  const int k = clampi(static_cast<int>((phi + kPi) / (2.0 * kPi) * b.n3), b.n3);
  return (i * b.n2 + j) * b.n3 + k;
}

double bin_volume(const Geometry& g, const Binning& b) { return g.volume() / b.size(); }

std::vector<double> bin_probabilities(const ModeSet& ms, const Binning& b, const Vec3& r0, double t) {
  const Geometry& g = ms.geometry;
  if (ms.m) throw std::domain_error("bin_probabilities: needs a mode set built without a fixed m");
  if (!g.contains(r0)) throw std::domain_error("bin_probabilities: r0 outside the container");
  const double R = g.radius();
  const double V = g.volume();
  std::vector<double> prob(static_cast<std::size_t>(b.size()), bin_volume(g, b) / V);
  auto phi_edge = [&](int j, int nj) { return -kPi + 2.0 * kPi * j / nj; };
  // int over [a, b] of (2 - delta_n0) cos(n (phi - phi0))
  auto phi_integral = [](int n, double a, double bb, double phi0) {
    if (n == 0) return bb - a;
    return 2.0 * (std::sin(n * (bb - phi0)) - std::sin(n * (a - phi0))) / n;
  };
  auto sub_rule = [](double a, double bb, int panels) {
    std::vector<double> e(static_cast<std::size_t>(panels) + 1);
    for (int i = 0; i <= panels; ++i) e[static_cast<std::size_t>(i)] = a + (bb - a) * i / panels;
    return quad::composite_rule(e);
  };

  if (is_cylinder(g)) {
    const double L = g.height();
    const double rho0 = std::hypot(r0[0], r0[1]);
    const double phi0 = std::atan2(r0[1], r0[0]);
    std::vector<quad::Rule> rho_rules;
    for (int i = 0; i < b.n1; ++i) {
      rho_rules.push_back(sub_rule(R * std::sqrt(static_cast<double>(i) / b.n1),
                                   R * std::sqrt(static_cast<double>(i + 1) / b.n1), 4));
    }
    for (std::size_t q = 1; q < ms.modes.size(); ++q) {
      const Mode& md = ms.modes[q];
      const double decay = std::exp(-md.rate * t);
      if (decay == 0.0) continue;
      std::vector<double> zint(static_cast<std::size_t>(b.n3));
      for (int k = 0; k < b.n3; ++k) {
        const double za = L * k / b.n3;
        const double zb = L * (k + 1) / b.n3;
        zint[static_cast<std::size_t>(k)] =
            md.axial == 0 ? zb - za
                          : L / (kPi * md.axial) * (std::sin(kPi * md.axial * zb / L) - std::sin(kPi * md.axial * za / L));
      }
      std::vector<double> rint(static_cast<std::size_t>(b.n1));
      for (int i = 0; i < b.n1; ++i) {
        const auto& rule = rho_rules[static_cast<std::size_t>(i)];
        double s = 0.0;
        for (std::size_t p = 0; p < rule.x.size(); ++p) {
          const double f = md.radial == 0 ? 1.0 : specfun::bessel_j(md.angular, md.nu * rule.x[p] / R);
          s += rule.w[p] * rule.x[p] * f;
        }
        rint[static_cast<std::size_t>(i)] = s;
      }
      const double at0 = std::cos(kPi * md.axial * r0[2] / L) *
                         (md.radial == 0 ? 1.0 : specfun::bessel_j(md.angular, md.nu * rho0 / R));
      const double c = md.normalization * at0 * decay;
      for (int i = 0; i < b.n1; ++i) {
        for (int j = 0; j < b.n2; ++j) {
          const double ph = phi_integral(md.angular, phi_edge(j, b.n2), phi_edge(j + 1, b.n2), phi0);
          for (int k = 0; k < b.n3; ++k) {
            prob[static_cast<std::size_t>((i * b.n2 + j) * b.n3 + k)] +=
                c * rint[static_cast<std::size_t>(i)] * ph * zint[static_cast<std::size_t>(k)];
          }
        }
      }
    }
    return prob;
  }

  const bool hemi = g.kind() == ShapeKind::hemisphere;
  const double rr0 = std::sqrt(r0[0] * r0[0] + r0[1] * r0[1] + r0[2] * r0[2]);
  const double x0 = rr0 > 0.0 ? r0[2] / rr0 : 1.0;
  const double phi0 = std::atan2(r0[1], r0[0]);
  const double c_lo = hemi ? 0.0 : -1.0;
  std::vector<quad::Rule> r_rules;
  std::vector<quad::Rule> x_rules;
  for (int i = 0; i < b.n1; ++i) {
    r_rules.push_back(sub_rule(R * std::cbrt(static_cast<double>(i) / b.n1), R * std::cbrt(static_cast<double>(i + 1) / b.n1), 4));
  }
  for (int j = 0; j < b.n2; ++j) {
    x_rules.push_back(sub_rule(c_lo + (1.0 - c_lo) * j / b.n2, c_lo + (1.0 - c_lo) * (j + 1) / b.n2, 4));
  }
  const int l_max = ms.truncation.second;
  // Angular factor per (l, theta bin, phi bin): sum over admissible m' of
  // int Y_l^{m'} Y_l^{m'}(r0)^* over the bin.
  std::vector<std::vector<double>> ang(static_cast<std::size_t>(l_max) + 1,
                                       std::vector<double>(static_cast<std::size_t>(b.n2 * b.n3), 0.0));
  std::vector<double> col;
  for (int mp = 0; mp <= l_max; ++mp) {
    std::vector<double> p0;
    specfun::sph_legendre_column(l_max, mp, x0, p0);
    // xint[j][l - mp]
    std::vector<std::vector<double>> xint(static_cast<std::size_t>(b.n2),
                                          std::vector<double>(static_cast<std::size_t>(l_max - mp) + 1, 0.0));
    for (int j = 0; j < b.n2; ++j) {
      const auto& rule = x_rules[static_cast<std::size_t>(j)];
      for (std::size_t p = 0; p < rule.x.size(); ++p) {
        specfun::sph_legendre_column(l_max, mp, rule.x[p], col);
        for (std::size_t q = 0; q < col.size(); ++q) xint[static_cast<std::size_t>(j)][q] += rule.w[p] * col[q];
      }
    }
    for (int l = mp; l <= l_max; ++l) {
      if (hemi && (l + mp) % 2 != 0) continue;
      for (int j = 0; j < b.n2; ++j) {
        for (int k = 0; k < b.n3; ++k) {
          const double ph = phi_integral(mp, phi_edge(k, b.n3), phi_edge(k + 1, b.n3), phi0);
          ang[static_cast<std::size_t>(l)][static_cast<std::size_t>(j * b.n3 + k)] +=
              xint[static_cast<std::size_t>(j)][static_cast<std::size_t>(l - mp)] * p0[static_cast<std::size_t>(l - mp)] * ph;
        }
      }
    }
  }
  for (std::size_t q = 1; q < ms.modes.size(); ++q) {
    const Mode& md = ms.modes[q];
    const double decay = std::exp(-md.rate * t);
    if (decay == 0.0) continue;
    const int l = md.angular;
    std::vector<double> rint(static_cast<std::size_t>(b.n1));
    for (int i = 0; i < b.n1; ++i) {
      const auto& rule = r_rules[static_cast<std::size_t>(i)];
      double s = 0.0;
      for (std::size_t p = 0; p < rule.x.size(); ++p) s += rule.w[p] * rule.x[p] * rule.x[p] * specfun::spherical_j(l, md.nu * rule.x[p] / R);
      rint[static_cast<std::size_t>(i)] = s;
    }
    const double c = md.normalization * specfun::spherical_j(l, md.nu * rr0 / R) * decay;
    const auto& a = ang[static_cast<std::size_t>(l)];
    for (int i = 0; i < b.n1; ++i) {
      for (int jk = 0; jk < b.n2 * b.n3; ++jk) {
        prob[static_cast<std::size_t>(i * b.n2 * b.n3 + jk)] += c * rint[static_cast<std::size_t>(i)] * a[static_cast<std::size_t>(jk)];
      }
    }
  }
  return prob;
}

WalkResult random_walk_oracle(const Geometry& g, double D, const Vec3& r0, const WalkConfig& cfg, const Binning& b,
                              Exec exec) {
  if (!g.contains(r0)) throw std::domain_error("random_walk_oracle: r0 outside the container");
  if (!(cfg.step_dt > 0.0)) throw ConfigError("random_walk_oracle: step_dt must be positive");
  const double smallest = std::min(g.radius(), g.height());
  const double sigma = std::sqrt(2.0 * D * cfg.step_dt);
  if (sigma > 0.05 * smallest) {
    throw ConfigError("random_walk_oracle: step length exceeds 5% of the smallest container dimension");
  }
  if (!std::is_sorted(cfg.times.begin(), cfg.times.end()) || (!cfg.times.empty() && cfg.times.front() < 0.0)) {
    throw ConfigError("random_walk_oracle: snapshot times must be ascending and >= 0");
  }
  const std::size_t ns = cfg.times.size();
  const auto nw = static_cast<std::size_t>(cfg.walkers);
  std::vector<int> bins(ns * nw);
  std::vector<double> sq(ns * nw);

#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
  for (std::int64_t w = 0; w < cfg.walkers; ++w) {
    CounterRng rng(cfg.seed, static_cast<std::uint64_t>(w));
    Vec3 p = r0;
    double now = 0.0;
    for (std::size_t s = 0; s < ns; ++s) {
      const double span = cfg.times[s] - now;
      auto full = static_cast<std::int64_t>(std::floor(span / cfg.step_dt));
      const double rest = span - static_cast<double>(full) * cfg.step_dt;
      auto step = [&](double scale) {
        Vec3 q{p[0] + scale * rng.normal(), p[1] + scale * rng.normal(), p[2] + scale * rng.normal()};
        specular_reflect(g, p, q);
        p = q;
      };
      for (std::int64_t i = 0; i < full; ++i) step(sigma);
      if (rest > 1e-12 * cfg.step_dt) step(std::sqrt(2.0 * D * rest));
      now = cfg.times[s];
      const std::size_t at = s * nw + static_cast<std::size_t>(w);
      bins[at] = bin_index(g, b, p);
      const double dx = p[0] - r0[0], dy = p[1] - r0[1], dz = p[2] - r0[2];
      sq[at] = dx * dx + dy * dy + dz * dz;
    }
  }
  WalkResult out;
  for (std::size_t s = 0; s < ns; ++s) {
    std::vector<std::int64_t> c(static_cast<std::size_t>(b.size()), 0);
    for (std::size_t w = 0; w < nw; ++w) ++c[static_cast<std::size_t>(bins[s * nw + w])];
    out.counts.push_back(std::move(c));
    out.msd.push_back(nw > 0 ? pairwise_sum(sq.data() + s * nw, nw) / static_cast<double>(nw) : 0.0);
  }
  return out;
}

}  // namespace nanonmr
