#include "nanonmr/geometry.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "nanonmr/errors.hpp"

namespace nanonmr {

namespace {
constexpr double kPi = std::numbers::pi;

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
}  // namespace

Geometry Geometry::cylinder(double R, double L, double d) {
  Geometry g{Cylinder{R, L}, d};
  g.validate();
  return g;
}

Geometry Geometry::hemisphere(double R, double d) {
  Geometry g{Hemisphere{R}, d};
  g.validate();
  return g;
}

Geometry Geometry::sphere(double R, double d) {
  Geometry g{Sphere{R}, d};
  g.validate();
  return g;
}

ShapeKind Geometry::kind() const {
  return std::visit(overloaded{[](const Cylinder&) { return ShapeKind::cylinder; },
                               [](const Hemisphere&) { return ShapeKind::hemisphere; },
                               [](const Sphere&) { return ShapeKind::sphere; }},
                    shape);
}

std::string Geometry::name() const {
  switch (kind()) {
    case ShapeKind::cylinder: return "cylinder";
    case ShapeKind::hemisphere: return "hemisphere";
    case ShapeKind::sphere: return "sphere";
  }
  return "?";
}

double Geometry::radius() const {
  return std::visit([](const auto& s) { return s.R; }, shape);
}

double Geometry::height() const {
  return std::visit(overloaded{[](const Cylinder& c) { return c.L; }, [](const Hemisphere& h) { return h.R; },
                               [](const Sphere& s) { return 2.0 * s.R; }},
                    shape);
}

double Geometry::volume() const {
  return std::visit(overloaded{[](const Cylinder& c) { return kPi * c.R * c.R * c.L; },
                               [](const Hemisphere& h) { return 2.0 * kPi / 3.0 * h.R * h.R * h.R; },
                               [](const Sphere& s) { return 4.0 * kPi / 3.0 * s.R * s.R * s.R; }},
                    shape);
}

double Geometry::tau_V(double D) const { return std::pow(volume(), 2.0 / 3.0) / D; }

double Geometry::nv_z() const { return kind() == ShapeKind::sphere ? -(radius() + d) : -d; }

bool Geometry::contains(const Vec3& p, double tol) const {
  const double rho2 = p[0] * p[0] + p[1] * p[1];
  const double R = radius();
  const double slack = tol * std::max(R, height());
  switch (kind()) {
    case ShapeKind::cylinder:
      return std::sqrt(rho2) <= R + slack && p[2] >= -slack && p[2] <= height() + slack;
    case ShapeKind::hemisphere:
      return p[2] >= -slack && std::sqrt(rho2 + p[2] * p[2]) <= R + slack;
    case ShapeKind::sphere:
      return std::sqrt(rho2 + p[2] * p[2]) <= R + slack;
  }
  return false;
}

void Geometry::validate() const {
  const bool ok = std::visit(
      overloaded{[](const Cylinder& c) { return c.R > 0.0 && c.L > 0.0 && std::isfinite(c.R) && std::isfinite(c.L); },
                 [](const Hemisphere& h) { return h.R > 0.0 && std::isfinite(h.R); },
                 [](const Sphere& s) { return s.R > 0.0 && std::isfinite(s.R); }},
      shape);
  if (!ok || !(d > 0.0) || !std::isfinite(d)) throw std::domain_error("geometry: lengths must be positive and finite");
}

void PhysicalParams::validate() const {
  if (!(D > 0.0)) throw std::domain_error("physical params: D must be positive");
  if (!(p >= 0.0 && p <= 1.0)) throw std::domain_error("physical params: p must lie in [0, 1]");
}

Spherical nv_frame(const Geometry& g, const Vec3& p) {
  if (!g.contains(p)) throw std::domain_error("nv_frame: point outside the " + g.name());
  const double x = p[0];
  const double y = p[1];
  const double z = p[2] - g.nv_z();
  const double rho = std::hypot(x, y);
  return {std::hypot(rho, z), std::atan2(rho, z), std::atan2(y, x)};
}

Vec3 container_frame(const Geometry& g, const Spherical& s) {
  const double st = std::sin(s.theta);
  return {s.r * st * std::cos(s.phi), s.r * st * std::sin(s.phi), s.r * std::cos(s.theta) + g.nv_z()};
}

namespace {

struct Crossing {
  double t;
  Vec3 normal;
};

// Smallest t in (0, 1] at which from + t u leaves through a face.
bool first_exit(const Geometry& g, const Vec3& f, const Vec3& u, Crossing& out) {
  const double R = g.radius();
  const double tiny = 1e-13;
  bool found = false;
  out.t = 2.0;
  auto consider = [&](double t, const Vec3& n, bool admissible) {
    if (admissible && t > tiny && t <= 1.0 + tiny && t < out.t) {
      out = {t, n};
      found = true;
    }
  };
  auto at = [&](double t) { return Vec3{f[0] + t * u[0], f[1] + t * u[1], f[2] + t * u[2]}; };
  auto plane = [&](double z0, double nz) {
    if (u[2] * nz <= 0.0) return;
    const double t = (z0 - f[2]) / u[2];
    const Vec3 p = at(t);
    consider(t, {0.0, 0.0, nz}, std::hypot(p[0], p[1]) <= R * (1.0 + 1e-12));
  };
  // Far root of |a + t b|^2 = R^2 in the chosen components.
  auto quadric = [&](bool with_z, double zc, auto&& admissible) {
    const double ax = f[0], ay = f[1], az = with_z ? f[2] - zc : 0.0;
    const double bx = u[0], by = u[1], bz = with_z ? u[2] : 0.0;
    const double A = bx * bx + by * by + bz * bz;
    if (A == 0.0) return;
    const double B = ax * bx + ay * by + az * bz;
    const double C = ax * ax + ay * ay + az * az - R * R;
    const double disc = B * B - A * C;
    if (disc < 0.0) return;
    const double t = (-B + std::sqrt(disc)) / A;
    const Vec3 p = at(t);
    Vec3 n{p[0], p[1], with_z ? p[2] - zc : 0.0};
    const double nn = std::sqrt(n[0] * n[0] + n[1] * n[1] + n[2] * n[2]);
    if (nn == 0.0) return;
    for (double& c : n) c /= nn;
    consider(t, n, admissible(p));
  };
  switch (g.kind()) {
    case ShapeKind::cylinder: {
      const double H = g.height();
      plane(0.0, -1.0);
      plane(H, 1.0);
      quadric(false, 0.0, [&](const Vec3& p) { return p[2] >= -1e-12 * H && p[2] <= H * (1.0 + 1e-12); });
      break;
    }
    case ShapeKind::hemisphere:
      plane(0.0, -1.0);
      quadric(true, 0.0, [&](const Vec3& p) { return p[2] >= -1e-12 * R; });
      break;
    case ShapeKind::sphere:
      quadric(true, 0.0, [](const Vec3&) { return true; });
      break;
  }
  return found;
}

}  // namespace

int specular_reflect(const Geometry& g, Vec3 from, Vec3& to, Vec3* velocity) {
  constexpr int kMaxBounces = 64;
  for (int bounce = 0; bounce < kMaxBounces; ++bounce) {
    if (g.contains(to, 0.0)) return bounce;
    const Vec3 u{to[0] - from[0], to[1] - from[1], to[2] - from[2]};
    Crossing c{};
    if (!first_exit(g, from, u, c)) {
      // Rounding left `from` a hair outside; pull it onto the wall and retry.
      if (!g.contains(to, 1e-12)) throw IntegrityError("specular_reflect: no wall crossing for an exterior point");
      return bounce;
    }
    const Vec3 hit{from[0] + c.t * u[0], from[1] + c.t * u[1], from[2] + c.t * u[2]};
    const double over = (to[0] - hit[0]) * c.normal[0] + (to[1] - hit[1]) * c.normal[1] + (to[2] - hit[2]) * c.normal[2];
    for (int i = 0; i < 3; ++i) to[i] -= 2.0 * over * c.normal[i];
    if (velocity != nullptr) {
      Vec3& v = *velocity;
      const double vn = v[0] * c.normal[0] + v[1] * c.normal[1] + v[2] * c.normal[2];
      for (int i = 0; i < 3; ++i) v[i] -= 2.0 * vn * c.normal[i];
    }
    from = hit;
  }
  throw IntegrityError("specular_reflect: too many bounces");
}

HarmonicCoefficients harmonic_coefficients(int m) {
  const double c1 = std::sqrt(2.0 * kPi / 15.0);
  const int am = std::abs(m);
  HarmonicCoefficients h{m, 0.0, 0.0};
  switch (am) {
    case 0:
      h.zeta = -1.0;
      h.zeta_tilde = -4.0 * std::sqrt(kPi / 5.0);
      break;
    case 1:
      h.zeta = 1.5;
      h.zeta_tilde = 1.5 * 2.0 * c1;
      break;
    case 2:
      h.zeta = -0.75;
      h.zeta_tilde = -0.75 * 4.0 * c1;
      break;
    default:
      throw std::domain_error("harmonic_coefficients: |m| must be <= 2");
  }
  if (m < 0 && am % 2 != 0) h.zeta_tilde = -h.zeta_tilde;
  return h;
}

double y2_theta(int m, double c) {
  const double s2 = std::max(0.0, 1.0 - c * c);
  switch (std::abs(m)) {
    case 0: return std::sqrt(5.0 / (16.0 * kPi)) * (3.0 * c * c - 1.0);
    case 1: return std::sqrt(15.0 / (8.0 * kPi)) * std::sqrt(s2) * std::abs(c);
    case 2: return std::sqrt(15.0 / (32.0 * kPi)) * s2;
    default: throw std::domain_error("y2_theta: |m| must be <= 2");
  }
}

double y2_theta(int m, double c, double s) {
  switch (std::abs(m)) {
    case 0: return std::sqrt(5.0 / (16.0 * kPi)) * (3.0 * c * c - 1.0);
    case 1: return std::sqrt(15.0 / (8.0 * kPi)) * std::abs(s * c);
    case 2: return std::sqrt(15.0 / (32.0 * kPi)) * s * s;
    default: throw std::domain_error("y2_theta: |m| must be <= 2");
  }
}

double coupling_kernel(int m, double rho, double z) {
  const double r = std::hypot(rho, z);
  return harmonic_coefficients(std::abs(m)).zeta_tilde * y2_theta(m, z / r, rho / r) / (r * r * r);
}

}  // namespace nanonmr
