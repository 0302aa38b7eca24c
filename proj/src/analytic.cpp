#include "nanonmr/analytic.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "nanonmr/errors.hpp"

namespace nanonmr::analytic {

namespace {

constexpr double kPi = std::numbers::pi;

double pw(double x, int n) {
  double r = 1.0;
  for (int i = 0; i < n; ++i) r *= x;
  return r;
}

void check_m(int m) {
  if (std::abs(m) > 2) throw std::domain_error("|m| must be <= 2");
}

double atan_pos(double x) {
  if (!(x > 0.0)) throw std::domain_error("closed form: non-positive arctan argument");
  return std::atan(x);
}

double brms_cylinder(int m, double d, double R, double L) {
  const double a = d + L;
  const double q = d * d + R * R;
  const double qa = a * a + R * R;
  const double common = 16.0 * L * R * R * (3.0 * d * d + 3.0 * d * L + L * L) / (pw(d, 3) * pw(a, 3));
  const double R2 = R * R;
  const double R3 = R2 * R;
  switch (m) {
    case 0:
      return kPi / 64.0 *
             ((23.0 * d / q + 24.0 * pw(d, 5) / pw(q, 3) + common - 38.0 * pw(d, 3) / (q * q) - 23.0 * a / qa +
               38.0 * pw(a, 3) / (qa * qa) - 24.0 * pw(a, 5) / pw(qa, 3)) /
                  R2 +
              (105.0 * atan_pos(R / a) + 96.0 * atan_pos(a / R) - 105.0 * atan_pos(R / d) - 96.0 * atan_pos(d / R)) / R3);
    case 1:
      return kPi / 256.0 *
             ((-15.0 * d / q - 24.0 * pw(d, 5) / pw(q, 3) + common + 54.0 * pw(d, 3) / (q * q) + 15.0 * a / qa -
               54.0 * pw(a, 3) / (qa * qa) + 24.0 * pw(a, 5) / pw(qa, 3)) /
                  R2 -
              15.0 / R3 *
                  (-7.0 * atan_pos(R / a) - 6.0 * atan_pos(a / R) + 7.0 * atan_pos(R / d) + 6.0 * atan_pos(d / R)));
    default:
      return kPi / 1024.0 *
             ((183.0 * d / q + 24.0 * pw(d, 5) / pw(q, 3) + common - 102.0 * pw(d, 3) / (q * q) - 183.0 * a / qa +
               102.0 * pw(a, 3) / (qa * qa) - 24.0 * pw(a, 5) / pw(qa, 3)) /
                  R2 +
              105.0 / R3 * (atan_pos(R / a) - atan_pos(R / d)));
  }
}

double brms_hemisphere(int m, double d, double R) {
  const double q = d * d + R * R;
  const double p = d + R;
  const double lg = std::log(q / (p * p));
  switch (m) {
    case 0:
      return kPi / (32.0 * pw(d, 5)) *
             ((d * d - 9.0 * R * R) * lg +
              2.0 * pw(d, 3) *
                  (-5.0 * d / q - 4.0 * d * d / pw(p, 3) - 6.0 * pw(d, 5) / pw(q, 3) + 2.0 * pw(d, 3) / (q * q) +
                   2.0 * d / (p * p) - 2.0 / p) +
              26.0 * d * d - 18.0 * d * R);
    case 1: {
      const double poly = 3.0 * pw(d, 9) + 6.0 * pw(d, 8) * R + 19.0 * pw(d, 7) * R * R + 33.0 * pw(d, 6) * pw(R, 3) +
                          81.0 * pw(d, 5) * pw(R, 4) + 75.0 * pw(d, 4) * pw(R, 5) + 75.0 * pw(d, 3) * pw(R, 6) +
                          45.0 * d * d * pw(R, 7) + 22.0 * d * pw(R, 8) + 9.0 * pw(R, 9);
      return kPi / (128.0 * pw(d, 5)) * (3.0 * (d * d + 3.0 * R * R) * lg + 2.0 * d * R / (pw(p, 3) * pw(q, 3)) * poly);
    }
    default:
      return kPi / (512.0 * pw(d, 5)) *
             (-3.0 * (5.0 * d * d + 3.0 * R * R) * lg +
              2.0 * d *
                  (-4.0 * pw(d, 4) / pw(p, 3) - 18.0 * d * d / p - 6.0 * pw(d, 7) / pw(q, 3) + 18.0 * pw(d, 5) / (q * q) +
                   3.0 * pw(d, 3) * (6.0 / (p * p) - 7.0 / q) + 13.0 * d - 9.0 * R));
  }
}

double brms_sphere(int m, double d, double R) {
  const double p = d + R;
  const double pre = pw(d, 3) * pw(p, 5) * pw(d + 2.0 * R, 3);
  const double at = std::atanh(R / p);
  switch (m) {
    case 0:
      return kPi / (8.0 * pre) *
             (pw(d, 3) *
                  (-pw(d, 5) - 8.0 * pw(d, 4) * R - 16.0 * pw(d, 3) * R * R + 16.0 * d * d * pw(R, 3) +
                   80.0 * d * pw(R, 4) + 64.0 * pw(R, 5)) *
                  at +
              pw(d, 7) * R + 7.0 * pw(d, 6) * R * R + 52.0 * pw(d, 5) * pw(R, 3) + 190.0 * pw(d, 4) * pw(R, 4) +
              320.0 * pw(d, 3) * pw(R, 5) + 256.0 * d * d * pw(R, 6) + 96.0 * d * pw(R, 7) + 16.0 * pw(R, 8));
    case 1:
      return kPi / (32.0 * pre) *
             (-pw(d, 3) *
                  (3.0 * pw(d, 5) + 24.0 * pw(d, 4) * R + 168.0 * d * d * pw(R, 3) + 84.0 * pw(d, 3) * R * R +
                   192.0 * d * pw(R, 4) + 96.0 * pw(R, 5)) *
                  at +
              3.0 * pw(d, 7) * R + 21.0 * pw(d, 6) * R * R + 64.0 * pw(d, 5) * pw(R, 3) + 110.0 * pw(d, 4) * pw(R, 4) +
              136.0 * pw(d, 3) * pw(R, 5) + 136.0 * d * d * pw(R, 6) + 80.0 * d * pw(R, 7) + 16.0 * pw(R, 8));
    default:
      return kPi / (128.0 * pre) *
             (pw(d, 3) *
                  (15.0 * pw(d, 5) + 120.0 * pw(d, 4) * R + 384.0 * pw(d, 3) * R * R + 624.0 * d * d * pw(R, 3) +
                   528.0 * d * pw(R, 4) + 192.0 * pw(R, 5)) *
                  at -
              15.0 * pw(d, 7) * R - 105.0 * pw(d, 6) * R * R - 284.0 * pw(d, 5) * pw(R, 3) -
              370.0 * pw(d, 4) * pw(R, 4) - 224.0 * pw(d, 3) * pw(R, 5) - 32.0 * d * d * pw(R, 6) +
              32.0 * d * pw(R, 7) + 16.0 * pw(R, 8));
  }
}

// Brackets of the long-time constants; C(inf) = (1/V) (prefactor * bracket)^2.
double hemisphere_bracket0(double d, double R) {
  const double s = std::sqrt(d * d + R * R);
  return 2.0 - 2.0 * d / s - R * R / (d * s) - 2.0 * pw(R, 3) / pw(d, 3) * (R / s - 1.0);
}

}  // namespace

double mean_field_integral(const Geometry& g) {
  const double d = g.d;
  const double R = g.radius();
  switch (g.kind()) {
    case ShapeKind::cylinder: {
      const double a = d + g.height();
      return -2.0 * kPi * (a / std::sqrt(a * a + R * R) - d / std::sqrt(d * d + R * R));
    }
    case ShapeKind::hemisphere:
      return -2.0 * kPi / 3.0 * hemisphere_bracket0(d, R);
    case ShapeKind::sphere:
      return -8.0 * kPi * pw(R, 3) / (3.0 * pw(d + R, 3));
  }
  return 0.0;
}

double mean_field(const Geometry& g, const PhysicalParams& params) {
  params.validate();
  return params.p * params.J * mean_field_integral(g);
}

MeanField2D mean_field_2d_limit(double L, double d) {
  if (!(L > 0.0) || !(d > 0.0)) throw std::domain_error("mean_field_2d_limit: L and d must be positive");
  auto antiderivative = [](double u) { return u * u * u - u; };
  const double integral = antiderivative(1.0) - antiderivative(0.0);
  return {integral, -2.0 * kPi * (L / d) * integral};
}

// Beyond a few container sizes the closed forms lose digits to cancellation
// (their terms are O(1/R^3) while the result is O(V/d^6)), so the smooth
// far-field integral is done by quadrature instead.
bool far_field(const Geometry& g) { return g.d > 3.0 * std::max(g.radius(), g.height()); }

ClosedFormResult brms(const Geometry& g, int m) {
  check_m(m);
  const int am = std::abs(m);
  const double d = g.d;
  const double R = g.radius();
  if (far_field(g)) return {brms_numeric(g, m), g.name() + "-brms-m" + std::to_string(am) + "-quadrature", g.kind(), m};
  double v = 0.0;
  switch (g.kind()) {
    case ShapeKind::cylinder: v = brms_cylinder(am, d, R, g.height()); break;
    case ShapeKind::hemisphere: v = brms_hemisphere(am, d, R); break;
    case ShapeKind::sphere: v = brms_sphere(am, d, R); break;
  }
  return {v, g.name() + "-brms-m" + std::to_string(am), g.kind(), m};
}

ClosedFormResult long_time_constant(const Geometry& g, int m) {
  check_m(m);
  const int am = std::abs(m);
  const double d = g.d;
  const double R = g.radius();
  const double V = g.volume();
  double integral = 0.0;
  switch (g.kind()) {
    case ShapeKind::cylinder: {
      const double a = d + g.height();
      const double sa = std::sqrt(a * a + R * R);
      const double sd = std::sqrt(d * d + R * R);
      if (am == 0) {
        integral = 2.0 * kPi * (a / sa - d / sd);
      } else if (am == 1) {
        integral = kPi * (R * (1.0 / sa - 1.0 / sd) - std::asinh(R / a) + std::asinh(R / d));
      } else {
        integral = 0.5 * kPi * (-a / sa + d / sd - 2.0 * std::asinh(a / R) + 2.0 * std::log(a / d) + 2.0 * std::asinh(d / R));
      }
      break;
    }
    case ShapeKind::hemisphere: {
      if (am == 1) throw NoClosedForm("hemisphere m=1 long-time constant has no closed form");
      const double s = std::sqrt(d * d + R * R);
      if (am == 0) {
        integral = 2.0 * kPi / 3.0 * hemisphere_bracket0(d, R);
      } else {
        const double b = R / d * (7.0 * R / s - 6.0) + 8.0 * d / s + 2.0 * pw(R, 3) / pw(d, 3) * (R / s - 1.0) +
                         6.0 * std::log((d + R) / d) - 8.0;
        integral = kPi / 6.0 * b;
      }
      break;
    }
    case ShapeKind::sphere: {
      if (am == 1) throw NoClosedForm("sphere m=1 long-time constant has no closed form");
      if (am == 0) {
        return {64.0 * kPi * kPi * pw(R, 6) / (9.0 * V * pw(d + R, 6)), "sphere-longtime-m0", g.kind(), m};
      }
      const double p = d + R;
      integral = 2.0 * kPi * (std::atanh(R / p) - R * (3.0 * d * d + 6.0 * d * R + 4.0 * R * R) / (3.0 * pw(p, 3)));
      break;
    }
  }
  std::string id = g.name() + "-longtime-m" + std::to_string(am);
  if (far_field(g)) {
    integral = kernel_integral(g, m, 1, 1e-10).value;
    id += "-quadrature";
  }
  return {integral * integral / V, id, g.kind(), m};
}

quad::Result kernel_integral(const Geometry& g, int m, int power, double rel_tol) {
  check_m(m);
  const double d = g.d;
  const double R = g.radius();
  const double zt = harmonic_coefficients(std::abs(m)).zeta_tilde;
  auto kernel_power = [&](double rho, double z) {
    const double r = std::hypot(rho, z);
    const double k = zt * y2_theta(m, z / r, rho / r) / (r * r * r);
    double v = 1.0;
    for (int i = 0; i < power; ++i) v *= k;
    return v;
  };
  if (g.kind() == ShapeKind::cylinder) {
    // NV-frame (z, rho); the integrand peaks at rho = 0, z = d.
    const double H = g.height();
    const double scale = std::min(d, std::min(R, H));
    const auto ez = quad::graded_edges(d, d + H, quad::Peak::lower, 0.25 * scale, 2.0, std::max(H / 8.0, 0.25 * scale));
    auto inner = [&](double z) {
      return quad::graded_edges(0.0, R, quad::Peak::lower, std::min(0.5 * z, R), 2.0, std::max(R / 4.0, 0.5 * z));
    };
    return quad::integrate_2d([&](double z, double rho) { return 2.0 * kPi * rho * kernel_power(rho, z); }, ez, inner,
                              rel_tol);
  }
  // Container-centered (theta, r) over a rectangle, so the integrand stays
  // smooth up to the curved boundary. The point nearest the NV is the base
  // center (hemisphere) or the south pole (sphere).
  const bool sphere = g.kind() == ShapeKind::sphere;
  const double z0 = g.nv_z();
  const double theta_top = sphere ? kPi : 0.5 * kPi;
  const double h_theta = 0.25 * std::min(1.0, d / R);
  const auto et = quad::graded_edges(0.0, theta_top, quad::Peak::upper, h_theta, 2.0, 0.25);
  auto inner = [&](double) {
    return quad::graded_edges(0.0, R, sphere ? quad::Peak::upper : quad::Peak::lower, std::min(0.25 * d, R), 2.0,
                              R / 4.0);
  };
  auto f = [&](double theta, double r) {
    const double st = std::sin(theta);
    return 2.0 * kPi * r * r * st * kernel_power(r * st, r * std::cos(theta) - z0);
  };
  return quad::integrate_2d(f, et, inner, rel_tol);
}

double long_time_numeric(const Geometry& g, int m, double rel_tol) {
  const quad::Result r = kernel_integral(g, m, 1, rel_tol * 1e-2);
  if (!r.converged) {
    std::ostringstream msg;
    msg << "long_time_numeric: quadrature reached only " << r.error / std::abs(r.value) << " relative";
    throw NumericError(msg.str());
  }
  return r.value * r.value / g.volume();
}

double brms_numeric(const Geometry& g, int m, double rel_tol) {
  const quad::Result r = kernel_integral(g, m, 2, rel_tol);
  if (!r.converged) {
    std::ostringstream msg;
    msg << "brms_numeric: quadrature reached only " << r.error / std::abs(r.value) << " relative";
    throw NumericError(msg.str());
  }
  return r.value;
}

double long_time_value(const Geometry& g, int m) {
  try {
    return long_time_constant(g, m).value;
  } catch (const NoClosedForm&) {
    return long_time_numeric(g, m);
  }
}

}  // namespace nanonmr::analytic
