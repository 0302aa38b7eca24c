#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "nanonmr/geometry.hpp"
#include "nanonmr/specfun.hpp"

using namespace nanonmr;
using std::numbers::pi;

namespace {

std::complex<double> Y2(int m, double theta, double phi) {
  const double p = specfun::sph_legendre(2, std::abs(m), std::cos(theta));
  const std::complex<double> e = std::polar(1.0, std::abs(m) * phi);
  if (m >= 0) return p * e;
  return (std::abs(m) % 2 ? -1.0 : 1.0) * p * std::conj(e);
}

}  // namespace

TEST_CASE("volumes and diffusion times") {
  const auto c = Geometry::cylinder(3.0, 5.0, 0.5);
  const auto h = Geometry::hemisphere(3.0, 0.5);
  const auto s = Geometry::sphere(3.0, 0.5);
  CHECK(c.volume() == doctest::Approx(pi * 9 * 5));
  CHECK(h.volume() == doctest::Approx(2 * pi / 3 * 27));
  CHECK(s.volume() == doctest::Approx(4 * pi / 3 * 27));
  for (const auto& g : {c, h, s}) {
    CHECK(g.tau_V(0.5) == doctest::Approx(std::pow(g.volume(), 2.0 / 3.0) / 0.5));
    CHECK(g.tau_V(0.5) > g.tau_D(0.5));
  }
  CHECK(c.tau_D(0.5) == doctest::Approx(0.5));
}

TEST_CASE("invalid geometries are rejected") {
  CHECK_THROWS(Geometry::cylinder(-1.0, 1.0, 1.0));
  CHECK_THROWS(Geometry::cylinder(1.0, 0.0, 1.0));
  CHECK_THROWS(Geometry::sphere(1.0, -0.1));
  CHECK_THROWS(Geometry::hemisphere(0.0, 1.0));
}

TEST_CASE("NV-frame examples") {
  const auto c = Geometry::cylinder(4.0, 6.0, 1.5);
  auto p = nv_frame(c, {0.0, 0.0, 2.0});
  CHECK(p.r == doctest::Approx(3.5));
  CHECK(p.theta == doctest::Approx(0.0));

  const auto s = Geometry::sphere(4.0, 1.5);
  p = nv_frame(s, {0.0, 0.0, 0.0});
  CHECK(p.r == doctest::Approx(5.5));
  CHECK(p.theta == doctest::Approx(0.0));

  const auto h = Geometry::hemisphere(4.0, 1.5);
  p = nv_frame(h, {0.0, 4.0, 0.0});
  CHECK(p.r == doctest::Approx(std::hypot(4.0, 1.5)));
  CHECK(p.theta == doctest::Approx(std::atan2(4.0, 1.5)));
  CHECK(p.phi == doctest::Approx(pi / 2));

  CHECK_THROWS(nv_frame(c, {5.0, 0.0, 1.0}));
}

TEST_CASE("container and NV frames round-trip") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const auto g = Geometry::sphere(2.0, 0.3);
  for (int i = 0; i < 1000; ++i) {
    Vec3 p{2 * u(rng), 2 * u(rng), 2 * u(rng)};
    if (!g.contains(p)) continue;
    const Vec3 q = container_frame(g, nv_frame(g, p));
    for (int k = 0; k < 3; ++k) CHECK(std::abs(q[k] - p[k]) <= 1e-12 * 4.0);
  }
}

TEST_CASE("coefficient table") {
  CHECK(harmonic_coefficients(0).zeta == -1.0);
  CHECK(harmonic_coefficients(0).zeta_tilde == doctest::Approx(-3.1706).epsilon(1e-4));
  CHECK(harmonic_coefficients(2).zeta == -0.75);
  CHECK(harmonic_coefficients(-2).zeta == harmonic_coefficients(2).zeta);
  CHECK(harmonic_coefficients(-1).zeta_tilde == -harmonic_coefficients(1).zeta_tilde);
  CHECK(harmonic_coefficients(-2).zeta_tilde == harmonic_coefficients(2).zeta_tilde);
  CHECK(harmonic_coefficients(1).zeta_tilde == doctest::Approx(1.5 * 2 * std::sqrt(2 * pi / 15)));
  CHECK(harmonic_coefficients(2).zeta_tilde == doctest::Approx(-0.75 * 4 * std::sqrt(2 * pi / 15)));
}

TEST_CASE("spherical-harmonic decomposition reconstructs the dipolar coupling") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n;
  for (int trial = 0; trial < 200; ++trial) {
    const Vec3 r{n(rng), n(rng), n(rng)}, S{n(rng), n(rng), n(rng)}, I{n(rng), n(rng), n(rng)};
    const double rn = std::sqrt(r[0] * r[0] + r[1] * r[1] + r[2] * r[2]);
    const double sr = (S[0] * r[0] + S[1] * r[1] + S[2] * r[2]) / rn;
    const double ir = (I[0] * r[0] + I[1] * r[1] + I[2] * r[2]) / rn;
    const double si = S[0] * I[0] + S[1] * I[1] + S[2] * I[2];
    const double direct = -(3 * sr * ir - si) / (rn * rn * rn);

    const double th = std::acos(r[2] / rn), ph = std::atan2(r[1], r[0]);
    const std::complex<double> sp{S[0], S[1]}, sm{S[0], -S[1]}, ip{I[0], I[1]}, im{I[0], -I[1]};
    auto z = [](int m) { return harmonic_coefficients(m).zeta_tilde; };
    std::complex<double> sum = z(0) * Y2(0, th, ph) * (S[2] * I[2] - 0.25 * (sp * im + sm * ip));
    sum += z(-1) * (S[2] * ip + I[2] * sp) * Y2(-1, th, ph) + z(1) * (S[2] * im + I[2] * sm) * Y2(1, th, ph);
    sum += z(-2) * sp * ip * Y2(-2, th, ph) + z(2) * sm * im * Y2(2, th, ph);
    sum /= rn * rn * rn;
    CHECK(std::abs(sum.imag()) < 1e-10 * (1 + std::abs(direct)));
    CHECK(std::abs(sum.real() - direct) < 1e-10 * (1 + std::abs(direct)));
  }
}

TEST_CASE("coupling kernel matches the m = 0 dipolar form on and off axis") {
  CHECK(coupling_kernel(0, 0.0, 2.0) == doctest::Approx(-2.0 / 8.0));
  const double rho = 1.3, z = 0.7, r = std::hypot(rho, z), c = z / r;
  CHECK(coupling_kernel(0, rho, z) == doctest::Approx(-(3 * c * c - 1) / (r * r * r)));
  CHECK(coupling_kernel(2, rho, z) == doctest::Approx(coupling_kernel(-2, rho, z)));
  CHECK(y2_theta(1, 0.0) == doctest::Approx(0.0));
}

TEST_CASE("specular reflection mirrors position and velocity") {
  const auto g = Geometry::cylinder(2.0, 3.0, 1.0);
  Vec3 to{0.5, 0.0, -0.1}, v{0.3, 0.0, -1.0};
  CHECK(specular_reflect(g, {0.5, 0.0, 0.2}, to, &v) == 1);
  CHECK(to[2] == doctest::Approx(0.1));
  CHECK(v[2] == doctest::Approx(1.0));

  const auto s = Geometry::sphere(1.0, 1.0);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  for (int i = 0; i < 500; ++i) {
    Vec3 from{0.2 * n(rng), 0.2 * n(rng), 0.2 * n(rng)};
    if (!s.contains(from)) continue;
    Vec3 vel{n(rng), n(rng), n(rng)};
    Vec3 x{from[0] + 2 * vel[0], from[1] + 2 * vel[1], from[2] + 2 * vel[2]};
    const double speed = std::hypot(vel[0], vel[1], vel[2]);
    specular_reflect(s, from, x, &vel);
    CHECK(s.contains(x));
    CHECK(std::hypot(vel[0], vel[1], vel[2]) == doctest::Approx(speed).epsilon(1e-14));
  }
}
