#include <doctest.h>

#include <boost/math/quadrature/gauss.hpp>

#include <cmath>
#include <numbers>

#include "nanonmr/propagator.hpp"
#include "nanonmr/specfun.hpp"
#include "oracles.hpp"

using namespace nanonmr;
using std::numbers::pi;
using boost::math::quadrature::gauss;
using oracle::chi2_p;
using oracle::cyl;

namespace {

// Integral over the cylinder cross-section and height of f(rho, phi, z).
template <class F>
double cylinder_integral(double R, double L, F f) {
  const int nphi = 32;
  double total = 0.0;
  for (int j = 0; j < nphi; ++j) {
    const double phi = 2 * pi * (j + 0.5) / nphi;
    total += gauss<double, 30>::integrate(
        [&](double z) {
          return gauss<double, 30>::integrate([&](double rho) { return rho * f(rho, phi, z); }, 0.0, R);
        },
        0.0, L);
  }
  return total * 2 * pi / nphi;
}


}  // namespace

TEST_CASE("mode enumeration examples") {
  const double D = 0.5;
  const auto c = Geometry::cylinder(3.0, 4.0, 1.0);
  const auto one = enumerate_modes(c, D, Truncation{1, 0, 0}, 0);
  REQUIRE(one.modes.size() == 2);
  CHECK(one.modes[0].rate == 0.0);
  CHECK(one.modes[0].normalization == doctest::Approx(1.0 / c.volume()));
  const double nu = specfun::deriv_zero(specfun::BesselKind::cylindrical, 0, 1).value;
  CHECK(one.modes[1].rate == doctest::Approx(D * (nu / 3.0) * (nu / 3.0)));

  const auto s = Geometry::sphere(2.0, 1.0);
  const auto sm = enumerate_modes(s, D, Truncation{3, 3, 0});
  bool found = false;
  for (const auto& m : sm.modes) {
    if (m.angular == 0 && m.radial == 1) {
      CHECK(m.rate == doctest::Approx(D * std::pow(4.493409457909064 / 2.0, 2)));
      found = true;
    }
  }
  CHECK(found);

  const auto h = Geometry::hemisphere(2.0, 1.0);
  for (const auto& m : enumerate_modes(h, D, Truncation{4, 4, 0}, 0).modes) {
    if (m.angular % 2 == 1) CHECK(m.normalization == 0.0);
  }
}

TEST_CASE("modes: one constant mode, positive ascending rates") {
  for (const auto& g : {Geometry::cylinder(2.0, 3.0, 1.0), Geometry::sphere(2.0, 1.0), Geometry::hemisphere(2.0, 1.0)}) {
    const auto ms = enumerate_modes(g, 0.7, default_truncation(g));
    int constants = 0;
    for (std::size_t i = 0; i < ms.modes.size(); ++i) {
      if (ms.modes[i].rate == 0.0) ++constants;
      if (i > 0) {
        CHECK(ms.modes[i].rate > 0.0);
        CHECK(ms.modes[i].rate >= ms.modes[i - 1].rate);
      }
    }
    CHECK(constants == 1);
  }
}

TEST_CASE("long-time limit and symmetry") {
  const auto g = Geometry::cylinder(2.0, 3.0, 1.0);
  const auto ms = enumerate_modes(g, 0.5, Truncation{10, 10, 8});
  const Vec3 a = cyl(0.7, 0.4, 1.1), b = cyl(1.5, 2.8, 2.6);
  const auto late = propagator_eval(ms, a, b, 100 * g.tau_V(0.5));
  CHECK(std::abs(late.value - 1 / g.volume()) <= 1e-12 / g.volume());
  for (double t : {0.05, 0.3, 2.0}) {
    const double ab = propagator_eval(ms, a, b, t).value, ba = propagator_eval(ms, b, a, t).value;
    CHECK(std::abs(ab - ba) <= 1e-10 * std::max(1.0, std::abs(ab)));
  }
  const auto sg = Geometry::sphere(1.5, 1.0);
  const auto sms = enumerate_modes(sg, 0.5, Truncation{10, 10, 0});
  const Vec3 p{0.3, -0.2, 0.5}, q{-0.9, 0.4, -0.6};
  CHECK(std::abs(propagator_eval(sms, p, q, 0.4).value - propagator_eval(sms, q, p, 0.4).value) < 1e-10);
}

TEST_CASE("normalization by quadrature at half the volume time") {
  const auto g = Geometry::cylinder(2.0, 3.0, 1.0);
  const double D = 0.5;
  const auto ms = enumerate_modes(g, D, Truncation{10, 10, 8});
  const Vec3 r0 = cyl(0.9, 1.0, 0.8);
  const double t = 0.5 * g.tau_V(D);
  const double total = cylinder_integral(2.0, 3.0, [&](double rho, double phi, double z) {
    return propagator_eval(ms, cyl(rho, phi, z), r0, t, Exec::serial).value;
  });
  CHECK(total == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("semigroup property") {
  const auto g = Geometry::cylinder(1.0, 1.5, 1.0);
  const double D = 0.5, tv = g.tau_V(D);
  const auto ms = enumerate_modes(g, D, Truncation{6, 6, 4});
  const Vec3 r = cyl(0.4, 0.3, 0.2), r0 = cyl(0.8, 2.0, 1.2);
  const double t1 = 0.1 * tv, t2 = 0.15 * tv;
  const double chained = cylinder_integral(1.0, 1.5, [&](double rho, double phi, double z) {
    const Vec3 mid = cyl(rho, phi, z);
    return propagator_eval(ms, r, mid, t1, Exec::serial).value * propagator_eval(ms, mid, r0, t2, Exec::serial).value;
  });
  CHECK(chained == doctest::Approx(propagator_eval(ms, r, r0, t1 + t2).value).epsilon(0.02));
}

TEST_CASE("positivity after 0.05 tau_V") {
  const auto g = Geometry::cylinder(2.0, 2.0, 1.0);
  const double D = 0.5;
  const auto ms = enumerate_modes(g, D, default_truncation(g));
  const Vec3 r0 = cyl(1.2, 0.0, 0.5);
  const double floor = -1e-3 / g.volume();
  for (double t : {0.05, 0.2, 1.0}) {
    for (double rho = 0.0; rho <= 2.0; rho += 0.25) {
      for (double phi = 0.0; phi < 2 * pi; phi += pi / 4) {
        for (double z = 0.0; z <= 2.0; z += 0.25) {
          CHECK(propagator_eval(ms, cyl(rho, phi, z), r0, t * g.tau_V(D)).value >= floor);
        }
      }
    }
  }
}

TEST_CASE("cylinder axial marginal is the one-dimensional cosine series") {
  const double R = 1.0, L = 2.0, D = 0.5;
  const auto g = Geometry::cylinder(R, L, 1.0);
  const auto ms = enumerate_modes(g, D, Truncation{6, 12, 4});
  const Vec3 r0 = cyl(0.6, 0.7, 0.5);
  const double t = 0.3;
  for (double z : {0.1, 0.9, 1.7}) {
    double marginal = 0.0;
    const int nphi = 32;
    for (int j = 0; j < nphi; ++j) {
      const double phi = 2 * pi * (j + 0.5) / nphi;
      marginal += gauss<double, 30>::integrate(
          [&](double rho) { return rho * propagator_eval(ms, cyl(rho, phi, z), r0, t, Exec::serial).value; }, 0.0, R);
    }
    marginal *= 2 * pi / nphi;
    double oned = 1.0 / L;
    for (int k = 1; k <= 12; ++k) {
      oned += 2.0 / L * std::cos(pi * k * z / L) * std::cos(pi * k * r0[2] / L) * std::exp(-D * pi * pi * k * k * t / (L * L));
    }
    CHECK(std::abs(marginal - oned) < 1e-8);
  }
}

TEST_CASE("random walk agrees with the binned propagator") {
  const auto g = Geometry::cylinder(3.0, 3.0, 1.0);
  const double D = 0.5;
  const auto ms = enumerate_modes(g, D, default_truncation(g));
  const Binning b{6, 6, 6};
  const Vec3 r0 = cyl(1.0, 0.5, 1.2);
  WalkConfig cfg;
  cfg.walkers = 40000;
  cfg.step_dt = 0.005;
  cfg.seed = 5;
  const double tv = g.tau_V(D);
  cfg.times = {0.0, 0.3 * tv};
  const auto res = random_walk_oracle(g, D, r0, cfg, b);

  const int start = bin_index(g, b, r0);
  CHECK(res.counts[0][start] == cfg.walkers);
  CHECK(chi2_p(res.counts[1], bin_probabilities(ms, b, r0, cfg.times[1]), cfg.walkers) > 0.01);
}

TEST_CASE("random walk fills the container uniformly at late times") {
  const auto g = Geometry::cylinder(1.0, 1.0, 1.0);
  const Binning b{3, 3, 3};
  WalkConfig cfg;
  cfg.walkers = 1000;
  cfg.step_dt = 0.0025;
  cfg.times = {100 * g.tau_V(0.5)};
  const auto res = random_walk_oracle(g, 0.5, {0.2, 0.1, 0.3}, cfg, b);
  const double expected = cfg.walkers * bin_volume(g, b) / g.volume();
  for (auto c : res.counts[0]) CHECK(std::abs(c - expected) < 5 * std::sqrt(expected));
}

TEST_CASE("free-interior mean-square displacement is 6 D t") {
  const auto g = Geometry::sphere(10.0, 1.0);
  WalkConfig cfg;
  cfg.walkers = 20000;
  cfg.step_dt = 0.01;
  cfg.times = {0.5, 1.0};
  const auto res = random_walk_oracle(g, 0.5, {0, 0, 0}, cfg, Binning{});
  CHECK(res.msd[0] == doctest::Approx(6 * 0.5 * 0.5).epsilon(0.05));
  CHECK(res.msd[1] == doctest::Approx(6 * 0.5 * 1.0).epsilon(0.05));
}

TEST_CASE("serial and parallel walks are identical") {
  const auto g = Geometry::sphere(2.0, 1.0);
  WalkConfig cfg;
  cfg.walkers = 500;
  cfg.step_dt = 0.01;
  cfg.times = {1.0};
  const auto a = random_walk_oracle(g, 0.5, {0.1, 0, 0}, cfg, Binning{}, Exec::serial);
  const auto b = random_walk_oracle(g, 0.5, {0.1, 0, 0}, cfg, Binning{}, Exec::parallel);
  CHECK(a.counts == b.counts);
  CHECK(a.msd == b.msd);
}
