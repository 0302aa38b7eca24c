// Independent reference computations shared by the unit tests and the
// acceptance checks. Nothing here calls the library's own quadrature.
#pragma once

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "nanonmr/geometry.hpp"

namespace oracle {

// Coupling kernels in the NV frame written out from the dipolar tensor.
inline double kernel(int m, double rho, double z) {
  const double r2 = rho * rho + z * z, r = std::sqrt(r2), c = z / r, s = rho / r;
  switch (std::abs(m)) {
    case 0: return -(3 * c * c - 1) / (r2 * r);
    case 1: return 1.5 * std::abs(s * c) / (r2 * r);
    default: return -0.75 * s * s / (r2 * r);
  }
}

// 2 pi int rho drho dz k^power over the container, NV at the origin of z.
inline double kernel_integral(const nanonmr::Geometry& g, int m, int power) {
  using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
  const double R = g.radius(), d = g.d;
  const double zlo = d, zhi = d + g.height();
  auto rmax = [&](double z) {
    switch (g.kind()) {
      case nanonmr::ShapeKind::cylinder: return R;
      case nanonmr::ShapeKind::hemisphere: return std::sqrt(std::max(0.0, R * R - (z - d) * (z - d)));
      default: return std::sqrt(std::max(0.0, R * R - (z - d - R) * (z - d - R)));
    }
  };
  auto inner = [&](double z) {
    return GK::integrate([&](double rho) { return rho * std::pow(kernel(m, rho, z), power); }, 0.0, rmax(z), 15,
                         1e-12);
  };
  // Split the depth range geometrically toward the NV-facing surface.
  double total = 0.0, a = zlo, h = 0.05 * d;
  while (a < zhi) {
    const double b = std::min(zhi, a + h);
    total += GK::integrate(inner, a, b, 15, 1e-12);
    a = b;
    h *= 2.0;
  }
  return 2 * std::numbers::pi * total;
}

// Chi-square p-value of counts against bin probabilities. Bins expecting
// fewer than 5 counts are pooled into one.
inline double chi2_p(const std::vector<std::int64_t>& counts, const std::vector<double>& prob, double total) {
  double chi2 = 0.0, pooled_obs = 0.0, pooled_exp = 0.0;
  int dof = -1;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double e = total * prob[i];
    if (e < 5.0) {
      pooled_obs += static_cast<double>(counts[i]);
      pooled_exp += e;
      continue;
    }
    chi2 += (counts[i] - e) * (counts[i] - e) / e;
    ++dof;
  }
  if (pooled_exp > 0.0) {
    chi2 += (pooled_obs - pooled_exp) * (pooled_obs - pooled_exp) / pooled_exp;
    ++dof;
  }
  boost::math::chi_squared dist(static_cast<double>(std::max(dof, 1)));
  return boost::math::cdf(boost::math::complement(dist, chi2));
}

inline nanonmr::Vec3 cyl(double rho, double phi, double z) { return {rho * std::cos(phi), rho * std::sin(phi), z}; }

}  // namespace oracle
