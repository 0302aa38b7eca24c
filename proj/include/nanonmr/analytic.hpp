// Closed-form mean fields, B_rms^2 and long-time correlation constants, with
// quadrature counterparts used both as fallbacks and as test oracles.
//
// All field quantities are in units of J (mean field, per unit polarization)
// or J^2 (B_rms^2, C(inf)). Lengths carry their natural dimension, so B_rms^2
// scales as length^-3.

#pragma once

#include <string>

#include "nanonmr/geometry.hpp"
#include "nanonmr/quadrature.hpp"

namespace nanonmr::analytic {

struct ClosedFormResult {
  double value;
  std::string formula_id;
  ShapeKind shape;
  int m;
};

/// Dimensionless I_1 = -int d^3r (3cos^2 - 1)/r^3 over the container.
double mean_field_integral(const Geometry& g);
/// p J I_1.
double mean_field(const Geometry& g, const PhysicalParams& params);

struct MeanField2D {
  double angular_integral;  // int_0^1 (3u^2 - 1) du
  double value;             // -2 pi (L/d) times the integral
};
MeanField2D mean_field_2d_limit(double L, double d);

/// B_rms^2 for harmonic m (m and -m coincide).
ClosedFormResult brms(const Geometry& g, int m);

/// Closed-form C^(m)(t >> tau_V) = (1/V) (int K_m d^3r)^2.
/// Throws NoClosedForm for the hemisphere and sphere with |m| = 1.
ClosedFormResult long_time_constant(const Geometry& g, int m);

/// Quadrature of int K_m^power d^3r over the container, graded toward the
/// container point nearest the NV.
quad::Result kernel_integral(const Geometry& g, int m, int power, double rel_tol = 1e-10);

/// (1/V)(int K_m d^3r)^2 by quadrature; throws NumericError when the
/// tolerance is not reached.
double long_time_numeric(const Geometry& g, int m, double rel_tol = 1e-6);

/// B_rms^2 by quadrature.
double brms_numeric(const Geometry& g, int m, double rel_tol = 1e-9);

/// C(inf) from the closed form when one exists, otherwise by quadrature.
double long_time_value(const Geometry& g, int m);

}  // namespace nanonmr::analytic
