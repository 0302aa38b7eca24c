// Quadrature helpers shared by the analytic oracles and the overlap integrals.
//
// Peaked integrands (the r^-3 and r^-6 kernels seen from a shallow NV) are
// handled by splitting the interval into panels whose width grows
// geometrically away from the peak.

#pragma once

#include <functional>
#include <vector>

namespace nanonmr::quad {

enum class Peak { none, lower, upper };

/// Panel edges on [a, b]: width h0 at the peaked end, growing by `growth`
/// per panel, capped at hmax. With Peak::none the panels are uniform (hmax).
std::vector<double> graded_edges(double a, double b, Peak peak, double h0, double growth, double hmax);

struct Rule {
  std::vector<double> x;
  std::vector<double> w;
};

/// Composite Gauss-Legendre rule (20 nodes per panel) over the given edges.
Rule composite_rule(const std::vector<double>& edges);

/// Splits every panel in two.
std::vector<double> bisect_panels(const std::vector<double>& edges);

struct Result {
  double value = 0.0;
  double error = 0.0;
  bool converged = true;
};

using Fn1 = std::function<double(double)>;
using Fn2 = std::function<double(double, double)>;

/// Adaptive Gauss-Kronrod (7/15) on each panel of `edges`.
Result integrate(const Fn1& f, const std::vector<double>& edges, double rel_tol, double abs_tol = 0.0);

/// Iterated 2D integral of f(x, y) for x in edges_x and y in inner(x).
Result integrate_2d(const Fn2& f, const std::vector<double>& edges_x,
                    const std::function<std::vector<double>(double)>& inner_edges, double rel_tol,
                    double abs_tol = 0.0);

}  // namespace nanonmr::quad
