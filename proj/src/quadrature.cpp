#include "nanonmr/quadrature.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace nanonmr::quad {

std::vector<double> graded_edges(double a, double b, Peak peak, double h0, double growth, double hmax) {
  if (!(b > a)) throw std::domain_error("graded_edges: empty interval");
  if (!(hmax > 0.0)) throw std::domain_error("graded_edges: hmax must be positive");
  const double span = b - a;
  std::vector<double> widths;
  if (peak == Peak::none) {
    const auto n = static_cast<std::size_t>(std::ceil(span / hmax - 1e-12));
    widths.assign(std::max<std::size_t>(n, 1), span / static_cast<double>(std::max<std::size_t>(n, 1)));
  } else {
    double h = std::min(h0, hmax);
    double used = 0.0;
    while (used + h < span) {
      widths.push_back(h);
      used += h;
      h = std::min(h * growth, hmax);
    }
    // Fold a sliver remainder into the last panel.
    const double rest = span - used;
    if (!widths.empty() && rest < 0.25 * widths.back()) {
      widths.back() += rest;
    } else {
      widths.push_back(rest);
    }
    if (peak == Peak::upper) std::reverse(widths.begin(), widths.end());
  }
  std::vector<double> edges{a};
  for (double w : widths) edges.push_back(edges.back() + w);
  edges.back() = b;
  return edges;
}

std::vector<double> bisect_panels(const std::vector<double>& edges) {
  std::vector<double> out;
  out.reserve(2 * edges.size());
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    out.push_back(edges[i]);
    out.push_back(0.5 * (edges[i] + edges[i + 1]));
  }
  out.push_back(edges.back());
  return out;
}

Rule composite_rule(const std::vector<double>& edges) {
  using G = boost::math::quadrature::gauss<double, 20>;
  const auto& xs = G::abscissa();
  const auto& ws = G::weights();
  Rule rule;
  rule.x.reserve(20 * edges.size());
  rule.w.reserve(20 * edges.size());
  for (std::size_t p = 0; p + 1 < edges.size(); ++p) {
    const double mid = 0.5 * (edges[p] + edges[p + 1]);
    const double half = 0.5 * (edges[p + 1] - edges[p]);
    for (std::size_t i = xs.size(); i-- > 0;) {
      rule.x.push_back(mid - half * xs[i]);
      rule.w.push_back(half * ws[i]);
    }
    for (std::size_t i = 0; i < xs.size(); ++i) {
      rule.x.push_back(mid + half * xs[i]);
      rule.w.push_back(half * ws[i]);
    }
  }
  return rule;
}

Result integrate(const Fn1& f, const std::vector<double>& edges, double rel_tol, double abs_tol) {
  using GK = boost::math::quadrature::gauss_kronrod<double, 15>;
  Result total;
  double l1_total = 0.0;
  std::vector<double> pieces;
  std::vector<double> errors;
  for (std::size_t p = 0; p + 1 < edges.size(); ++p) {
    double err = 0.0;
    double l1 = 0.0;
    const double v = GK::integrate(f, edges[p], edges[p + 1], 20, rel_tol * 0.1, &err, &l1);
    pieces.push_back(v);
    errors.push_back(err);
    l1_total += l1;
  }
  // Small-to-large summation keeps the result independent of panel order.
  std::vector<std::size_t> order(pieces.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return std::abs(pieces[a]) < std::abs(pieces[b]); });
  for (std::size_t i : order) {
    total.value += pieces[i];
    total.error += std::abs(errors[i]);
  }
  total.converged = total.error <= std::max(abs_tol, rel_tol * std::max(std::abs(total.value), 1e-3 * l1_total));
  return total;
}

Result integrate_2d(const Fn2& f, const std::vector<double>& edges_x,
                    const std::function<std::vector<double>(double)>& inner_edges, double rel_tol, double abs_tol) {
  bool inner_ok = true;
  double inner_err = 0.0;
  auto outer = [&](double x) {
    const auto ey = inner_edges(x);
    if (ey.size() < 2) return 0.0;
    const Result r = integrate([&](double y) { return f(x, y); }, ey, rel_tol * 0.1, abs_tol * 0.1);
    if (!r.converged) inner_ok = false;
    inner_err = std::max(inner_err, r.error);
    return r.value;
  };
  Result res = integrate(outer, edges_x, rel_tol, abs_tol);
  res.converged = res.converged && inner_ok;
  return res;
}

}  // namespace nanonmr::quad
