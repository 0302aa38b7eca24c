#include "nanonmr/specfun.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>

namespace nanonmr::specfun {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kRescale = 1e250;

void check_order(int order, const char* what) {
  if (order < 0 || order > kMaxOrder) {
    throw std::domain_error(std::string(what) + ": order " + std::to_string(order) +
                            " outside [0, " + std::to_string(kMaxOrder) + "]");
  }
}

// Start index for Miller's algorithm: far enough past both the requested
// order and the turning point x that the neglected tail is below 1e-17.
int miller_start(int n_max, double x) {
  const double top = std::max(static_cast<double>(n_max), x);
  int m = static_cast<int>(top + 12.0 * std::cbrt(std::max(top, 1.0)) + 20.0);
  if (m % 2 != 0) ++m;
  return m;
}

double bessel_series(int n, double x) {
  // sum_k (-1)^k (x/2)^{2k+n} / (k! (n+k)!)
  const double h = 0.5 * x;
  double lead = 1.0;
  for (int i = 1; i <= n; ++i) lead *= h / i;
  const double q = -h * h;
  double term = 1.0;
  double sum = 1.0;
  for (int k = 1; k < 200; ++k) {
    term *= q / (static_cast<double>(k) * (n + k));
    sum += term;
    if (std::abs(term) < 1e-17 * std::abs(sum)) break;
  }
  return lead * sum;
}

double spherical_series(int l, double x) {
  // x^l/(2l+1)!! * sum_k (-x^2/2)^k / (k! (2l+3)(2l+5)...(2l+2k+1))
  double lead = 1.0;
  for (int i = 0; i <= l; ++i) lead *= (i == 0 ? 1.0 : x) / (2.0 * i + 1.0);
  const double q = -0.5 * x * x;
  double term = 1.0;
  double sum = 1.0;
  for (int k = 1; k < 200; ++k) {
    term *= q / (static_cast<double>(k) * (2.0 * l + 2.0 * k + 1.0));
    sum += term;
    if (std::abs(term) < 1e-17 * std::abs(sum)) break;
  }
  return lead * sum;
}

// Miller backward recurrence for J_0..J_{n_max} at x > 0.
void bessel_miller(int n_max, double x, std::vector<double>& out) {
  const int start = miller_start(n_max, x);
  out.assign(static_cast<std::size_t>(n_max) + 1, 0.0);
  double next = 0.0;    // J_{k+1}
  double cur = 1e-300;  // J_k
  double norm = 0.0;
  const double two_over_x = 2.0 / x;
  for (int k = start; k >= 0; --k) {
    if (k <= n_max) out[static_cast<std::size_t>(k)] = cur;
    if (k == 0) {
      norm += cur;
    } else if (k % 2 == 0) {
      norm += 2.0 * cur;
    }
    if (k == 0) break;
    const double prev = k * two_over_x * cur - next;
    next = cur;
    cur = prev;
    if (std::abs(cur) > kRescale) {
      cur /= kRescale;
      next /= kRescale;
      norm /= kRescale;
      for (int i = k - 1; i <= n_max; ++i) {
        if (i >= 0) out[static_cast<std::size_t>(i)] /= kRescale;
      }
    }
  }
  for (double& v : out) v /= norm;
}

double j0_closed(double x) { return std::sin(x) / x; }
double j1_closed(double x) { return std::sin(x) / (x * x) - std::cos(x) / x; }

// Miller backward recurrence for j_0..j_{l_max} at x >= 1.
void spherical_miller(int l_max, double x, std::vector<double>& out) {
  const int start = miller_start(l_max, x);
  std::vector<double> raw(static_cast<std::size_t>(std::max(l_max, 1)) + 1, 0.0);
  double next = 0.0;
  double cur = 1e-300;
  for (int k = start; k >= 0; --k) {
    if (k <= static_cast<int>(raw.size()) - 1) raw[static_cast<std::size_t>(k)] = cur;
    if (k == 0) break;
    const double prev = (2.0 * k + 1.0) / x * cur - next;
    next = cur;
    cur = prev;
    if (std::abs(cur) > kRescale) {
      cur /= kRescale;
      next /= kRescale;
      for (std::size_t i = static_cast<std::size_t>(std::max(k - 1, 0)); i < raw.size(); ++i) {
        raw[i] /= kRescale;
      }
    }
  }
  const double j0 = j0_closed(x);
  const double j1 = j1_closed(x);
  const double scale = std::abs(j0) >= std::abs(j1) ? j0 / raw[0] : j1 / raw[1];
  out.assign(static_cast<std::size_t>(l_max) + 1, 0.0);
  for (int l = 0; l <= l_max; ++l) out[static_cast<std::size_t>(l)] = raw[static_cast<std::size_t>(l)] * scale;
}

}  // namespace

void bessel_j_all(int n_max, double x, std::vector<double>& out) {
  check_order(n_max, "bessel_j_all");
  if (!std::isfinite(x)) throw std::domain_error("bessel_j_all: non-finite argument");
  if (x == 0.0) {
    out.assign(static_cast<std::size_t>(n_max) + 1, 0.0);
    out[0] = 1.0;
    return;
  }
  const double ax = std::abs(x);
  if (ax * ax <= 1.0) {
    out.resize(static_cast<std::size_t>(n_max) + 1);
    for (int n = 0; n <= n_max; ++n) out[static_cast<std::size_t>(n)] = bessel_series(n, ax);
  } else {
    bessel_miller(n_max, ax, out);
  }
  if (x < 0.0) {
    for (int n = 1; n <= n_max; n += 2) out[static_cast<std::size_t>(n)] = -out[static_cast<std::size_t>(n)];
  }
}

double bessel_j(int n, double x) {
  check_order(n, "bessel_j");
  if (!std::isfinite(x)) throw std::domain_error("bessel_j: non-finite argument");
  if (x == 0.0) return n == 0 ? 1.0 : 0.0;
  const double ax = std::abs(x);
  double value = 0.0;
  if (ax * ax <= n + 1.0) {
    value = bessel_series(n, ax);
  } else {
    std::vector<double> all;
    bessel_miller(n, ax, all);
    value = all[static_cast<std::size_t>(n)];
  }
  return (x < 0.0 && n % 2 != 0) ? -value : value;
}

double bessel_j_deriv(int n, double x) {
  if (n == 0) return -bessel_j(1, x);
  return 0.5 * (bessel_j(n - 1, x) - bessel_j(n + 1, x));
}

void spherical_j_all(int l_max, double x, std::vector<double>& out) {
  check_order(l_max, "spherical_j_all");
  if (!(x >= 0.0) || !std::isfinite(x)) throw std::domain_error("spherical_j_all: argument must be finite and >= 0");
  out.assign(static_cast<std::size_t>(l_max) + 1, 0.0);
  if (x == 0.0) {
    out[0] = 1.0;
    return;
  }
  if (x < 1.0) {
    for (int l = 0; l <= l_max; ++l) out[static_cast<std::size_t>(l)] = spherical_series(l, x);
    return;
  }
  if (x >= l_max) {
    out[0] = j0_closed(x);
    if (l_max >= 1) out[1] = j1_closed(x);
    for (int l = 1; l < l_max; ++l) {
      out[static_cast<std::size_t>(l) + 1] =
          (2.0 * l + 1.0) / x * out[static_cast<std::size_t>(l)] - out[static_cast<std::size_t>(l) - 1];
    }
    return;
  }
  spherical_miller(l_max, x, out);
}

double spherical_j(int l, double x) {
  check_order(l, "spherical_j");
  if (!(x >= 0.0) || !std::isfinite(x)) throw std::domain_error("spherical_j: argument must be finite and >= 0");
  if (x == 0.0) return l == 0 ? 1.0 : 0.0;
  if (x * x <= 2.0 * l + 3.0) return spherical_series(l, x);
  if (x >= l) {
    double prev = j0_closed(x);
    if (l == 0) return prev;
    double cur = j1_closed(x);
    for (int k = 1; k < l; ++k) {
      const double nxt = (2.0 * k + 1.0) / x * cur - prev;
      prev = cur;
      cur = nxt;
    }
    return cur;
  }
  std::vector<double> all;
  spherical_miller(l, x, all);
  return all[static_cast<std::size_t>(l)];
}

double spherical_j_deriv(int l, double x) {
  if (l == 0) return -spherical_j(1, x);
  return (l * spherical_j(l - 1, x) - (l + 1.0) * spherical_j(l + 1, x)) / (2.0 * l + 1.0);
}

double deriv_zero_estimate(BesselKind kind, int order, int index) {
  if (index < 1) throw std::domain_error("deriv_zero_estimate: index must be >= 1");
  if (kind == BesselKind::cylindrical) {
    // McMahon for J_n', with the n=0 index shifted past the zero at x=0.
    const int s = order == 0 ? index + 1 : index;
    if (order > 0 && index == 1) {
      const double n = order;
      const double c = std::cbrt(n);
      return n + 0.8086165 * c + 0.072490 / c - 0.05097 / n;
    }
    const double mu = 4.0 * order * order;
    const double beta = (s + 0.5 * order - 0.75) * kPi;
    const double e = 8.0 * beta;
    return beta - (mu + 3.0) / e - 4.0 * (7.0 * mu * mu + 82.0 * mu - 9.0) / (3.0 * e * e * e);
  }
  // j_l(x) ~ [sin(x - l pi/2) + l(l+1)/(2x) cos(x - l pi/2)] / x
  const int q = order == 0 ? index : index - 1;
  const double beta = (q + 0.5 + 0.5 * order) * kPi;
  const double a = 0.5 * order * (order + 1.0) + 1.0;
  const double guess = beta - a / beta;
  if (order >= 1 && index == 1) {
    const double nu = order + 0.5;
    return std::max(guess, nu + 0.8086165 * std::cbrt(nu) - 0.5);
  }
  return guess;
}

namespace {

double deriv_value(BesselKind kind, int order, double x) {
  return kind == BesselKind::cylindrical ? bessel_j_deriv(order, x) : spherical_j_deriv(order, x);
}

// Second derivative from the Bessel ODE.
double deriv_slope(BesselKind kind, int order, double x, double f) {
  if (kind == BesselKind::cylindrical) {
    const double jn = bessel_j(order, x);
    return -f / x - (1.0 - static_cast<double>(order) * order / (x * x)) * jn;
  }
  const double jl = spherical_j(order, x);
  return -2.0 * f / x - (1.0 - order * (order + 1.0) / (x * x)) * jl;
}

double polish(BesselKind kind, int order, double a, double b, double fa) {
  double x = 0.5 * (a + b);
  for (int it = 0; it < 200; ++it) {
    const double f = deriv_value(kind, order, x);
    if (f == 0.0) return x;
    if ((f < 0.0) == (fa < 0.0)) {
      a = x;
      fa = f;
    } else {
      b = x;
    }
    const double slope = deriv_slope(kind, order, x, f);
    double next = slope != 0.0 ? x - f / slope : 0.5 * (a + b);
    if (!(next > a && next < b)) next = 0.5 * (a + b);
    if (std::abs(next - x) <= 4e-16 * x || (b - a) <= 4e-16 * x) return next;
    x = next;
  }
  return x;
}

}  // namespace

std::vector<double> deriv_zeros(BesselKind kind, int order, int count) {
  check_order(order, "deriv_zeros");
  if (count < 0) throw std::domain_error("deriv_zeros: negative count");
  std::vector<double> roots;
  roots.reserve(static_cast<std::size_t>(count));
  constexpr double kStep = 0.25;
  double x = std::max(0.5 * order, 0.05);
  double fx = deriv_value(kind, order, x);
  while (static_cast<int>(roots.size()) < count) {
    const int index = static_cast<int>(roots.size()) + 1;
    const double window =
        1.1 * std::max(deriv_zero_estimate(kind, order, 1) + index * kPi, deriv_zero_estimate(kind, order, index)) + 10.0;
    bool found = false;
    while (x < window) {
      const double xn = x + kStep;
      const double fn = deriv_value(kind, order, xn);
      if (fn == 0.0 || (fn < 0.0) != (fx < 0.0)) {
        const double root = fn == 0.0 ? xn : polish(kind, order, x, xn, fx);
        roots.push_back(root);
        x = xn;
        fx = fn == 0.0 ? deriv_value(kind, order, xn + 1e-9) : fn;
        found = true;
        break;
      }
      x = xn;
      fx = fn;
    }
    if (!found) {
      std::ostringstream msg;
      msg << "deriv_zero: failed to bracket root " << index << " of "
          << (kind == BesselKind::cylindrical ? "J" : "j") << "_" << order
          << "' below x=" << window << " (estimate " << deriv_zero_estimate(kind, order, index) << ")";
      throw std::runtime_error(msg.str());
    }
    // Asymptotic cross-check once McMahon is reliable.
    if (index > order + 3) {
      const double est = deriv_zero_estimate(kind, order, index);
      if (std::abs(roots.back() - est) > 0.25 * kPi) {
        std::ostringstream msg;
        msg << "deriv_zero: root " << index << " of order " << order << " at " << roots.back()
            << " disagrees with asymptotic estimate " << est;
        throw std::runtime_error(msg.str());
      }
    }
  }
  return roots;
}

BesselDerivZero deriv_zero(BesselKind kind, int order, int index) {
  if (index < 1) throw std::domain_error("deriv_zero: index must be >= 1");
  const auto table = global_zero_cache().zeros(kind, order, index);
  return {kind, order, index, table[static_cast<std::size_t>(index) - 1]};
}

std::vector<double> DerivZeroCache::zeros(BesselKind kind, int order, int count) {
  std::lock_guard lock(mutex_);
  const auto key = std::make_pair(kind == BesselKind::cylindrical ? 0 : 1, order);
  auto& table = tables_[key];
  if (static_cast<int>(table.size()) < count) table = deriv_zeros(kind, order, count);
  return {table.begin(), table.begin() + count};
}

DerivZeroCache& global_zero_cache() {
  static DerivZeroCache cache;
  return cache;
}

void sph_legendre_column(int l_max, int m, double x, std::vector<double>& out) {
  if (m < 0 || m > l_max) throw std::domain_error("sph_legendre_column: need 0 <= m <= l_max");
  out.assign(static_cast<std::size_t>(l_max - m) + 1, 0.0);
  const double s = std::sqrt(std::max(0.0, (1.0 - x) * (1.0 + x)));
  double pmm = std::sqrt(1.0 / (4.0 * kPi));
  for (int i = 1; i <= m; ++i) pmm *= -std::sqrt((2.0 * i + 1.0) / (2.0 * i)) * s;
  out[0] = pmm;
  if (l_max == m) return;
  double pm1 = x * std::sqrt(2.0 * m + 3.0) * pmm;
  out[1] = pm1;
  double p2 = pmm;
  for (int l = m + 2; l <= l_max; ++l) {
    const double a = std::sqrt((4.0 * l * l - 1.0) / (static_cast<double>(l) * l - static_cast<double>(m) * m));
    const double b = std::sqrt((static_cast<double>(l - 1) * (l - 1) - static_cast<double>(m) * m) /
                               (4.0 * (l - 1.0) * (l - 1.0) - 1.0));
    const double pl = a * (x * pm1 - b * p2);
    out[static_cast<std::size_t>(l - m)] = pl;
    p2 = pm1;
    pm1 = pl;
  }
}

double sph_legendre(int l, int m, double x) {
  if (l < 0 || m < 0 || m > l) throw std::domain_error("sph_legendre: need 0 <= m <= l");
  std::vector<double> col;
  sph_legendre_column(l, m, x, col);
  return col.back();
}

}  // namespace nanonmr::specfun
