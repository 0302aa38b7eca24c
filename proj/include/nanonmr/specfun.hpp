// Bessel functions of the first kind, their derivatives, and derivative zeros.
//
// Integer-order J_n and spherical j_l are evaluated with an ascending series
// where it converges without cancellation and with Miller's backward
// recurrence (normalized by the Neumann sum) everywhere else. Derivative zeros
// are found by a sign-change scan seeded from the McMahon/Olver estimates and
// polished with safeguarded Newton.

#pragma once

#include <cstddef>
#include <mutex>
#include <map>
#include <utility>
#include <vector>

namespace nanonmr::specfun {

enum class BesselKind { cylindrical, spherical };

/// A strictly positive zero of J_n' or j_l'.
struct BesselDerivZero {
  BesselKind kind;
  int order;
  int index;  // 1-based
  double value;
};

/// Largest order supported by the evaluators (the propagator needs l up to a
/// few hundred for converged small-volume sums).
inline constexpr int kMaxOrder = 512;

double bessel_j(int n, double x);
double bessel_j_deriv(int n, double x);

double spherical_j(int l, double x);
double spherical_j_deriv(int l, double x);

/// Fills out[0..n_max] with J_0(x)..J_{n_max}(x) in one backward sweep.
void bessel_j_all(int n_max, double x, std::vector<double>& out);
/// Fills out[0..l_max] with j_0(x)..j_{l_max}(x).
void spherical_j_all(int l_max, double x, std::vector<double>& out);

/// McMahon/Olver estimate of the index-th positive zero of the derivative.
double deriv_zero_estimate(BesselKind kind, int order, int index);

/// The index-th strictly positive zero of d/dx J_order (cylindrical) or
/// d/dx j_order (spherical). The trivial zero at x=0 is never counted.
/// Throws std::runtime_error when a root cannot be bracketed.
BesselDerivZero deriv_zero(BesselKind kind, int order, int index);

/// First `count` positive derivative zeros for one order.
std::vector<double> deriv_zeros(BesselKind kind, int order, int count);

/// Thread-safe memo of derivative-zero tables, shared read-mostly.
class DerivZeroCache {
 public:
  /// Returns a copy of the first `count` zeros, extending the table on demand.
  std::vector<double> zeros(BesselKind kind, int order, int count);

 private:
  std::mutex mutex_;
  std::map<std::pair<int, int>, std::vector<double>> tables_;
};

DerivZeroCache& global_zero_cache();

/// Fully normalized associated Legendre function N_l^m P_l^m(x) for m >= 0,
/// with the Condon-Shortley phase, such that Y_l^m = value * e^{i m phi}.
double sph_legendre(int l, int m, double x);

/// Fills out[l - m] for l = m..l_max with the normalized functions at fixed m.
void sph_legendre_column(int l_max, int m, double x, std::vector<double>& out);

}  // namespace nanonmr::specfun
