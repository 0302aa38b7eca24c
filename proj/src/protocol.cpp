#include "nanonmr/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "nanonmr/parallel.hpp"

namespace nanonmr::protocol {

void ProtocolParams::validate() const {
  if (!(tau > 0.0) || !(T > 0.0) || !(T_m > 0.0)) throw std::domain_error("protocol: tau, T and T_m must be positive");
}

Probability corr_spec_probability(double B_rms, double C_t, double delta, double t, double tau, double gamma_e) {
  if (B_rms == 0.0) return {1.0, false, true};
  const double b2 = B_rms * B_rms;
  if (C_t > b2 * (1.0 + 1e-12)) throw std::domain_error("corr_spec_probability: C(t) exceeds B_rms^2");
  const double a = 2.0 * gamma_e * B_rms * tau;
  const double raw = 1.0 - a * a * (1.0 + std::cos(delta * t) * C_t / b2);
  const double p = std::clamp(raw, 0.0, 1.0);
  return {p, p != raw, std::abs(gamma_e * B_rms * tau) <= kWeakBackActionLimit};
}

double qdyne_joint_probability(double C_lag, double delta, double lag, double tau, double gamma_e) {
  const double a = 2.0 * gamma_e * tau;
  const double amp = a * a * C_lag;
  if (std::abs(amp) > 1.0) throw std::domain_error("qdyne_joint_probability: (2 gamma_e tau)^2 C exceeds 1");
  return 0.5 * (1.0 + amp * std::cos(delta * lag));
}

std::string regime_name(Regime r) {
  switch (r) {
    case Regime::ucl: return "UCL";
    case Regime::confined: return "confined";
    case Regime::qdyne_bound: return "qdyne-bound";
    case Regime::exact: return "exact";
  }
  return "?";
}

FisherResult make_fisher(double information, Regime regime) {
  if (!(information >= 0.0)) throw std::domain_error("fisher: information must be >= 0");
  const double cr = information > 0.0 ? 1.0 / std::sqrt(information) : std::numeric_limits<double>::infinity();
  return {information, regime, cr};
}

FisherResult fisher_corr_spec(double C, double B_rms, double delta, double t, double tau, double gamma_e, double T,
                              double dead_time) {
  if (!(t > 0.0) || !(T > 0.0) || !(tau > 0.0)) throw std::domain_error("fisher_corr_spec: t, tau, T must be positive");
  const Probability p = corr_spec_probability(B_rms, C, delta, t, tau, gamma_e);
  if (p.value <= 0.0 || p.value >= 1.0) throw std::domain_error("fisher_corr_spec: degenerate outcome probability");
  const double b2 = B_rms * B_rms;
  const double ratio = C / b2;
  const double s = std::sin(delta * t);
  const double a = 2.0 * gamma_e * t * tau;
  const double info = a * a * (C * C / b2) * s * s / (1.0 + ratio * std::cos(delta * t)) * T / (t + dead_time);
  return make_fisher(info, Regime::exact);
}

FisherResult fisher_ucl(double B_rms, double delta, double tau, double tau_D, double gamma_e, double T) {
  const double x = gamma_e * B_rms * delta * tau * tau_D * tau_D;
  return make_fisher(2.0 * x * x * T / tau_D, Regime::ucl);
}

FisherResult fisher_confined(double B_rms, double tau, double d3_over_V, double T_m, double T, double gamma_e) {
  const double a = 2.0 * gamma_e * B_rms * tau * d3_over_V;
  return make_fisher(a * a * T_m * T, Regime::confined);
}

double enhancement_ratio(double T_m, double tau_D, double delta, double d, double V) {
  if (!(T_m > 0.0) || !(tau_D > 0.0) || !(delta > 0.0) || !(d > 0.0) || !(V > 0.0)) {
    throw std::domain_error("enhancement_ratio: arguments must be positive");
  }
  const double x = delta * tau_D;
  const double y = d * d * d / V;
  return T_m / tau_D / (x * x) * y * y;
}

QdyneFisher fisher_qdyne(const std::function<double(double)>& C, double c_inf, double delta, double tau,
                         double gamma_e, double T, double J, double V) {
  if (!(tau > 0.0) || !(T > 0.0)) throw std::domain_error("fisher_qdyne: tau and T must be positive");
  const auto n = static_cast<std::size_t>(std::floor(T / tau + 1e-9)) + 1;
  const double g4 = std::pow(gamma_e * tau, 4);
  QdyneFisher out{};
  out.per_lag.resize(n);
  std::vector<double> floor_terms(n);
#pragma omp parallel for schedule(static)
  for (std::size_t s = 0; s < n; ++s) {
    const double ts = static_cast<double>(s) * tau;
    const double sn = std::sin(delta * ts);
    const double c = C(ts);
    out.per_lag[s] = 16.0 * g4 * c * c * ts * ts * sn * sn;
    floor_terms[s] = 16.0 * g4 * c_inf * c_inf * ts * ts * sn * sn;
  }
  out.exact = make_fisher(pairwise_sum(out.per_lag), Regime::exact);
  out.discrete_bound = pairwise_sum(floor_terms);
  out.closed_bound = 8.0 / 3.0 * std::pow(gamma_e * J, 4) * tau * tau * tau * T * T * T / (V * V);
  return out;
}

double interpolate_loglinear(const std::vector<double>& t, const std::vector<double>& y, double at) {
  if (t.empty() || t.size() != y.size()) throw std::domain_error("interpolate_loglinear: bad curve");
  if (at <= t.front()) return y.front();
  if (at >= t.back()) return y.back();
  const auto it = std::upper_bound(t.begin(), t.end(), at);
  const std::size_t i = static_cast<std::size_t>(it - t.begin());
  const double t0 = t[i - 1], t1 = t[i], y0 = y[i - 1], y1 = y[i];
  if (y0 > 0.0 && y1 > 0.0) {
    const double f = (at - t0) / (t1 - t0);
    return std::exp(std::log(y0) + f * (std::log(y1) - std::log(y0)));
  }
  return y0 + (y1 - y0) * (at - t0) / (t1 - t0);
}

}  // namespace nanonmr::protocol
