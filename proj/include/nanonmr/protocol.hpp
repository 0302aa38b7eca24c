// Outcome probabilities of correlation spectroscopy and Qdyne, and the Fisher
// information each carries about the detuning delta.
//
// Units: delta in rad/us, times in us, fields in the units of gamma_e^-1
// rad/us (gamma_e * B is a frequency).

#pragma once

#include <functional>
#include <string>
#include <vector>

namespace nanonmr::protocol {

struct ProtocolParams {
  double delta = 0.0;
  double tau = 0.0;
  double t = 0.0;
  double T_m = 0.0;
  double T = 0.0;
  double gamma_e = 1.0;
  double dead_time = 0.0;  // per-shot overhead added to t when counting repetitions
  /// Throws std::domain_error on non-positive tau, T, T_m.
  void validate() const;
};

/// gamma_e B_rms tau above which the weak back-action expansion is suspect.
inline constexpr double kWeakBackActionLimit = 0.1;

struct Probability {
  double value;
  bool clamped;       // raw value left [0, 1]
  bool weak_coupling;  // gamma_e B_rms tau <= kWeakBackActionLimit
};

/// P = 1 - (2 gamma_e B_rms tau)^2 [1 + cos(delta t) C_t / B_rms^2].
Probability corr_spec_probability(double B_rms, double C_t, double delta, double t, double tau, double gamma_e);

/// P = (1/2)[1 + (2 gamma_e tau)^2 C_lag cos(delta lag)].
double qdyne_joint_probability(double C_lag, double delta, double lag, double tau, double gamma_e);

enum class Regime { ucl, confined, qdyne_bound, exact };
std::string regime_name(Regime r);

struct FisherResult {
  double information;
  Regime regime;
  double cramer_rao;  // 1/sqrt(information), infinite when the information is 0
};

FisherResult make_fisher(double information, Regime regime);

/// Exact correlation-spectroscopy information for a single waiting time t,
/// repeated T/(t + dead_time) times. Throws std::domain_error if the outcome
/// probability is 0 or 1 (no information can be defined).
FisherResult fisher_corr_spec(double C, double B_rms, double delta, double t, double tau, double gamma_e, double T,
                              double dead_time = 0.0);

/// The short-time (unconfined) closed form 2 (gamma_e B delta tau tau_D^2)^2 T/tau_D.
FisherResult fisher_ucl(double B_rms, double delta, double tau, double tau_D, double gamma_e, double T);

/// The confined long-time closed form with sin^2 at its maximum:
/// (2 gamma_e B tau)^2 (d^3/V)^2 T_m T.
FisherResult fisher_confined(double B_rms, double tau, double d3_over_V, double T_m, double T, double gamma_e);

/// (T_m/tau_D)(delta tau_D)^-2 (d^3/V)^2.
double enhancement_ratio(double T_m, double tau_D, double delta, double d, double V);

struct QdyneFisher {
  FisherResult exact;
  std::vector<double> per_lag;  // I_s for s = 0..T/tau
  double discrete_bound;        // the same sum with C(t_s) replaced by C(inf)
  double closed_bound;          // (8/3)(gamma_e J)^4 tau^3 T^3 / V^2
};

/// Qdyne information summed over lags t_s = s tau, s = 0..floor(T/tau).
QdyneFisher fisher_qdyne(const std::function<double(double)>& C, double c_inf, double delta, double tau,
                         double gamma_e, double T, double J, double V);

/// Log-linear interpolation of a sampled positive curve; clamps outside.
double interpolate_loglinear(const std::vector<double>& t, const std::vector<double>& y, double at);

}  // namespace nanonmr::protocol
