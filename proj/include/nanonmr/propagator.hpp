// Neumann diffusion Green's functions as truncated eigenmode series, and a
// reflected random walk used to check them.
//
// Cylinder modes: cos(pi k z/L) J_n(nu_{s,n} rho/R) e^{i n phi}, with nu the
// positive zeros of J_n'. The radially constant axial modes (s = 0, n = 0,
// k >= 1) are included. Sphere and hemisphere modes:
// j_l(nu_{k,l} r/R) Y_l^{m'}, the hemisphere keeping only l + m' even.

#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "nanonmr/geometry.hpp"
#include "nanonmr/parallel.hpp"

namespace nanonmr {

struct Truncation {
  int radial = 25;     // s (cylinder) or k (sphere, hemisphere), 1-based
  int second = 25;     // axial k >= 0 (cylinder) or l >= 0 (sphere, hemisphere)
  int azimuthal = 25;  // largest |n| for the cylinder propagator
};

Truncation default_truncation(const Geometry& g);

struct Mode {
  int angular;  // n (cylinder) or l
  int radial;   // s (cylinder; 0 for the radially constant axial modes) or k
  int axial;    // k (cylinder), 0 otherwise
  double nu;    // Bessel derivative zero, 0 for s = 0
  double rate;  // 1/us
  double normalization;
};

struct ModeSet {
  Geometry geometry;
  double D;
  Truncation truncation;
  std::optional<int> m;     // azimuthal harmonic the set was built for, if any
  std::vector<Mode> modes;  // modes[0] is the constant mode; ascending rate
};

/// Enumerates modes. With m set, the cylinder keeps n = |m| only and the
/// sphere/hemisphere keep l >= |m|, and the hemisphere parity factor for that
/// m is folded into each normalization (odd l + m get 0). The cylinder
/// normalization is the e^{i n phi} weight 2/[V J_n^2 (1 - n^2/nu^2)(1 + delta_k0)].
ModeSet enumerate_modes(const Geometry& g, double D, const Truncation& trunc, std::optional<int> m = std::nullopt);

struct PropagatorValue {
  double value;        // 1/nm^3
  double convergence;  // |contribution of the outermost truncation shell| / |value|
};

/// G(r, t | r0) in container coordinates, for a ModeSet built without m.
PropagatorValue propagator_eval(const ModeSet& modes, const Vec3& r, const Vec3& r0, double t,
                                Exec exec = Exec::parallel);

/// Equal-volume bins: (rho^2, phi, z) for the cylinder, (r^3, cos theta, phi)
/// for the sphere and hemisphere.
struct Binning {
  int n1 = 10;
  int n2 = 10;
  int n3 = 8;
  int size() const { return n1 * n2 * n3; }
};

int bin_index(const Geometry& g, const Binning& b, const Vec3& p);
double bin_volume(const Geometry& g, const Binning& b);

/// Probability of each bin at time t, integrating the truncated series over
/// the bins mode by mode.
std::vector<double> bin_probabilities(const ModeSet& modes, const Binning& b, const Vec3& r0, double t);

struct WalkConfig {
  std::vector<double> times;  // snapshot times, ascending
  std::int64_t walkers = 100000;
  double step_dt = 0.0;       // us
  std::uint64_t seed = 1;
};

struct WalkResult {
  std::vector<std::vector<std::int64_t>> counts;  // per snapshot, per bin
  std::vector<double> msd;                        // mean-square displacement per snapshot
};

/// Gaussian-step random walk with specular reflection. Every walker draws
/// from its own counter-based stream, so serial and parallel runs agree.
WalkResult random_walk_oracle(const Geometry& g, double D, const Vec3& r0, const WalkConfig& cfg, const Binning& b,
                              Exec exec = Exec::parallel);

}  // namespace nanonmr
