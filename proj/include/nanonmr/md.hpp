// Confined Lennard-Jones molecular dynamics producing the field
// B(t) = sum_i r_i^-3 (3 cos^2 theta_i - 1) I_z^i at virtual NV centers
// below the container.
//
// Reduced LJ units throughout. Containers use the geometry module frames, so
// an NV at depth d sits at Geometry::nv_z() for that depth.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nanonmr/geometry.hpp"
#include "nanonmr/parallel.hpp"

namespace nanonmr::md {

enum class WallModel { specular_caps_lj_lateral, lj_everywhere, specular_everywhere };
std::string wall_model_name(WallModel w);
WallModel parse_wall_model(const std::string& s);

struct MdConfig {
  int N = 0;
  Geometry container = Geometry::cylinder(8.0, 8.0, 1.0);  // d is ignored, see depths
  std::vector<double> depths = {1.0};                       // NV depths sampled each stride
  double epsilon = 1.0;
  double sigma = 1.0;
  double mass = 1.0;
  double temperature = 1.0;
  double dt = 0.005;
  std::int64_t n_steps = 0;
  double cutoff = 2.5;
  WallModel wall = WallModel::specular_caps_lj_lateral;
  double friction = 1.0;            // Langevin gamma during thermalization
  double equilibration_time = 200.0;
  std::uint64_t seed = 1;
  int sample_stride = 10;
  double skin = 0.3;                // Verlet-list skin
  bool deterministic = true;        // fixed-order reductions for energies and fields

  double density() const;
  /// Throws ConfigError on out-of-range parameters.
  void validate() const;
};

struct MdState {
  std::vector<Vec3> x;
  std::vector<Vec3> v;
  std::vector<int> spin;  // I_z = +-1, fixed at initialization
  std::int64_t step = 0;
  std::uint64_t seed = 0;
};

struct FieldTrace {
  double depth = 0.0;
  double dt = 0.0;       // sample spacing
  int stride = 1;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
  std::vector<double> times;
  std::vector<double> values;
};

/// Force on the first particle of a pair separated by r (first minus
/// second), zero at and beyond the cutoff.
Vec3 lj_force(const Vec3& r, double epsilon, double sigma, double cutoff);
/// Truncated potential shifted to zero at the cutoff.
double lj_potential(double r, double epsilon, double sigma, double cutoff);
/// Separations below this fraction of sigma make the integrator unreliable.
inline constexpr double kOverlapFraction = 0.3;

/// 9/3 wall potential eps[(2/15)(sigma/h)^9 - (sigma/h)^3] and its normal
/// force (positive pushes away from the wall), h the distance to the wall.
double wall_potential(double h, double epsilon, double sigma);
double wall_force(double h, double epsilon, double sigma);
/// Distance beyond which |wall_force| < 1e-6.
double wall_cutoff(double epsilon, double sigma);

/// Mirrors a point that crossed the plane z = z0 back, negating v_z.
void reflect_plane(double z0, bool upper, Vec3& x, Vec3& v);

/// B at the NV below the container for the given depth.
double field_at(const std::vector<Vec3>& x, const std::vector<int>& spin, const Geometry& container, double depth,
                bool deterministic = true);

struct Energies {
  double kinetic;
  double potential;
  double total() const { return kinetic + potential; }
  double temperature;  // 2 K / (3 N)
};

/// Neighbor bookkeeping: linked cells over the container bounding box feed a
/// per-particle Verlet list sorted by particle index.
class ForceField {
 public:
  explicit ForceField(const MdConfig& cfg);

  /// Forces and per-particle potential energies; rebuilds the list when a
  /// particle has moved more than half the skin.
  void compute(const std::vector<Vec3>& x, std::vector<Vec3>& f, Exec exec = Exec::parallel);
  double potential_energy() const;
  int rebuilds() const { return rebuilds_; }
  std::int64_t overlap_warnings() const { return overlaps_; }

 private:
  void rebuild(const std::vector<Vec3>& x, Exec exec);

  MdConfig cfg_;
  Vec3 lo_{};
  Vec3 hi_{};
  int nc_[3] = {1, 1, 1};
  std::vector<std::vector<int>> neighbors_;
  std::vector<Vec3> x_at_build_;
  std::vector<double> pe_;
  double wall_rc_ = 0.0;
  int rebuilds_ = 0;
  std::int64_t overlaps_ = 0;
};

/// Reference O(N^2) forces in the same per-particle summation order as the
/// neighbor list, so the two agree bit for bit.
void forces_all_pairs(const MdConfig& cfg, const std::vector<Vec3>& x, std::vector<Vec3>& f);

Energies energies(const MdConfig& cfg, const MdState& s);

/// Lattice placement inside the container, Maxwell velocities, i.i.d. spins.
MdState initialize(const MdConfig& cfg);

struct Thermalization {
  MdState state;
  std::vector<double> temperature_history;  // one entry per reduced time unit
};

/// BAOAB Langevin dynamics for the equilibration time, extended (up to 5x)
/// until the trailing-window kinetic temperature is within 2% of target.
/// Throws IntegrityError with the temperature history otherwise.
Thermalization thermalize(const MdConfig& cfg, Exec exec = Exec::parallel);

struct NveRun {
  std::vector<FieldTrace> traces;  // one per depth
  std::vector<double> energy;      // total energy at every sample
  std::vector<double> temperature;
  double drift_per_1e5 = 0.0;      // |slope| * 1e5 steps / |mean E|
  std::int64_t overlap_warnings = 0;
};

/// Velocity-Verlet NVE run from a thermalized state. In specular-everywhere
/// mode an energy drift above 1e-3 relative per 1e5 steps throws
/// IntegrityError, as does any particle left outside the container.
NveRun run_nve(MdState& state, const MdConfig& cfg, Exec exec = Exec::parallel);

/// Relative energy drift: least-squares slope of E against step, scaled to
/// 1e5 steps and divided by |mean E|.
double relative_drift(const std::vector<double>& energy, double steps_between);

/// FNV-1a hash of the physically relevant configuration fields.
std::uint64_t config_hash(const MdConfig& cfg);

/// Binary trace file: magic, header (hash, seed, depth, dt, stride, count),
/// then float64 samples.
void write_trace(const std::string& path, const FieldTrace& t);
FieldTrace read_trace(const std::string& path);
void write_trace_csv(const std::string& path, const FieldTrace& t, const std::string& header_comment = "");

}  // namespace nanonmr::md
