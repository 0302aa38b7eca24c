#include "nanonmr/md.hpp"

#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "nanonmr/errors.hpp"
#include "nanonmr/rng.hpp"

namespace nanonmr::md {

namespace {

// Substream tags keep the per-particle random streams disjoint.
constexpr std::uint64_t kVelocityTag = 1ULL << 56;
constexpr std::uint64_t kSpinTag = 2ULL << 56;
constexpr std::uint64_t kNoiseTag = 3ULL << 56;
constexpr std::uint64_t kLatticeTag = 4ULL << 56;

Vec3 sub(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
double norm2(const Vec3& a) { return a[0] * a[0] + a[1] * a[1] + a[2] * a[2]; }

bool is_cylinder(const Geometry& g) { return g.kind() == ShapeKind::cylinder; }

// Distance from p to the walls that carry a 9/3 potential, with the inward
// unit normal, for every such wall; calls fn(h, normal).
template <class Fn>
void for_each_lj_wall(const MdConfig& cfg, const Vec3& p, Fn&& fn) {
  const Geometry& g = cfg.container;
  if (cfg.wall == WallModel::specular_everywhere) return;
  const double R = g.radius();
  if (is_cylinder(g)) {
    const double rho = std::hypot(p[0], p[1]);
    if (rho > 1e-12) fn(R - rho, Vec3{-p[0] / rho, -p[1] / rho, 0.0});
    if (cfg.wall == WallModel::lj_everywhere) {
      fn(p[2], Vec3{0.0, 0.0, 1.0});
      fn(g.height() - p[2], Vec3{0.0, 0.0, -1.0});
    }
  } else {
    const double r = std::sqrt(norm2(p));
    if (r > 1e-12) fn(R - r, Vec3{-p[0] / r, -p[1] / r, -p[2] / r});
  }
}

// Moves x by v*h and applies the specular part of the wall model.
void advance(const MdConfig& cfg, Vec3& x, Vec3& v, double h) {
  const Vec3 from = x;
  for (int k = 0; k < 3; ++k) x[k] += v[k] * h;
  switch (cfg.wall) {
    case WallModel::specular_caps_lj_lateral:
      if (x[2] < 0.0) reflect_plane(0.0, false, x, v);
      if (x[2] > cfg.container.height()) reflect_plane(cfg.container.height(), true, x, v);
      break;
    case WallModel::specular_everywhere:
      if (!cfg.container.contains(x, 0.0)) specular_reflect(cfg.container, from, x, &v);
      break;
    case WallModel::lj_everywhere: break;
  }
}

// Specular surfaces of the wall model, as level sets that are positive
// outside.
enum class Surface { bottom, top, lateral, sphere };

std::vector<Surface> specular_surfaces(const MdConfig& cfg) {
  switch (cfg.wall) {
    case WallModel::specular_caps_lj_lateral: return {Surface::bottom, Surface::top};
    case WallModel::specular_everywhere:
      if (is_cylinder(cfg.container)) return {Surface::bottom, Surface::top, Surface::lateral};
      return {Surface::sphere};
    case WallModel::lj_everywhere: return {};
  }
  return {};
}

double level(const MdConfig& cfg, Surface s, const Vec3& p) {
  switch (s) {
    case Surface::bottom: return -p[2];
    case Surface::top: return p[2] - cfg.container.height();
    case Surface::lateral: return std::hypot(p[0], p[1]) - cfg.container.radius();
    case Surface::sphere: return std::sqrt(norm2(p)) - cfg.container.radius();
  }
  return 0.0;
}

// Puts p on the surface and returns the outward normal there.
Vec3 land(const MdConfig& cfg, Surface s, Vec3& p) {
  const double R = cfg.container.radius();
  switch (s) {
    case Surface::bottom: p[2] = 0.0; return {0.0, 0.0, -1.0};
    case Surface::top: p[2] = cfg.container.height(); return {0.0, 0.0, 1.0};
    case Surface::lateral: {
      const double rho = std::hypot(p[0], p[1]);
      p[0] *= R / rho;
      p[1] *= R / rho;
      return {p[0] / R, p[1] / R, 0.0};
    }
    case Surface::sphere: {
      const double r = std::sqrt(norm2(p));
      for (double& c : p) c *= R / r;
      return {p[0] / R, p[1] / R, p[2] / R};
    }
  }
  return {0.0, 0.0, 0.0};
}

// Outward normal of the specular surface nearest to an interior point.
Vec3 nearest_normal(const MdConfig& cfg, const std::vector<Surface>& surfaces, const Vec3& p) {
  Surface best = surfaces.front();
  for (Surface s : surfaces) {
    if (level(cfg, s, p) > level(cfg, best, p)) best = s;
  }
  Vec3 q = p;
  return land(cfg, best, q);
}

bool inside_with_margin(const Geometry& g, const Vec3& p, double m) {
  const double R = g.radius();
  if (is_cylinder(g)) {
    return std::hypot(p[0], p[1]) <= R - m && p[2] >= m && p[2] <= g.height() - m;
  }
  return std::sqrt(norm2(p)) <= R - m;
}

double lj_shift(double epsilon, double sigma, double cutoff) {
  const double s6 = std::pow(sigma / cutoff, 6);
  return 4.0 * epsilon * (s6 * s6 - s6);
}

}  // namespace

std::string wall_model_name(WallModel w) {
  switch (w) {
    case WallModel::specular_caps_lj_lateral: return "specular-caps";
    case WallModel::lj_everywhere: return "lj-everywhere";
    case WallModel::specular_everywhere: return "specular-everywhere";
  }
  return "?";
}

WallModel parse_wall_model(const std::string& s) {
  if (s == "specular-caps") return WallModel::specular_caps_lj_lateral;
  if (s == "lj-everywhere") return WallModel::lj_everywhere;
  if (s == "specular-everywhere") return WallModel::specular_everywhere;
  throw ConfigError("unknown wall model '" + s + "'");
}

double MdConfig::density() const { return N / container.volume(); }

void MdConfig::validate() const {
  if (container.kind() == ShapeKind::hemisphere) throw ConfigError("md: only cylinder and sphere containers");
  if (N <= 0) throw ConfigError("md: N must be positive");
  const double rho = density() * sigma * sigma * sigma;
  if (!(rho > 0.0 && rho < 1.2)) throw ConfigError("md: density must lie in (0, 1.2) sigma^-3");
  if (!(dt > 0.0 && dt <= 0.01)) throw ConfigError("md: dt must lie in (0, 0.01]");
  const double min_dim = std::min(2.0 * container.radius(), container.height());
  if (!(cutoff > 0.0 && cutoff <= min_dim / 2.0)) throw ConfigError("md: cutoff exceeds half the container size");
  if (!(temperature > 0.0 && mass > 0.0 && epsilon > 0.0 && sigma > 0.0)) {
    throw ConfigError("md: temperature, mass, epsilon and sigma must be positive");
  }
  if (n_steps < 0 || sample_stride < 1) throw ConfigError("md: bad step count or sample stride");
  if (depths.empty()) throw ConfigError("md: no NV depths");
  for (double d : depths) {
    if (!(d > 0.0)) throw ConfigError("md: NV depths must be positive");
  }
  if (wall == WallModel::specular_caps_lj_lateral && !is_cylinder(container)) {
    throw ConfigError("md: specular caps need a cylinder");
  }
  if (!(friction > 0.0 && equilibration_time >= 0.0 && skin > 0.0)) throw ConfigError("md: bad thermostat settings");
}

Vec3 lj_force(const Vec3& r, double epsilon, double sigma, double cutoff) {
  const double r2 = norm2(r);
  if (r2 >= cutoff * cutoff) return {0.0, 0.0, 0.0};
  const double sr2 = sigma * sigma / r2;
  const double sr6 = sr2 * sr2 * sr2;
  const double f = 24.0 * epsilon * sr6 * (2.0 * sr6 - 1.0) / r2;
  return {f * r[0], f * r[1], f * r[2]};
}

double lj_potential(double r, double epsilon, double sigma, double cutoff) {
  if (r >= cutoff) return 0.0;
  const double s6 = std::pow(sigma / r, 6);
  return 4.0 * epsilon * (s6 * s6 - s6) - lj_shift(epsilon, sigma, cutoff);
}

double wall_potential(double h, double epsilon, double sigma) {
  const double s3 = std::pow(sigma / h, 3);
  return epsilon * ((2.0 / 15.0) * s3 * s3 * s3 - s3);
}

double wall_force(double h, double epsilon, double sigma) {
  const double s = sigma / h;
  const double s3 = s * s * s;
  return epsilon * ((18.0 / 15.0) * s3 * s3 * s3 - 3.0 * s3) / h;
}

double wall_cutoff(double epsilon, double sigma) {
  // |F| falls monotonically beyond the attraction maximum at (4/5)^(1/6) sigma.
  const double lo = std::pow(0.8, 1.0 / 6.0) * sigma;
  auto f = [&](double h) { return std::abs(wall_force(h, epsilon, sigma)) - 1e-6; };
  double hi = 2.0 * lo;
  while (f(hi) > 0.0) hi *= 2.0;
  boost::math::tools::eps_tolerance<double> tol(50);
  const auto [a, b] = boost::math::tools::bisect(f, lo, hi, tol);
  return 0.5 * (a + b);
}

void reflect_plane(double z0, bool upper, Vec3& x, Vec3& v) {
  if ((upper && x[2] > z0) || (!upper && x[2] < z0)) {
    x[2] = 2.0 * z0 - x[2];
    v[2] = -v[2];
  }
}

double field_at(const std::vector<Vec3>& x, const std::vector<int>& spin, const Geometry& container, double depth,
                bool deterministic) {
  Geometry g = container;
  g.d = depth;
  const double z0 = g.nv_z();
  const auto n = static_cast<std::ptrdiff_t>(x.size());
  auto term = [&](std::ptrdiff_t i) {
    const double dz = x[i][2] - z0;
    const double r2 = x[i][0] * x[i][0] + x[i][1] * x[i][1] + dz * dz;
    const double r = std::sqrt(r2);
    return spin[i] * (3.0 * dz * dz / r2 - 1.0) / (r2 * r);
  };
  if (deterministic) {
    std::vector<double> c(x.size());
    for (std::ptrdiff_t i = 0; i < n; ++i) c[i] = term(i);
    return pairwise_sum(c);
  }
  double s = 0.0;
#pragma omp parallel for reduction(+ : s)
  for (std::ptrdiff_t i = 0; i < n; ++i) s += term(i);
  return s;
}

ForceField::ForceField(const MdConfig& cfg) : cfg_(cfg) {
  const Geometry& g = cfg.container;
  const double R = g.radius();
  if (is_cylinder(g)) {
    lo_ = {-R, -R, 0.0};
    hi_ = {R, R, g.height()};
  } else {
    lo_ = {-R, -R, -R};
    hi_ = {R, R, R};
  }
  wall_rc_ = wall_cutoff(cfg.epsilon, cfg.sigma);
  // Half-width cells with a two-cell reach scan about a third of the volume
  // that full-width cells would.
  const double edge = 0.5 * (cfg.cutoff + cfg.skin);
  for (int k = 0; k < 3; ++k) nc_[k] = std::max(1, static_cast<int>((hi_[k] - lo_[k]) / edge));
}

void ForceField::rebuild(const std::vector<Vec3>& x, Exec exec) {
  const int n = static_cast<int>(x.size());
  const int ncell = nc_[0] * nc_[1] * nc_[2];
  auto cell_coord = [&](const Vec3& p, int k) {
    const int c = static_cast<int>((p[k] - lo_[k]) / (hi_[k] - lo_[k]) * nc_[k]);
    return std::clamp(c, 0, nc_[k] - 1);
  };
  std::vector<int> head(ncell, -1);
  std::vector<int> next(n, -1);
  // Insert in reverse so each cell lists particles in ascending order.
  for (int i = n - 1; i >= 0; --i) {
    const int c = (cell_coord(x[i], 2) * nc_[1] + cell_coord(x[i], 1)) * nc_[0] + cell_coord(x[i], 0);
    next[i] = head[c];
    head[c] = i;
  }
  const double rl2 = (cfg_.cutoff + cfg_.skin) * (cfg_.cutoff + cfg_.skin);
  neighbors_.resize(n);
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
  for (int i = 0; i < n; ++i) {
    auto& list = neighbors_[i];
    list.clear();
    const int cx = cell_coord(x[i], 0), cy = cell_coord(x[i], 1), cz = cell_coord(x[i], 2);
    for (int dz = -2; dz <= 2; ++dz) {
      for (int dy = -2; dy <= 2; ++dy) {
        for (int dx = -2; dx <= 2; ++dx) {
          const int ax = cx + dx, ay = cy + dy, az = cz + dz;
          if (ax < 0 || ay < 0 || az < 0 || ax >= nc_[0] || ay >= nc_[1] || az >= nc_[2]) continue;
          for (int j = head[(az * nc_[1] + ay) * nc_[0] + ax]; j >= 0; j = next[j]) {
            if (j != i && norm2(sub(x[i], x[j])) < rl2) list.push_back(j);
          }
        }
      }
    }
    std::sort(list.begin(), list.end());
  }
  x_at_build_ = x;
  ++rebuilds_;
}

void ForceField::compute(const std::vector<Vec3>& x, std::vector<Vec3>& f, Exec exec) {
  const int n = static_cast<int>(x.size());
  bool stale = x_at_build_.size() != x.size();
  if (!stale) {
    const double lim = 0.25 * cfg_.skin * cfg_.skin;
    for (int i = 0; i < n && !stale; ++i) stale = norm2(sub(x[i], x_at_build_[i])) > lim;
  }
  if (stale) rebuild(x, exec);
  f.assign(n, Vec3{0.0, 0.0, 0.0});
  pe_.assign(n, 0.0);
  const double rc2 = cfg_.cutoff * cfg_.cutoff;
  const double shift = lj_shift(cfg_.epsilon, cfg_.sigma, cfg_.cutoff);
  const double s2 = cfg_.sigma * cfg_.sigma;
  const double overlap2 = kOverlapFraction * kOverlapFraction * s2;
  const double wall_rc = wall_rc_;
  std::int64_t overlaps = 0;
  bool escaped = false;
#pragma omp parallel for schedule(static) if (exec == Exec::parallel) reduction(+ : overlaps) reduction(|| : escaped)
  for (int i = 0; i < n; ++i) {
    Vec3 fi{0.0, 0.0, 0.0};
    double u = 0.0;
    for (int j : neighbors_[i]) {
      const Vec3 r = sub(x[i], x[j]);
      const double r2 = norm2(r);
      if (r2 >= rc2) continue;
      if (r2 < overlap2) ++overlaps;
      const double sr2 = s2 / r2;
      const double sr6 = sr2 * sr2 * sr2;
      const double ff = 24.0 * cfg_.epsilon * sr6 * (2.0 * sr6 - 1.0) / r2;
      fi[0] += ff * r[0];
      fi[1] += ff * r[1];
      fi[2] += ff * r[2];
      u += 0.5 * (4.0 * cfg_.epsilon * (sr6 * sr6 - sr6) - shift);
    }
    for_each_lj_wall(cfg_, x[i], [&](double h, const Vec3& nrm) {
      if (h <= 0.0) {
        escaped = true;
        return;
      }
      if (h >= wall_rc) return;
      const double fw = wall_force(h, cfg_.epsilon, cfg_.sigma);
      for (int k = 0; k < 3; ++k) fi[k] += fw * nrm[k];
      u += wall_potential(h, cfg_.epsilon, cfg_.sigma);
    });
    f[i] = fi;
    pe_[i] = u;
  }
  if (escaped) throw IntegrityError("md: particle crossed a 9/3 wall");
  overlaps_ += overlaps;
}

double ForceField::potential_energy() const { return pairwise_sum(pe_); }

void forces_all_pairs(const MdConfig& cfg, const std::vector<Vec3>& x, std::vector<Vec3>& f) {
  const int n = static_cast<int>(x.size());
  f.assign(n, Vec3{0.0, 0.0, 0.0});
  const double rc2 = cfg.cutoff * cfg.cutoff;
  const double s2 = cfg.sigma * cfg.sigma;
  const double wall_rc = wall_cutoff(cfg.epsilon, cfg.sigma);
  for (int i = 0; i < n; ++i) {
    Vec3 fi{0.0, 0.0, 0.0};
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      const Vec3 r = sub(x[i], x[j]);
      const double r2 = norm2(r);
      if (r2 >= rc2) continue;
      const double sr2 = s2 / r2;
      const double sr6 = sr2 * sr2 * sr2;
      const double ff = 24.0 * cfg.epsilon * sr6 * (2.0 * sr6 - 1.0) / r2;
      fi[0] += ff * r[0];
      fi[1] += ff * r[1];
      fi[2] += ff * r[2];
    }
    for_each_lj_wall(cfg, x[i], [&](double h, const Vec3& nrm) {
      if (h <= 0.0 || h >= wall_rc) return;
      const double fw = wall_force(h, cfg.epsilon, cfg.sigma);
      for (int k = 0; k < 3; ++k) fi[k] += fw * nrm[k];
    });
    f[i] = fi;
  }
}

namespace {

double kinetic_energy(const MdConfig& cfg, const std::vector<Vec3>& v) {
  std::vector<double> k(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) k[i] = 0.5 * cfg.mass * norm2(v[i]);
  return pairwise_sum(k);
}

double kinetic_temperature(const MdConfig& cfg, const std::vector<Vec3>& v) {
  return 2.0 * kinetic_energy(cfg, v) / (3.0 * static_cast<double>(v.size()));
}

void check_contained(const MdConfig& cfg, const std::vector<Vec3>& x, std::int64_t step) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!cfg.container.contains(x[i], 1e-9)) {
      throw IntegrityError("md: particle " + std::to_string(i) + " outside the container at step " +
                           std::to_string(step));
    }
  }
}

}  // namespace

Energies energies(const MdConfig& cfg, const MdState& s) {
  ForceField ff(cfg);
  std::vector<Vec3> f;
  ff.compute(s.x, f, Exec::serial);
  const double k = kinetic_energy(cfg, s.v);
  return {k, ff.potential_energy(), 2.0 * k / (3.0 * static_cast<double>(s.x.size()))};
}

MdState initialize(const MdConfig& cfg) {
  cfg.validate();
  const Geometry& g = cfg.container;
  const double margin = (cfg.wall == WallModel::specular_everywhere ? 0.5 : 0.85) * cfg.sigma;
  const double R = g.radius();
  const Vec3 lo = is_cylinder(g) ? Vec3{-R, -R, 0.0} : Vec3{-R, -R, -R};
  const Vec3 hi = is_cylinder(g) ? Vec3{R, R, g.height()} : Vec3{R, R, R};
  // FCC cube edge for the requested density, shrunk until enough sites fit.
  double a = std::cbrt(4.0 / cfg.density());
  std::vector<Vec3> sites;
  static constexpr double basis[4][3] = {{0, 0, 0}, {0.5, 0.5, 0}, {0.5, 0, 0.5}, {0, 0.5, 0.5}};
  for (int attempt = 0; attempt < 200; ++attempt) {
    sites.clear();
    const int nx = static_cast<int>((hi[0] - lo[0]) / a) + 1;
    const int ny = static_cast<int>((hi[1] - lo[1]) / a) + 1;
    const int nz = static_cast<int>((hi[2] - lo[2]) / a) + 1;
    for (int k = 0; k < nz; ++k) {
      for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
          for (const auto& b : basis) {
            const Vec3 p{lo[0] + (i + b[0] + 0.25) * a, lo[1] + (j + b[1] + 0.25) * a, lo[2] + (k + b[2] + 0.25) * a};
            if (inside_with_margin(g, p, margin)) sites.push_back(p);
          }
        }
      }
    }
    if (static_cast<int>(sites.size()) >= cfg.N) break;
    a *= 0.99;
  }
  if (static_cast<int>(sites.size()) < cfg.N) throw ConfigError("md: cannot place N particles in the container");
  CounterRng pick(cfg.seed, 0, kLatticeTag);
  std::shuffle(sites.begin(), sites.end(), pick);
  sites.resize(cfg.N);
  std::sort(sites.begin(), sites.end(), [](const Vec3& p, const Vec3& q) { return p[2] < q[2]; });

  MdState s;
  s.seed = cfg.seed;
  s.x = std::move(sites);
  s.v.resize(cfg.N);
  s.spin.resize(cfg.N);
  const double sd = std::sqrt(cfg.temperature / cfg.mass);
  for (int i = 0; i < cfg.N; ++i) {
    CounterRng vr(cfg.seed, static_cast<std::uint64_t>(i), kVelocityTag);
    for (int k = 0; k < 3; ++k) s.v[i][k] = sd * vr.normal();
    CounterRng sr(cfg.seed, static_cast<std::uint64_t>(i), kSpinTag);
    s.spin[i] = sr.uniform() < 0.5 ? -1 : 1;
  }
  return s;
}

Thermalization thermalize(const MdConfig& cfg, Exec exec) {
  Thermalization out{initialize(cfg), {}};
  MdState& s = out.state;
  const int n = cfg.N;
  const double dt = cfg.dt;
  const double c1 = std::exp(-cfg.friction * dt);
  const double c2 = std::sqrt((1.0 - c1 * c1) * cfg.temperature / cfg.mass);
  const auto steps_per_unit = std::max<std::int64_t>(1, std::llround(1.0 / dt));
  const auto base_units = static_cast<std::int64_t>(std::ceil(cfg.equilibration_time));
  const std::int64_t window = std::max<std::int64_t>(5, base_units / 10);
  ForceField ff(cfg);
  std::vector<Vec3> f;
  ff.compute(s.x, f, exec);
  double t_acc = 0.0;
  for (std::int64_t unit = 0; unit < 5 * std::max<std::int64_t>(base_units, window); ++unit) {
    t_acc = 0.0;
    for (std::int64_t k = 0; k < steps_per_unit; ++k) {
      const std::uint64_t step = static_cast<std::uint64_t>(s.step);
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
      for (int i = 0; i < n; ++i) {
        Vec3& x = s.x[i];
        Vec3& v = s.v[i];
        for (int c = 0; c < 3; ++c) v[c] += 0.5 * dt * f[i][c] / cfg.mass;
        advance(cfg, x, v, 0.5 * dt);
        CounterRng rng(cfg.seed, static_cast<std::uint64_t>(i), kNoiseTag | step);
        for (int c = 0; c < 3; ++c) v[c] = c1 * v[c] + c2 * rng.normal();
        advance(cfg, x, v, 0.5 * dt);
      }
      ff.compute(s.x, f, exec);
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
      for (int i = 0; i < n; ++i) {
        for (int c = 0; c < 3; ++c) s.v[i][c] += 0.5 * dt * f[i][c] / cfg.mass;
      }
      ++s.step;
      t_acc += kinetic_temperature(cfg, s.v);
    }
    out.temperature_history.push_back(t_acc / static_cast<double>(steps_per_unit));
    const auto done = static_cast<std::int64_t>(out.temperature_history.size());
    if (done >= base_units && done >= window) {
      const double mean =
          std::accumulate(out.temperature_history.end() - window, out.temperature_history.end(), 0.0) /
          static_cast<double>(window);
      if (std::abs(mean - cfg.temperature) <= 0.02 * cfg.temperature) {
        check_contained(cfg, s.x, s.step);
        s.step = 0;
        return out;
      }
    }
  }
  std::ostringstream msg;
  msg << "md: kinetic temperature did not settle within 2% of " << cfg.temperature << "; history:";
  for (double t : out.temperature_history) msg << ' ' << t;
  throw IntegrityError(msg.str());
}

NveRun run_nve(MdState& s, const MdConfig& cfg, Exec exec) {
  cfg.validate();
  const int n = cfg.N;
  if (static_cast<int>(s.x.size()) != n) throw ConfigError("md: state does not match N");
  const double dt = cfg.dt;
  ForceField ff(cfg);
  std::vector<Vec3> f;
  ff.compute(s.x, f, exec);
  const auto surfaces = specular_surfaces(cfg);
  std::vector<char> bounced(n, 0);
  std::vector<Vec3> normal(n), f_old(n);
  std::vector<double> shift(n, 0.0);
  NveRun run;
  const std::uint64_t hash = config_hash(cfg);
  for (double d : cfg.depths) {
    FieldTrace t;
    t.depth = d;
    t.dt = dt * cfg.sample_stride;
    t.stride = cfg.sample_stride;
    t.seed = cfg.seed;
    t.config_hash = hash;
    run.traces.push_back(std::move(t));
  }
  const std::int64_t samples = cfg.n_steps / cfg.sample_stride;
  for (auto& t : run.traces) {
    t.times.reserve(samples);
    t.values.reserve(samples);
  }
  for (std::int64_t step = 1; step <= cfg.n_steps; ++step) {
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
    for (int i = 0; i < n; ++i) {
      for (int c = 0; c < 3; ++c) s.v[i][c] += 0.5 * dt * f[i][c] / cfg.mass;
      const Vec3 free_end{s.x[i][0] + s.v[i][0] * dt, s.x[i][1] + s.v[i][1] * dt, s.x[i][2] + s.v[i][2] * dt};
      const Vec3 start = s.x[i];
      advance(cfg, s.x[i], s.v[i], dt);
      bounced[i] = 0;
      if (!surfaces.empty() && s.x[i] != free_end) {
        bounced[i] = 1;
        normal[i] = nearest_normal(cfg, surfaces, s.x[i]);
        const Vec3 dx = sub(s.x[i], start);
        shift[i] = dx[0] * normal[i][0] + dx[1] * normal[i][1] + dx[2] * normal[i][2];
        f_old[i] = f[i];
      }
    }
    ff.compute(s.x, f, exec);
#pragma omp parallel for schedule(static) if (exec == Exec::parallel)
    for (int i = 0; i < n; ++i) {
      for (int c = 0; c < 3; ++c) s.v[i][c] += 0.5 * dt * f[i][c] / cfg.mass;
      if (!bounced[i]) continue;
      // The mirrored end point moved the particle by `shift` along the wall
      // normal without the matching work; charge that work (trapezoid of
      // the old and new normal forces) to the normal velocity.
      const Vec3& nrm = normal[i];
      const double fn = 0.5 * ((f_old[i][0] + f[i][0]) * nrm[0] + (f_old[i][1] + f[i][1]) * nrm[1] +
                               (f_old[i][2] + f[i][2]) * nrm[2]);
      const double vn = s.v[i][0] * nrm[0] + s.v[i][1] * nrm[1] + s.v[i][2] * nrm[2];
      const double vn2 = std::max(0.0, vn * vn + 2.0 * fn * shift[i] / cfg.mass);
      const double dv = std::copysign(std::sqrt(vn2), vn) - vn;
      for (int c = 0; c < 3; ++c) s.v[i][c] += dv * nrm[c];
    }
    ++s.step;
    if (step % cfg.sample_stride == 0) {
      check_contained(cfg, s.x, s.step);
      const double t = static_cast<double>(step) * dt;
      for (auto& tr : run.traces) {
        tr.times.push_back(t);
        tr.values.push_back(field_at(s.x, s.spin, cfg.container, tr.depth, cfg.deterministic));
      }
      const double k = kinetic_energy(cfg, s.v);
      run.energy.push_back(k + ff.potential_energy());
      run.temperature.push_back(2.0 * k / (3.0 * n));
    }
  }
  run.overlap_warnings = ff.overlap_warnings();
  if (run.energy.size() >= 2) run.drift_per_1e5 = relative_drift(run.energy, cfg.sample_stride);
  if (cfg.wall == WallModel::specular_everywhere && run.drift_per_1e5 > 1e-3) {
    std::ostringstream msg;
    msg << "md: energy drift " << run.drift_per_1e5 << " per 1e5 steps exceeds 1e-3";
    throw IntegrityError(msg.str());
  }
  return run;
}

double relative_drift(const std::vector<double>& energy, double steps_between) {
  const auto n = static_cast<double>(energy.size());
  if (n < 2) return 0.0;
  const double mx = (n - 1.0) / 2.0;
  const double my = pairwise_sum(energy) / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < energy.size(); ++i) {
    const double dx = static_cast<double>(i) - mx;
    sxx += dx * dx;
    sxy += dx * (energy[i] - my);
  }
  const double slope_per_step = sxy / sxx / steps_between;
  return std::abs(slope_per_step) * 1e5 / std::abs(my);
}

std::uint64_t config_hash(const MdConfig& cfg) {
  std::ostringstream s;
  s << std::setprecision(17) << cfg.container.name() << ' ' << cfg.container.radius() << ' '
    << cfg.container.height() << ' ' << cfg.N << ' ' << cfg.epsilon << ' ' << cfg.sigma << ' ' << cfg.mass << ' '
    << cfg.temperature << ' ' << cfg.dt << ' ' << cfg.n_steps << ' ' << cfg.cutoff << ' '
    << wall_model_name(cfg.wall) << ' ' << cfg.friction << ' ' << cfg.equilibration_time << ' '
    << cfg.sample_stride << ' ' << cfg.skin;
  for (double d : cfg.depths) s << ' ' << d;
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s.str()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {
constexpr char kMagic[8] = {'N', 'N', 'M', 'R', 'T', 'R', 'C', '1'};

template <class T>
void put(std::ostream& o, const T& v) {
  o.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <class T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}
}  // namespace

void write_trace(const std::string& path, const FieldTrace& t) {
  std::ofstream o(path, std::ios::binary);
  if (!o) throw ConfigError("cannot write " + path);
  o.write(kMagic, sizeof kMagic);
  put(o, t.config_hash);
  put(o, t.seed);
  put(o, t.depth);
  put(o, t.dt);
  put(o, static_cast<std::int64_t>(t.stride));
  put(o, static_cast<std::int64_t>(t.values.size()));
  o.write(reinterpret_cast<const char*>(t.values.data()), static_cast<std::streamsize>(t.values.size() * 8));
  if (!o) throw ConfigError("write failed for " + path);
}

FieldTrace read_trace(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path);
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw ConfigError(path + " is not a field trace");
  FieldTrace t;
  t.config_hash = get<std::uint64_t>(in);
  t.seed = get<std::uint64_t>(in);
  t.depth = get<double>(in);
  t.dt = get<double>(in);
  t.stride = static_cast<int>(get<std::int64_t>(in));
  const auto count = get<std::int64_t>(in);
  if (!in || count < 0) throw ConfigError(path + ": truncated header");
  t.values.resize(static_cast<std::size_t>(count));
  in.read(reinterpret_cast<char*>(t.values.data()), static_cast<std::streamsize>(count * 8));
  if (!in) throw ConfigError(path + ": truncated payload");
  t.times.resize(t.values.size());
  for (std::size_t k = 0; k < t.times.size(); ++k) t.times[k] = static_cast<double>(k + 1) * t.dt;
  return t;
}

void write_trace_csv(const std::string& path, const FieldTrace& t, const std::string& header_comment) {
  std::ofstream o(path);
  if (!o) throw ConfigError("cannot write " + path);
  if (!header_comment.empty()) o << header_comment;
  o << "time,B\n" << std::setprecision(17);
  for (std::size_t k = 0; k < t.values.size(); ++k) o << t.times[k] << ',' << t.values[k] << '\n';
}

}  // namespace nanonmr::md
