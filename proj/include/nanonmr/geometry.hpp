// Container shapes, the NV-centered frame and the dipolar coupling table.
//
// Container frames: the cylinder and hemisphere have their origin at the
// center of the base disk (the face nearest the NV); the sphere is centered at
// the origin. The NV always sits on the z axis below the container, at
// z = -d (cylinder, hemisphere) or z = -(R + d) (sphere).

#pragma once

#include <array>
#include <string>
#include <variant>

namespace nanonmr {

using Vec3 = std::array<double, 3>;

struct Cylinder {
  double R;
  double L;
};
struct Hemisphere {
  double R;
};
struct Sphere {
  double R;
};

using Shape = std::variant<Cylinder, Hemisphere, Sphere>;

enum class ShapeKind { cylinder, hemisphere, sphere };

struct Geometry {
  Shape shape;
  double d;  // NV depth below the nearest container surface

  static Geometry cylinder(double R, double L, double d);
  static Geometry hemisphere(double R, double d);
  static Geometry sphere(double R, double d);

  ShapeKind kind() const;
  std::string name() const;
  double radius() const;
  double height() const;  // L for the cylinder, R for the hemisphere, 2R for the sphere
  double volume() const;
  double tau_D(double D) const { return d * d / D; }
  double tau_V(double D) const;
  /// z coordinate of the NV in the container frame.
  double nv_z() const;
  bool contains(const Vec3& p, double tol = 1e-12) const;
  void validate() const;
};

struct PhysicalParams {
  double D = 0.5;        // nm^2/us
  double J = 1.0;        // dipolar coupling, reduced units
  double gamma_e = 1.0;  // rad/(us field-unit)
  double p = 0.0;        // polarization fraction
  void validate() const;
};

struct Spherical {
  double r;
  double theta;
  double phi;
};

/// Spherical coordinates of a container point relative to the NV.
Spherical nv_frame(const Geometry& g, const Vec3& container_point);
/// Inverse of nv_frame.
Vec3 container_frame(const Geometry& g, const Spherical& s);

/// Specular boundary handling for a move from an interior point `from` to
/// `to`: the part of the segment beyond the first wall crossing is mirrored
/// across the tangent plane at the crossing, repeatedly, until `to` is
/// inside. The optional velocity is mirrored with it. Returns the number of
/// reflections; throws IntegrityError if the point cannot be brought back.
int specular_reflect(const Geometry& g, Vec3 from, Vec3& to, Vec3* velocity = nullptr);

struct HarmonicCoefficients {
  int m;
  double zeta;        // in units of J
  double zeta_tilde;  // in units of J
};

HarmonicCoefficients harmonic_coefficients(int m);

/// theta part of Y_2^m, sign dropped for m != 0 (|Y_2^m| in the NV frame).
double y2_theta(int m, double cos_theta);

/// Same, from cos and sin separately (exact near the axis).
double y2_theta(int m, double cos_theta, double sin_theta);

/// The real coupling kernel zeta~_m |Y_2^m| / r^3 in units of J, at NV-frame
/// cylindrical coordinates (rho, z).
double coupling_kernel(int m, double rho, double z);

}  // namespace nanonmr
