#pragma once

#include <string>
#include <vector>

#include "hyperflow/point_cloud.hpp"
#include "hyperflow/rng.hpp"

// Analytic surfaces used as a synthetic dataset. Every noise-free shape fits
// the unit ball (largest point norm 1) and so lies inside [-1, 1]^3.
//
//   sphere_shell  radius 1
//   torus         axis z, R = 0.7, r = 0.3
//   box           half-extents proportional to (1, 0.7, 0.5), corners at norm 1
//   two_spheres   radius 0.4 centred at (+-0.6, 0, 0)
namespace hyperflow::shapes {

enum class Shape { sphere_shell, torus, box, two_spheres };

std::string shape_name(Shape s);
/// Throws std::invalid_argument for an unknown name.
Shape parse_shape(const std::string& name);

inline constexpr double kTorusMajor = 0.7;
inline constexpr double kTorusMinor = 0.3;
inline constexpr double kTwinRadius = 0.4;
inline constexpr double kTwinOffset = 0.6;

/// Half-extents of the box shape.
Point3 box_half_extents();

/// n points uniform on the surface plus isotropic N(0, noise^2) offsets.
PointCloud sample_shape(Shape s, std::size_t n, double noise, Rng& rng);

/// Unsigned distance from p to the analytic surface.
double distance_to_surface(Shape s, const Point3& p);

double surface_area(Shape s);

}  // namespace hyperflow::shapes
