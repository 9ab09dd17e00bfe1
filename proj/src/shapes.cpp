#include "hyperflow/shapes.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace hyperflow::shapes {

std::string shape_name(Shape s) {
  switch (s) {
    case Shape::sphere_shell:
      return "sphere_shell";
    case Shape::torus:
      return "torus";
    case Shape::box:
      return "box";
    case Shape::two_spheres:
      return "two_spheres";
  }
  return "?";
}

Shape parse_shape(const std::string& name) {
  for (Shape s : {Shape::sphere_shell, Shape::torus, Shape::box, Shape::two_spheres}) {
    if (shape_name(s) == name) return s;
  }
  throw std::invalid_argument("unknown shape '" + name +
                              "' (expected sphere_shell, torus, box or two_spheres)");
}

Point3 box_half_extents() {
  const double n = std::sqrt(1.0 + 0.49 + 0.25);
  return {1.0 / n, 0.7 / n, 0.5 / n};
}

namespace {

Point3 unit_direction(Rng& rng) {
  while (true) {
    const Point3 g{rng.normal(), rng.normal(), rng.normal()};
    const double n = norm(g);
    if (n > 0.0) return {g[0] / n, g[1] / n, g[2] / n};
  }
}

Point3 on_torus(Rng& rng) {
  constexpr double R = kTorusMajor, r = kTorusMinor;
  // Area element (R + r cos v); accept-reject on v.
  while (true) {
    const double u = 2.0 * std::numbers::pi * rng.uniform();
    const double v = 2.0 * std::numbers::pi * rng.uniform();
    const double w = rng.uniform();
    if (w * (R + r) <= R + r * std::cos(v)) {
      return {(R + r * std::cos(v)) * std::cos(u), (R + r * std::cos(v)) * std::sin(u),
              r * std::sin(v)};
    }
  }
}

Point3 on_box(Rng& rng) {
  const Point3 h = box_half_extents();
  // Faces normal to x, y, z have areas 4 h_y h_z, 4 h_x h_z, 4 h_x h_y.
  const double ax = h[1] * h[2], ay = h[0] * h[2], az = h[0] * h[1];
  const double pick = rng.uniform() * (ax + ay + az);
  const int axis = pick < ax ? 0 : (pick < ax + ay ? 1 : 2);
  Point3 p;
  for (int k = 0; k < 3; ++k) p[k] = (2.0 * rng.uniform() - 1.0) * h[k];
  p[axis] = rng.uniform() < 0.5 ? -h[axis] : h[axis];
  return p;
}

Point3 on_two_spheres(Rng& rng) {
  const double side = rng.uniform() < 0.5 ? -1.0 : 1.0;
  const Point3 d = unit_direction(rng);
  return {side * kTwinOffset + kTwinRadius * d[0], kTwinRadius * d[1], kTwinRadius * d[2]};
}

}  // namespace

PointCloud sample_shape(Shape s, std::size_t n, double noise, Rng& rng) {
  if (!(noise >= 0.0) || !std::isfinite(noise)) {
    throw std::invalid_argument("noise_sigma must be finite and >= 0");
  }
  PointCloud cloud;
  cloud.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Point3 p;
    switch (s) {
      case Shape::sphere_shell:
        p = unit_direction(rng);
        break;
      case Shape::torus:
        p = on_torus(rng);
        break;
      case Shape::box:
        p = on_box(rng);
        break;
      case Shape::two_spheres:
        p = on_two_spheres(rng);
        break;
    }
    if (noise > 0.0) {
      for (double& c : p) c += noise * rng.normal();
    }
    cloud.points.push_back(p);
  }
  return cloud;
}

double distance_to_surface(Shape s, const Point3& p) {
  switch (s) {
    case Shape::sphere_shell:
      return std::abs(norm(p) - 1.0);
    case Shape::torus: {
      const double q = std::hypot(p[0], p[1]) - kTorusMajor;
      return std::abs(std::hypot(q, p[2]) - kTorusMinor);
    }
    case Shape::box: {
      const Point3 h = box_half_extents();
      Point3 d;
      for (int k = 0; k < 3; ++k) d[k] = std::abs(p[k]) - h[k];
      const double outside = std::hypot(std::max(d[0], 0.0), std::max(d[1], 0.0), std::max(d[2], 0.0));
      const double inside = std::min(std::max({d[0], d[1], d[2]}), 0.0);
      return std::abs(outside + inside);
    }
    case Shape::two_spheres: {
      const double a = std::hypot(p[0] - kTwinOffset, p[1], p[2]);
      const double b = std::hypot(p[0] + kTwinOffset, p[1], p[2]);
      return std::min(std::abs(a - kTwinRadius), std::abs(b - kTwinRadius));
    }
  }
  return 0.0;
}

double surface_area(Shape s) {
  constexpr double pi = std::numbers::pi;
  switch (s) {
    case Shape::sphere_shell:
      return 4.0 * pi;
    case Shape::torus:
      return 4.0 * pi * pi * kTorusMajor * kTorusMinor;
    case Shape::box: {
      const Point3 h = box_half_extents();
      return 8.0 * (h[0] * h[1] + h[1] * h[2] + h[0] * h[2]);
    }
    case Shape::two_spheres:
      return 2.0 * 4.0 * pi * kTwinRadius * kTwinRadius;
  }
  return 0.0;
}

}  // namespace hyperflow::shapes
