#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "hyperflow/tensor.hpp"

namespace hyperflow {

using Point3 = std::array<double, 3>;

/// Unordered set of 3D points.
struct PointCloud {
  std::vector<Point3> points;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool all_finite() const;

  /// [N, 3] row-major.
  Tensor to_tensor() const;
  static PointCloud from_tensor(const Tensor& t);

  friend bool operator==(const PointCloud&, const PointCloud&) = default;
};

double norm(const Point3& p);
double squared_distance(const Point3& a, const Point3& b);

}  // namespace hyperflow
