#include "hyperflow/point_cloud.hpp"

#include <cmath>
#include <stdexcept>

namespace hyperflow {

bool PointCloud::all_finite() const {
  for (const Point3& p : points) {
    for (double v : p) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

Tensor PointCloud::to_tensor() const {
  Tensor t = Tensor::zeros(points.size(), 3);
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t c = 0; c < 3; ++c) t.at(i, c) = points[i][c];
  }
  return t;
}

PointCloud PointCloud::from_tensor(const Tensor& t) {
  if (t.size() != 0 && t.cols() != 3) {
    throw std::invalid_argument("point cloud tensor must have 3 columns, got " +
                                shape_string(t.shape()));
  }
  PointCloud cloud;
  const std::size_t n = t.size() / 3;
  cloud.points.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < 3; ++c) cloud.points[i][c] = t[i * 3 + c];
  }
  return cloud;
}

double norm(const Point3& p) {
  return std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
}

double squared_distance(const Point3& a, const Point3& b) {
  const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
  return dx * dx + dy * dy + dz * dz;
}

}  // namespace hyperflow
