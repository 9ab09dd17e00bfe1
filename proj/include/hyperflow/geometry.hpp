#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hyperflow/hyper.hpp"
#include "hyperflow/odeflow.hpp"
#include "hyperflow/point_cloud.hpp"
#include "hyperflow/sln.hpp"

namespace hyperflow::geometry {

using Face = std::array<std::uint32_t, 3>;

struct TriMesh {
  std::vector<Point3> vertices;
  std::vector<Face> faces;  // counter-clockwise seen from outside

  /// Throws std::invalid_argument on out-of-range or repeated indices.
  void validate() const;
  friend bool operator==(const TriMesh&, const TriMesh&) = default;
};

/// Icosahedron subdivided `subdivisions` times (0..6) and projected onto the
/// sphere of the given radius: 10 * 4^s + 2 vertices, 20 * 4^s faces.
TriMesh icosphere(int subdivisions, double radius = 1.0);

std::size_t edge_count(const TriMesh& mesh);
/// V - E + F.
long euler_characteristic(const TriMesh& mesh);
/// Every undirected edge is shared by exactly two faces.
bool is_watertight(const TriMesh& mesh);
/// Sum of signed tetrahedron volumes against the origin; negative when the
/// faces wind inward.
double signed_volume(const TriMesh& mesh);

struct TriangulationResult {
  TriMesh mesh;
  std::vector<std::string> warnings;
};

/// Vertices pushed through the flow, faces copied unchanged. A sign flip of
/// the enclosed volume is reported as a warning, not repaired.
TriangulationResult triangulate_object(const hyper::FlowParams& weights, const TriMesh& sphere,
                                       const odeflow::FlowConfig& cfg);

/// One triangulated icosphere per mass, each of radius quantile_radius(mass).
std::vector<TriangulationResult> surface_family(const hyper::FlowParams& weights,
                                                int subdivisions,
                                                const std::vector<double>& masses,
                                                const sln::SlnParams& sln,
                                                const odeflow::FlowConfig& cfg);

/// Mean distance between corresponding vertices of two meshes of equal size.
double mean_vertex_displacement(const TriMesh& a, const TriMesh& b);

PointCloud vertices_as_cloud(const TriMesh& mesh);

// ASCII OBJ: "v x y z" and "f i j k" (1-based) lines.
void write_obj(const TriMesh& mesh, const std::filesystem::path& path);
std::string to_obj(const TriMesh& mesh);
TriMesh read_obj(const std::filesystem::path& path);
TriMesh parse_obj(const std::string& text);

// ASCII XYZ: one "x y z" per line.
void write_xyz(const PointCloud& cloud, const std::filesystem::path& path);
PointCloud read_xyz(const std::filesystem::path& path);

}  // namespace hyperflow::geometry
