#include "hyperflow/geometry.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <utility>

namespace hyperflow::geometry {

void TriMesh::validate() const {
  const std::size_t n = vertices.size();
  for (std::size_t f = 0; f < faces.size(); ++f) {
    const Face& t = faces[f];
    if (t[0] >= n || t[1] >= n || t[2] >= n) {
      throw std::invalid_argument("face " + std::to_string(f) + " indexes past the vertex list");
    }
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) {
      throw std::invalid_argument("face " + std::to_string(f) + " is degenerate");
    }
  }
}

namespace {

Point3 scaled_to(const Point3& p, double radius) {
  const double n = norm(p);
  return {radius * p[0] / n, radius * p[1] / n, radius * p[2] / n};
}

std::pair<std::uint32_t, std::uint32_t> edge_key(std::uint32_t a, std::uint32_t b) {
  return a < b ? std::make_pair(a, b) : std::make_pair(b, a);
}

std::map<std::pair<std::uint32_t, std::uint32_t>, int> edge_uses(const TriMesh& mesh) {
  std::map<std::pair<std::uint32_t, std::uint32_t>, int> uses;
  for (const Face& f : mesh.faces) {
    for (int k = 0; k < 3; ++k) ++uses[edge_key(f[k], f[(k + 1) % 3])];
  }
  return uses;
}

}  // namespace

TriMesh icosphere(int subdivisions, double radius) {
  if (subdivisions < 0 || subdivisions > 6) {
    throw std::invalid_argument("icosphere subdivisions must lie in [0, 6]");
  }
  if (!(radius > 0.0) || !std::isfinite(radius)) {
    throw std::invalid_argument("icosphere radius must be positive");
  }
  const double g = (1.0 + std::sqrt(5.0)) / 2.0;
  TriMesh m;
  m.vertices = {{-1, g, 0}, {1, g, 0},  {-1, -g, 0}, {1, -g, 0}, {0, -1, g},  {0, 1, g},
                {0, -1, -g}, {0, 1, -g}, {g, 0, -1},  {g, 0, 1},  {-g, 0, -1}, {-g, 0, 1}};
  m.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
             {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
             {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
             {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (Point3& v : m.vertices) v = scaled_to(v, 1.0);

  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> midpoint;
    auto mid = [&](std::uint32_t a, std::uint32_t b) {
      const auto key = edge_key(a, b);
      if (auto it = midpoint.find(key); it != midpoint.end()) return it->second;
      const Point3& p = m.vertices[a];
      const Point3& q = m.vertices[b];
      m.vertices.push_back(scaled_to({p[0] + q[0], p[1] + q[1], p[2] + q[2]}, 1.0));
      const auto id = static_cast<std::uint32_t>(m.vertices.size() - 1);
      midpoint.emplace(key, id);
      return id;
    };
    std::vector<Face> next;
    next.reserve(4 * m.faces.size());
    for (const Face& f : m.faces) {
      const std::uint32_t ab = mid(f[0], f[1]), bc = mid(f[1], f[2]), ca = mid(f[2], f[0]);
      next.push_back({f[0], ab, ca});
      next.push_back({f[1], bc, ab});
      next.push_back({f[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    m.faces = std::move(next);
  }
  for (Point3& v : m.vertices) v = scaled_to(v, radius);
  return m;
}

std::size_t edge_count(const TriMesh& mesh) { return edge_uses(mesh).size(); }

long euler_characteristic(const TriMesh& mesh) {
  return static_cast<long>(mesh.vertices.size()) - static_cast<long>(edge_count(mesh)) +
         static_cast<long>(mesh.faces.size());
}

bool is_watertight(const TriMesh& mesh) {
  if (mesh.faces.empty()) return false;
  for (const auto& [edge, count] : edge_uses(mesh)) {
    if (count != 2) return false;
  }
  return true;
}

double signed_volume(const TriMesh& mesh) {
  double total = 0.0;
  for (const Face& f : mesh.faces) {
    const Point3& a = mesh.vertices[f[0]];
    const Point3& b = mesh.vertices[f[1]];
    const Point3& c = mesh.vertices[f[2]];
    total += a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0]) +
             a[2] * (b[0] * c[1] - b[1] * c[0]);
  }
  return total / 6.0;
}

PointCloud vertices_as_cloud(const TriMesh& mesh) { return PointCloud{mesh.vertices}; }

TriangulationResult triangulate_object(const hyper::FlowParams& weights, const TriMesh& sphere,
                                       const odeflow::FlowConfig& cfg) {
  sphere.validate();
  TriangulationResult r;
  r.mesh.faces = sphere.faces;
  if (!sphere.vertices.empty()) {
    const Tensor moved = odeflow::flow_forward(weights.layout, weights.flat,
                                               vertices_as_cloud(sphere).to_tensor(), cfg);
    r.mesh.vertices = PointCloud::from_tensor(moved).points;
  }
  const double before = signed_volume(sphere), after = signed_volume(r.mesh);
  if ((before > 0.0 && after <= 0.0) || (before < 0.0 && after >= 0.0)) {
    std::ostringstream msg;
    msg << "signed volume changed sign (" << before << " -> " << after
        << "); faces may be inverted";
    r.warnings.push_back(msg.str());
  }
  return r;
}

std::vector<TriangulationResult> surface_family(const hyper::FlowParams& weights,
                                                int subdivisions,
                                                const std::vector<double>& masses,
                                                const sln::SlnParams& sln,
                                                const odeflow::FlowConfig& cfg) {
  std::vector<TriangulationResult> out;
  out.reserve(masses.size());
  for (double mass : masses) {
    out.push_back(triangulate_object(weights, icosphere(subdivisions, sln::quantile_radius(sln, mass)), cfg));
  }
  return out;
}

double mean_vertex_displacement(const TriMesh& a, const TriMesh& b) {
  if (a.vertices.size() != b.vertices.size() || a.vertices.empty()) {
    throw std::invalid_argument("vertex displacement needs meshes of equal, nonzero size");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < a.vertices.size(); ++i) {
    total += std::sqrt(squared_distance(a.vertices[i], b.vertices[i]));
  }
  return total / static_cast<double>(a.vertices.size());
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
  if (!f) throw std::runtime_error("write failed for " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream buf;
  buf << f.rdbuf();
  return buf.str();
}

void put_number(std::ostringstream& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out << buf;
}

}  // namespace

std::string to_obj(const TriMesh& mesh) {
  std::ostringstream out;
  for (const Point3& v : mesh.vertices) {
    out << "v ";
    put_number(out, v[0]);
    out << ' ';
    put_number(out, v[1]);
    out << ' ';
    put_number(out, v[2]);
    out << '\n';
  }
  for (const Face& f : mesh.faces) {
    out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
  }
  return out.str();
}

void write_obj(const TriMesh& mesh, const std::filesystem::path& path) {
  write_text(path, to_obj(mesh));
}

TriMesh parse_obj(const std::string& text) {
  TriMesh m;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      Point3 p;
      if (!(ls >> p[0] >> p[1] >> p[2])) {
        throw std::invalid_argument("OBJ line " + std::to_string(lineno) + ": bad vertex");
      }
      m.vertices.push_back(p);
    } else if (tag == "f") {
      Face f;
      for (auto& idx : f) {
        std::string tok;
        if (!(ls >> tok)) {
          throw std::invalid_argument("OBJ line " + std::to_string(lineno) + ": face needs 3 indices");
        }
        // Accept "i", "i/t" and "i/t/n".
        const long v = std::stol(tok.substr(0, tok.find('/')));
        if (v < 1) {
          throw std::invalid_argument("OBJ line " + std::to_string(lineno) + ": bad face index");
        }
        idx = static_cast<std::uint32_t>(v - 1);
      }
      m.faces.push_back(f);
    }
  }
  m.validate();
  return m;
}

TriMesh read_obj(const std::filesystem::path& path) { return parse_obj(read_text(path)); }

void write_xyz(const PointCloud& cloud, const std::filesystem::path& path) {
  std::ostringstream out;
  for (const Point3& p : cloud.points) {
    put_number(out, p[0]);
    out << ' ';
    put_number(out, p[1]);
    out << ' ';
    put_number(out, p[2]);
    out << '\n';
  }
  write_text(path, out.str());
}

PointCloud read_xyz(const std::filesystem::path& path) {
  const std::string text = read_text(path);
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  PointCloud cloud;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    Point3 p;
    if (!(ls >> p[0] >> p[1] >> p[2])) {
      throw std::invalid_argument(path.string() + ":" + std::to_string(lineno) +
                                  ": expected three numbers");
    }
    cloud.points.push_back(p);
  }
  if (!cloud.all_finite()) throw std::invalid_argument(path.string() + ": non-finite point");
  return cloud;
}

}  // namespace hyperflow::geometry
