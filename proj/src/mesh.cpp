/* SPDX-FileCopyrightText: 2026 The stretchfit Authors
 * SPDX-License-Identifier: Apache-2.0 */

#include "stretchfit/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "stretchfit/rng.hpp"

namespace stretchfit {

namespace {

[[noreturn]] void parse_fail(const std::string& path, int line,
                             const std::string& what) {
  throw std::runtime_error(path + ":" + std::to_string(line) + ": " + what);
}

// Accepts "i", "i/t", "i//n", "i/t/n"; returns the vertex index token.
int parse_face_index(const std::string& token, const std::string& path,
                     int line) {
  const std::string head = token.substr(0, token.find('/'));
  std::size_t used = 0;
  int idx = 0;
  try {
    idx = std::stoi(head, &used);
  } catch (const std::exception&) {
    parse_fail(path, line, "bad face index '" + token + "'");
  }
  if (used != head.size() || idx == 0) {
    parse_fail(path, line, "bad face index '" + token + "'");
  }
  return idx;
}

}  // namespace

void validate_mesh(const TriMesh& mesh) {
  const int n = static_cast<int>(mesh.vertices.size());
  for (const Vec3& v : mesh.vertices) {
    if (!v.allFinite()) throw std::runtime_error("mesh has non-finite vertex");
  }
  for (const auto& f : mesh.faces) {
    for (int idx : f) {
      if (idx < 0 || idx >= n) {
        throw std::runtime_error("face index " + std::to_string(idx) +
                                 " out of range (vertex count " +
                                 std::to_string(n) + ")");
      }
    }
  }
  if (mesh.faces.empty()) throw std::runtime_error("mesh has no faces");
  bool has_area = false;
  for (int i = 0; i < static_cast<int>(mesh.faces.size()); ++i) {
    if (face_area(mesh, i) > 0.0) {
      has_area = true;
      break;
    }
  }
  if (!has_area) throw std::runtime_error("mesh has no face with nonzero area");
}

double face_area(const TriMesh& mesh, int face) {
  const auto& f = mesh.faces[face];
  const Vec3& a = mesh.vertices[f[0]];
  const Vec3& b = mesh.vertices[f[1]];
  const Vec3& c = mesh.vertices[f[2]];
  return 0.5 * (b - a).cross(c - a).norm();
}

TriMesh load_obj(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");

  TriMesh mesh;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::string tag;
    if (!(ss >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      double x, y, z;
      if (!(ss >> x >> y >> z)) parse_fail(path, line_no, "malformed vertex");
      if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z)) {
        parse_fail(path, line_no, "non-finite vertex");
      }
      mesh.vertices.emplace_back(x, y, z);
    } else if (tag == "f") {
      std::vector<int> poly;
      std::string token;
      while (ss >> token) {
        int idx = parse_face_index(token, path, line_no);
        // OBJ indices are 1-based; negative indices count from the end.
        idx = idx > 0 ? idx - 1 : static_cast<int>(mesh.vertices.size()) + idx;
        if (idx < 0 || idx >= static_cast<int>(mesh.vertices.size())) {
          parse_fail(path, line_no, "face index out of range");
        }
        poly.push_back(idx);
      }
      if (poly.size() < 3) parse_fail(path, line_no, "face with < 3 vertices");
      for (std::size_t k = 2; k < poly.size(); ++k) {
        mesh.faces.push_back({poly[0], poly[k - 1], poly[k]});
      }
    }
    // vn / vt / o / g / s / mtllib / usemtl are ignored.
  }
  if (mesh.vertices.empty() || mesh.faces.empty()) {
    throw std::runtime_error("'" + path + "': empty mesh");
  }
  validate_mesh(mesh);
  return mesh;
}

void save_obj(const TriMesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  char buf[128];
  for (const Vec3& v : mesh.vertices) {
    std::snprintf(buf, sizeof(buf), "v %.9f %.9f %.9f\n", v.x(), v.y(), v.z());
    out << buf;
  }
  for (const auto& f : mesh.faces) {
    out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
  }
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

Aabb bounding_box(const TriMesh& mesh) {
  return bounding_box(std::span<const Vec3>(mesh.vertices));
}

Aabb bounding_box(std::span<const Vec3> points) {
  if (points.empty()) throw std::runtime_error("bounding box of empty set");
  Aabb box{points[0], points[0]};
  for (const Vec3& p : points) {
    box.min = box.min.cwiseMin(p);
    box.max = box.max.cwiseMax(p);
  }
  return box;
}

RescaleResult rescale_longest_edge(const TriMesh& mesh, double target) {
  const Aabb box = bounding_box(mesh);
  const double longest = box.longest_edge();
  if (longest <= 0.0) {
    throw std::runtime_error("degenerate bounding box, cannot rescale");
  }
  const double scale = target / longest;
  const Vec3 center = box.center();
  RescaleResult out;
  out.scale = scale;
  out.mesh.faces = mesh.faces;
  out.mesh.vertices.reserve(mesh.vertices.size());
  for (const Vec3& v : mesh.vertices) {
    out.mesh.vertices.push_back(center + scale * (v - center));
  }
  return out;
}

SurfaceSample sample_surface(const TriMesh& mesh, int n, std::uint64_t seed,
                             const std::string& source_tag) {
  if (n < 1) throw std::runtime_error("sample_surface needs n >= 1");
  validate_mesh(mesh);

  std::vector<double> cumulative(mesh.faces.size());
  double total = 0.0;
  for (std::size_t i = 0; i < mesh.faces.size(); ++i) {
    total += face_area(mesh, static_cast<int>(i));
    cumulative[i] = total;
  }

  Rng rng(seed);
  SurfaceSample sample;
  sample.source = source_tag;
  sample.points.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double r = rng.uniform() * total;
    const auto it =
        std::upper_bound(cumulative.begin(), cumulative.end(), r);
    const std::size_t face = std::min<std::size_t>(
        static_cast<std::size_t>(it - cumulative.begin()),
        cumulative.size() - 1);
    const auto& f = mesh.faces[face];
    // Uniform barycentric point via square-root trick.
    double u = rng.uniform();
    double v = rng.uniform();
    const double su = std::sqrt(u);
    const double b0 = 1.0 - su;
    const double b1 = su * (1.0 - v);
    const double b2 = su * v;
    sample.points.push_back(b0 * mesh.vertices[f[0]] +
                            b1 * mesh.vertices[f[1]] +
                            b2 * mesh.vertices[f[2]]);
  }
  return sample;
}

void save_points_csv(std::span<const Vec3> points, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "x,y,z\n";
  char buf[128];
  for (const Vec3& p : points) {
    std::snprintf(buf, sizeof(buf), "%.9f,%.9f,%.9f\n", p.x(), p.y(), p.z());
    out << buf;
  }
}

}  // namespace stretchfit
