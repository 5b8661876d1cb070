/* SPDX-FileCopyrightText: 2026 The stretchfit Authors
 * SPDX-License-Identifier: Apache-2.0 */

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "stretchfit/geometry.hpp"

namespace stretchfit {

/// Triangle soup in the model's canonical frame. Immutable by convention
/// after construction; all operations return new meshes.
struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> faces;
};

struct Aabb {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();

  Vec3 center() const { return 0.5 * (min + max); }
  Vec3 extent() const { return max - min; }
  double longest_edge() const { return extent().maxCoeff(); }
};

/// Points sampled on the surface of a mesh, tagged with the mesh identity
/// they came from.
struct SurfaceSample {
  std::vector<Vec3> points;
  std::string source;
};

/// Throws std::runtime_error if the mesh violates its invariants: face
/// indices in range, finite coordinates, at least one face with nonzero area.
void validate_mesh(const TriMesh& mesh);

double face_area(const TriMesh& mesh, int face);

/// Reads the v/f subset of Wavefront OBJ. Polygon faces are fan-triangulated,
/// vn/vt/material records are ignored, indices may be 1-based or negative
/// (relative). Throws with the offending line number on malformed input.
TriMesh load_obj(const std::string& path);

/// Writes `v %.9f %.9f %.9f` and 1-based `f` lines.
void save_obj(const TriMesh& mesh, const std::string& path);

Aabb bounding_box(const TriMesh& mesh);
Aabb bounding_box(std::span<const Vec3> points);

struct RescaleResult {
  TriMesh mesh;
  double scale = 1.0;
};

/// Uniformly scales the mesh about its bounding-box center so the longest
/// bounding-box edge equals `target`. Throws on a zero-extent box.
RescaleResult rescale_longest_edge(const TriMesh& mesh, double target = 10.0);

/// Draws n points area-weighted across faces, uniform (barycentric) within
/// each face. Deterministic for a fixed seed.
SurfaceSample sample_surface(const TriMesh& mesh, int n, std::uint64_t seed,
                             const std::string& source_tag = {});

/// Debug export, one `x,y,z` row per point.
void save_points_csv(std::span<const Vec3> points, const std::string& path);

}  // namespace stretchfit
