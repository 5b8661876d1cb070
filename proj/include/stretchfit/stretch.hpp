/* SPDX-FileCopyrightText: 2026 The stretchfit Authors
 * SPDX-License-Identifier: Apache-2.0 */

#pragma once

#include <cstdint>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "stretchfit/geometry.hpp"
#include "stretchfit/mesh.hpp"

namespace stretchfit {

/// A stretch plane n.x = d. Vertices are displaced by +-tau/2 along n
/// depending on which side of the plane they lie, so the object's extent
/// along n grows by tau in total.
struct StretchPlane {
  Vec3 normal = Vec3::UnitX();
  double offset = 0.0;  // signed distance of the plane from the origin along n
};

/// A set of pairwise-orthogonal stretch planes with per-plane amounts, in
/// model units.
struct StretchSpec {
  std::vector<StretchPlane> planes;
  std::vector<double> tau;

  bool is_zero() const {
    for (double t : tau) {
      if (t != 0.0) return false;
    }
    return true;
  }
};

/// Points within this absolute band of a plane count as on-plane and do not
/// move (the s = 0 case).
inline constexpr double kOnPlaneBand = 1e-12;

/// The joint optimizer keeps |tau| at or below this fraction of the
/// bounding-box side so the deformation cannot invert the model.
inline constexpr double kStretchCapFraction = 0.9;

/// Throws if plane normals are not unit (1e-12) or not pairwise orthogonal
/// (dot < 1e-9), if there are more than 3 planes, or if tau/planes sizes
/// differ.
void validate_spec(const StretchSpec& spec);

/// Which side of plane i the point lies on: +1, -1, or 0 inside the band.
int stretch_side(const Vec3& x, const StretchPlane& plane);

Vec3 stretch_point(const Vec3& x, const StretchSpec& spec);

/// Applies stretch_point to every vertex; topology is preserved.
TriMesh stretch_mesh(const TriMesh& mesh, const StretchSpec& spec);

/// Three axis-aligned planes through the box center with the given amounts.
StretchSpec axis_stretch_spec(const Aabb& box, const Vec3& tau);

/// Random stretch amounts: tau_i = U[-0.2, 0.3] times the bounding-box side
/// length along axis i, with planes through the box center.
StretchSpec random_stretch_spec(const TriMesh& mesh, std::uint64_t seed);

void to_json(nlohmann::json& j, const StretchSpec& spec);
void from_json(const nlohmann::json& j, StretchSpec& spec);

}  // namespace stretchfit
