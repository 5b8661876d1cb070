/* SPDX-FileCopyrightText: 2026 The stretchfit Authors
 * SPDX-License-Identifier: Apache-2.0 */

#pragma once

#include <span>
#include <string>
#include <vector>

#include "stretchfit/mesh.hpp"

namespace stretchfit {

/// A catalog model: mesh in its canonical frame (bbox centered at the
/// origin, y up, front facing +z) plus the category label used by the
/// evaluation protocol.
struct ZooEntry {
  std::string id;
  std::string category;
  TriMesh mesh;
};

/// Appends the 12 triangles of an axis-aligned box to the mesh. Assemblies
/// are triangle soup: interior faces are fine for sampling-based silhouettes
/// and chamfer metrics, which only ever see both shapes through the same
/// sampler.
void append_box(TriMesh& mesh, const Vec3& center, const Vec3& size);

/// Recenters the mesh so its bounding-box center is the origin.
TriMesh recenter(TriMesh mesh);

struct ChairParams {
  double seat_w = 0.45;
  double seat_d = 0.45;
  double seat_h = 0.45;    // top of the seat above the floor
  double seat_t = 0.06;    // seat slab thickness
  double leg_t = 0.05;
  double back_h = 0.45;    // backrest rise above the seat
  double back_t = 0.05;
  bool left_armrest = true;  // single armrest keeps silhouettes chiral
  double arm_h = 0.18;
  double arm_t = 0.05;
};

struct TableParams {
  double top_w = 1.2;
  double top_d = 0.7;
  double top_t = 0.05;
  double height = 0.72;
  double leg_t = 0.07;
  bool drawer = true;      // off-center drawer box under the top
  double drawer_w = 0.35;
  double drawer_h = 0.12;
};

struct BookcaseParams {
  double width = 0.8;
  double depth = 0.3;
  double height = 1.5;
  double panel_t = 0.04;
  int n_shelves = 4;       // interior shelf slabs (top/bottom are extra)
  bool divider = true;     // off-center vertical divider in the lowest bay
};

struct SofaParams {
  double width = 1.6;
  double depth = 0.8;
  double base_h = 0.35;
  double back_h = 0.45;    // rise above the base
  double back_t = 0.18;
  double arm_h = 0.25;     // rise above the base
  double arm_w = 0.18;
  double right_arm_scale = 1.0;  // != 1 makes the two arms differ
};

TriMesh make_chair(const ChairParams& p);
TriMesh make_table(const TableParams& p);
TriMesh make_bookcase(const BookcaseParams& p);
TriMesh make_sofa(const SofaParams& p);

/// The stock catalog: 12 models across chair / table / bookcase / sofa,
/// three parameter variants each. Every model carries at least one chiral
/// feature so no silhouette is mirror-degenerate.
std::vector<ZooEntry> default_zoo();

/// Writes <id>.obj per model plus a zoo.json manifest with categories.
void save_zoo(const std::string& dir, std::span<const ZooEntry> zoo);
std::vector<ZooEntry> load_zoo(const std::string& dir);

}  // namespace stretchfit
