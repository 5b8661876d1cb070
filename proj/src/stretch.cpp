/* SPDX-FileCopyrightText: 2026 The stretchfit Authors
 * SPDX-License-Identifier: Apache-2.0 */

#include "stretchfit/stretch.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "stretchfit/rng.hpp"

namespace stretchfit {

void validate_spec(const StretchSpec& spec) {
  if (spec.planes.size() != spec.tau.size()) {
    throw std::runtime_error("stretch spec: planes/tau size mismatch");
  }
  if (spec.planes.size() > 3) {
    throw std::runtime_error("stretch spec: more than 3 planes");
  }
  for (const auto& p : spec.planes) {
    if (std::abs(p.normal.norm() - 1.0) > 1e-12) {
      throw std::runtime_error("stretch plane normal is not unit length");
    }
  }
  for (std::size_t i = 0; i < spec.planes.size(); ++i) {
    for (std::size_t j = i + 1; j < spec.planes.size(); ++j) {
      if (std::abs(spec.planes[i].normal.dot(spec.planes[j].normal)) >= 1e-9) {
        throw std::runtime_error("stretch planes are not orthogonal");
      }
    }
  }
}

int stretch_side(const Vec3& x, const StretchPlane& plane) {
  const double signed_dist = x.dot(plane.normal) - plane.offset;
  if (std::abs(signed_dist) <= kOnPlaneBand) return 0;
  return signed_dist > 0.0 ? 1 : -1;
}

Vec3 stretch_point(const Vec3& x, const StretchSpec& spec) {
  Vec3 out = x;
  for (std::size_t i = 0; i < spec.planes.size(); ++i) {
    const int s = stretch_side(x, spec.planes[i]);
    if (s != 0) {
      out += (s * 0.5 * spec.tau[i]) * spec.planes[i].normal;
    }
  }
  return out;
}

TriMesh stretch_mesh(const TriMesh& mesh, const StretchSpec& spec) {
  validate_spec(spec);
  TriMesh out;
  out.faces = mesh.faces;
  out.vertices.reserve(mesh.vertices.size());
  for (const Vec3& v : mesh.vertices) {
    out.vertices.push_back(stretch_point(v, spec));
  }
  return out;
}

StretchSpec axis_stretch_spec(const Aabb& box, const Vec3& tau) {
  const Vec3 center = box.center();
  StretchSpec spec;
  for (int axis = 0; axis < 3; ++axis) {
    Vec3 n = Vec3::Zero();
    n[axis] = 1.0;
    spec.planes.push_back({n, center[axis]});
    spec.tau.push_back(tau[axis]);
  }
  return spec;
}

StretchSpec random_stretch_spec(const TriMesh& mesh, std::uint64_t seed) {
  const Aabb box = bounding_box(mesh);
  if (box.longest_edge() <= 0.0) {
    throw std::runtime_error("degenerate bounding box for random stretch");
  }
  Rng rng(seed);
  Vec3 tau;
  for (int axis = 0; axis < 3; ++axis) {
    tau[axis] = rng.uniform(-0.2, 0.3) * box.extent()[axis];
  }
  return axis_stretch_spec(box, tau);
}

void to_json(nlohmann::json& j, const StretchSpec& spec) {
  j = nlohmann::json::object();
  j["planes"] = nlohmann::json::array();
  for (const auto& p : spec.planes) {
    j["planes"].push_back(
        {{"n", {p.normal.x(), p.normal.y(), p.normal.z()}}, {"d", p.offset}});
  }
  j["tau"] = spec.tau;
}

void from_json(const nlohmann::json& j, StretchSpec& spec) {
  spec.planes.clear();
  for (const auto& jp : j.at("planes")) {
    StretchPlane p;
    p.normal = Vec3(jp.at("n")[0].get<double>(), jp.at("n")[1].get<double>(),
                    jp.at("n")[2].get<double>());
    p.offset = jp.at("d").get<double>();
    spec.planes.push_back(p);
  }
  spec.tau = j.at("tau").get<std::vector<double>>();
  validate_spec(spec);
}

}  // namespace stretchfit
