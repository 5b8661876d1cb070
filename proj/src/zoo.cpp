/* SPDX-FileCopyrightText: 2026 The stretchfit Authors
 * SPDX-License-Identifier: Apache-2.0 */

#include "stretchfit/zoo.hpp"

#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace stretchfit {

void append_box(TriMesh& mesh, const Vec3& center, const Vec3& size) {
  const int base = static_cast<int>(mesh.vertices.size());
  const Vec3 h = 0.5 * size;
  for (int i = 0; i < 8; ++i) {
    mesh.vertices.emplace_back(center.x() + ((i & 1) ? h.x() : -h.x()),
                               center.y() + ((i & 2) ? h.y() : -h.y()),
                               center.z() + ((i & 4) ? h.z() : -h.z()));
  }
  static const int kFaces[12][3] = {
      {0, 2, 1}, {1, 2, 3},  // z-
      {4, 5, 6}, {5, 7, 6},  // z+
      {0, 1, 4}, {1, 5, 4},  // y-
      {2, 6, 3}, {3, 6, 7},  // y+
      {0, 4, 2}, {2, 4, 6},  // x-
      {1, 3, 5}, {3, 7, 5},  // x+
  };
  for (const auto& f : kFaces) {
    mesh.faces.push_back({base + f[0], base + f[1], base + f[2]});
  }
}

TriMesh recenter(TriMesh mesh) {
  const Vec3 c = bounding_box(mesh).center();
  for (auto& v : mesh.vertices) v -= c;
  return mesh;
}

TriMesh make_chair(const ChairParams& p) {
  TriMesh m;
  const double lx = 0.5 * (p.seat_w - p.leg_t);
  const double lz = 0.5 * (p.seat_d - p.leg_t);
  const double leg_h = p.seat_h - p.seat_t;
  for (int sx : {-1, 1}) {
    for (int sz : {-1, 1}) {
      append_box(m, Vec3(sx * lx, 0.5 * leg_h, sz * lz),
                 Vec3(p.leg_t, leg_h, p.leg_t));
    }
  }
  append_box(m, Vec3(0.0, p.seat_h - 0.5 * p.seat_t, 0.0),
             Vec3(p.seat_w, p.seat_t, p.seat_d));
  append_box(m, Vec3(0.0, p.seat_h + 0.5 * p.back_h,
                     -0.5 * (p.seat_d - p.back_t)),
             Vec3(p.seat_w, p.back_h, p.back_t));
  if (p.left_armrest) {
    append_box(m, Vec3(-0.5 * (p.seat_w - p.arm_t), p.seat_h + 0.5 * p.arm_h,
                       0.0),
               Vec3(p.arm_t, p.arm_h, p.seat_d));
  }
  return recenter(std::move(m));
}

TriMesh make_table(const TableParams& p) {
  TriMesh m;
  const double lx = 0.5 * (p.top_w - p.leg_t) - 0.02;
  const double lz = 0.5 * (p.top_d - p.leg_t) - 0.02;
  const double leg_h = p.height - p.top_t;
  for (int sx : {-1, 1}) {
    for (int sz : {-1, 1}) {
      append_box(m, Vec3(sx * lx, 0.5 * leg_h, sz * lz),
                 Vec3(p.leg_t, leg_h, p.leg_t));
    }
  }
  append_box(m, Vec3(0.0, p.height - 0.5 * p.top_t, 0.0),
             Vec3(p.top_w, p.top_t, p.top_d));
  if (p.drawer) {
    // Hung under the top, pushed to +x so the model is chiral.
    append_box(m, Vec3(0.25 * p.top_w, leg_h - 0.5 * p.drawer_h, 0.0),
               Vec3(p.drawer_w, p.drawer_h, p.top_d - 0.1));
  }
  return recenter(std::move(m));
}

TriMesh make_bookcase(const BookcaseParams& p) {
  TriMesh m;
  const double inner_w = p.width - 2.0 * p.panel_t;
  for (int sx : {-1, 1}) {
    append_box(m, Vec3(sx * 0.5 * (p.width - p.panel_t), 0.5 * p.height, 0.0),
               Vec3(p.panel_t, p.height, p.depth));
  }
  append_box(m, Vec3(0.0, 0.5 * p.height, -0.5 * (p.depth - p.panel_t)),
             Vec3(inner_w, p.height, p.panel_t));
  // Shelf slabs: bottom, top, and n_shelves interior shelves.
  const int slabs = p.n_shelves + 2;
  for (int i = 0; i < slabs; ++i) {
    const double y = p.panel_t * 0.5 +
                     (p.height - p.panel_t) * static_cast<double>(i) /
                         static_cast<double>(slabs - 1);
    append_box(m, Vec3(0.0, y, 0.0), Vec3(inner_w, p.panel_t, p.depth));
  }
  if (p.divider) {
    const double bay_h =
        (p.height - p.panel_t) / static_cast<double>(slabs - 1) - p.panel_t;
    append_box(m, Vec3(0.2 * inner_w, p.panel_t + 0.5 * bay_h, 0.0),
               Vec3(p.panel_t, bay_h, p.depth));
  }
  return recenter(std::move(m));
}

TriMesh make_sofa(const SofaParams& p) {
  TriMesh m;
  append_box(m, Vec3(0.0, 0.5 * p.base_h, 0.0),
             Vec3(p.width, p.base_h, p.depth));
  append_box(m, Vec3(0.0, p.base_h + 0.5 * p.back_h,
                     -0.5 * (p.depth - p.back_t)),
             Vec3(p.width, p.back_h, p.back_t));
  const double arm_d = p.depth - p.back_t;
  append_box(m, Vec3(-0.5 * (p.width - p.arm_w), p.base_h + 0.5 * p.arm_h,
                     0.5 * p.back_t),
             Vec3(p.arm_w, p.arm_h, arm_d));
  const double rw = p.arm_w * p.right_arm_scale;
  const double rh = p.arm_h * p.right_arm_scale;
  append_box(m, Vec3(0.5 * (p.width - rw), p.base_h + 0.5 * rh,
                     0.5 * p.back_t),
             Vec3(rw, rh, arm_d));
  return recenter(std::move(m));
}

std::vector<ZooEntry> default_zoo() {
  std::vector<ZooEntry> zoo;
  auto add = [&zoo](const std::string& id, const std::string& category,
                    TriMesh mesh) {
    zoo.push_back({id, category, std::move(mesh)});
  };

  ChairParams chair_a;
  ChairParams chair_b;
  chair_b.seat_w = 0.55;
  chair_b.seat_d = 0.5;
  chair_b.back_h = 0.3;
  chair_b.leg_t = 0.07;
  chair_b.arm_h = 0.22;
  ChairParams chair_c;
  chair_c.seat_w = 0.4;
  chair_c.seat_h = 0.55;
  chair_c.back_h = 0.6;
  chair_c.back_t = 0.04;
  chair_c.left_armrest = false;
  chair_c.seat_t = 0.05;
  add("chair_a", "chair", make_chair(chair_a));
  add("chair_b", "chair", make_chair(chair_b));
  add("chair_c", "chair", make_chair(chair_c));

  TableParams table_a;
  TableParams table_b;
  table_b.top_w = 0.9;
  table_b.top_d = 0.9;
  table_b.height = 0.45;
  table_b.leg_t = 0.09;
  table_b.drawer_w = 0.3;
  table_b.drawer_h = 0.15;
  TableParams table_c;
  table_c.top_w = 1.4;
  table_c.top_d = 0.6;
  table_c.height = 0.85;
  table_c.leg_t = 0.05;
  table_c.drawer = false;
  add("table_a", "table", make_table(table_a));
  add("table_b", "table", make_table(table_b));
  add("table_c", "table", make_table(table_c));

  BookcaseParams case_a;
  BookcaseParams case_b;
  case_b.width = 1.1;
  case_b.height = 1.1;
  case_b.n_shelves = 2;
  case_b.depth = 0.35;
  BookcaseParams case_c;
  case_c.width = 0.6;
  case_c.height = 1.8;
  case_c.n_shelves = 5;
  case_c.panel_t = 0.035;
  case_c.divider = false;
  add("bookcase_a", "bookcase", make_bookcase(case_a));
  add("bookcase_b", "bookcase", make_bookcase(case_b));
  add("bookcase_c", "bookcase", make_bookcase(case_c));

  SofaParams sofa_a;
  SofaParams sofa_b;
  sofa_b.width = 2.1;
  sofa_b.depth = 0.9;
  sofa_b.base_h = 0.4;
  sofa_b.back_h = 0.35;
  sofa_b.right_arm_scale = 0.6;
  SofaParams sofa_c;
  sofa_c.width = 1.0;
  sofa_c.depth = 0.85;
  sofa_c.back_h = 0.55;
  sofa_c.arm_w = 0.22;
  sofa_c.arm_h = 0.35;
  sofa_c.right_arm_scale = 0.75;
  add("sofa_a", "sofa", make_sofa(sofa_a));
  add("sofa_b", "sofa", make_sofa(sofa_b));
  add("sofa_c", "sofa", make_sofa(sofa_c));

  return zoo;
}

void save_zoo(const std::string& dir, std::span<const ZooEntry> zoo) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["models"] = nlohmann::json::array();
  for (const ZooEntry& e : zoo) {
    save_obj(e.mesh, dir + "/" + e.id + ".obj");
    manifest["models"].push_back(
        {{"id", e.id}, {"category", e.category}, {"file", e.id + ".obj"}});
  }
  std::ofstream out(dir + "/zoo.json");
  if (!out) throw std::runtime_error("cannot write " + dir + "/zoo.json");
  out << manifest.dump(2) << "\n";
}

std::vector<ZooEntry> load_zoo(const std::string& dir) {
  std::ifstream in(dir + "/zoo.json");
  if (!in) throw std::runtime_error("cannot read " + dir + "/zoo.json");
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(dir + "/zoo.json: " + e.what());
  }
  std::vector<ZooEntry> zoo;
  for (const auto& entry : manifest.at("models")) {
    ZooEntry e;
    e.id = entry.at("id").get<std::string>();
    e.category = entry.at("category").get<std::string>();
    e.mesh = load_obj(dir + "/" + entry.at("file").get<std::string>());
    validate_mesh(e.mesh);
    zoo.push_back(std::move(e));
  }
  return zoo;
}

}  // namespace stretchfit
