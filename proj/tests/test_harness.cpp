/* SPDX-FileCopyrightText: 2026 The stretchfit Authors
 * SPDX-License-Identifier: Apache-2.0 */

#include "stretchfit/harness.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <doctest.h>
#include <nlohmann/json.hpp>

#include "stretchfit/camera.hpp"
#include "stretchfit/rng.hpp"
#include "stretchfit/stretch.hpp"
#include "stretchfit/zoo.hpp"
#include "test_helpers.hpp"

using namespace stretchfit;

namespace {

namespace fs = std::filesystem;

std::vector<ZooEntry> small_zoo() {
  const auto zoo = default_zoo();
  // One model per category keeps pipeline tests quick.
  std::vector<ZooEntry> out;
  for (const auto& e : zoo) {
    bool seen = false;
    for (const auto& s : out) seen = seen || s.category == e.category;
    if (!seen) out.push_back(e);
  }
  return out;
}

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Exact triangle rasterization of the posed mesh, as an independent
/// reference for the stamped scene mask.
Mask raster_mask(const TriMesh& mesh, const StretchSpec& spec,
                 const CameraPose& pose, const Intrinsics& k) {
  const TriMesh posed = spec.planes.empty() ? mesh : stretch_mesh(mesh, spec);
  std::vector<Vec2> uv(posed.vertices.size());
  for (std::size_t i = 0; i < posed.vertices.size(); ++i) {
    const Projection pr = project(posed.vertices[i], pose, k);
    REQUIRE(!pr.behind);
    uv[i] = pr.uv;
  }
  Mask out = make_mask(k.width, k.height);
  auto edge = [](const Vec2& a, const Vec2& b, const Vec2& p) {
    return (b.x() - a.x()) * (p.y() - a.y()) -
           (b.y() - a.y()) * (p.x() - a.x());
  };
  for (const auto& f : posed.faces) {
    const Vec2& a = uv[static_cast<std::size_t>(f[0])];
    const Vec2& b = uv[static_cast<std::size_t>(f[1])];
    const Vec2& c = uv[static_cast<std::size_t>(f[2])];
    const int x0 = std::max(0, static_cast<int>(std::floor(
                                   std::min({a.x(), b.x(), c.x()}) - 0.5)));
    const int x1 = std::min(k.width - 1,
                            static_cast<int>(std::ceil(
                                std::max({a.x(), b.x(), c.x()}) + 0.5)));
    const int y0 = std::max(0, static_cast<int>(std::floor(
                                   std::min({a.y(), b.y(), c.y()}) - 0.5)));
    const int y1 = std::min(k.height - 1,
                            static_cast<int>(std::ceil(
                                std::max({a.y(), b.y(), c.y()}) + 0.5)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const Vec2 p(x + 0.5, y + 0.5);
        const double e0 = edge(a, b, p);
        const double e1 = edge(b, c, p);
        const double e2 = edge(c, a, p);
        const bool in = (e0 >= 0 && e1 >= 0 && e2 >= 0) ||
                        (e0 <= 0 && e1 <= 0 && e2 <= 0);
        if (in) out.set(x, y, true);
      }
    }
  }
  return out;
}

SceneSpec basic_spec(const TriMesh& mesh, std::uint64_t seed) {
  SceneSpec spec;
  spec.id = "s";
  spec.model_id = "m";
  spec.k = default_scene_intrinsics();
  const Aabb box = bounding_box(mesh);
  const double radius = 0.5 * box.extent().norm();
  spec.gt_pose = model_view_pose(
      box, 0.7, 0.4, framing_distance(radius, spec.k, 0.6));
  spec.seed = seed;
  return spec;
}

}  // namespace

// ---------------------------------------------------------------------------
// Model catalog

TEST_CASE("default zoo has 12 centered valid models in 4 categories") {
  const auto zoo = default_zoo();
  REQUIRE(zoo.size() == 12);
  std::set<std::string> ids;
  std::map<std::string, int> per_category;
  for (const auto& e : zoo) {
    ids.insert(e.id);
    per_category[e.category]++;
    validate_mesh(e.mesh);
    const Aabb box = bounding_box(e.mesh);
    CHECK(box.center().norm() < 1e-12);
    CHECK(box.extent().minCoeff() > 0.05);
  }
  CHECK(ids.size() == 12);
  REQUIRE(per_category.size() == 4);
  for (const auto& [cat, n] : per_category) {
    CAPTURE(cat);
    CHECK(n == 3);
  }
  CHECK(per_category.count("chair") == 1);
  CHECK(per_category.count("table") == 1);
  CHECK(per_category.count("bookcase") == 1);
  CHECK(per_category.count("sofa") == 1);
}

TEST_CASE("append_box emits one axis-aligned box") {
  TriMesh m;
  append_box(m, Vec3(1.0, 2.0, 3.0), Vec3(2.0, 4.0, 6.0));
  CHECK(m.vertices.size() == 8);
  CHECK(m.faces.size() == 12);
  const Aabb box = bounding_box(m);
  CHECK((box.min - Vec3(0.0, 0.0, 0.0)).norm() == 0.0);
  CHECK((box.max - Vec3(2.0, 4.0, 6.0)).norm() == 0.0);
  double area = 0.0;
  for (int f = 0; f < 12; ++f) area += face_area(m, f);
  // 2(ab + bc + ca) for a 2x4x6 box.
  CHECK(area == doctest::Approx(88.0).epsilon(1e-12));

  append_box(m, Vec3(10.0, 0.0, 0.0), Vec3(1.0, 1.0, 1.0));
  CHECK(m.vertices.size() == 16);
  CHECK(m.faces.size() == 24);
  validate_mesh(m);
}

TEST_CASE("chair armrest keeps the silhouette chiral") {
  ChairParams p;
  p.left_armrest = true;
  const TriMesh with = make_chair(p);
  p.left_armrest = false;
  const TriMesh without = make_chair(p);
  CHECK(with.vertices.size() == without.vertices.size() + 8);
  // The armrest breaks left-right symmetry of the vertex mass.
  double wx = 0.0;
  for (const auto& v : with.vertices) wx += v.x();
  double ox = 0.0;
  for (const auto& v : without.vertices) ox += v.x();
  CHECK(std::abs(wx - ox) > 1e-6);
}

TEST_CASE("zoo round-trips through OBJ files and a manifest") {
  const auto zoo = default_zoo();
  const std::string dir = "zoo_roundtrip_test";
  fs::remove_all(dir);
  save_zoo(dir, zoo);
  const auto loaded = load_zoo(dir);
  REQUIRE(loaded.size() == zoo.size());
  for (std::size_t i = 0; i < zoo.size(); ++i) {
    CHECK(loaded[i].id == zoo[i].id);
    CHECK(loaded[i].category == zoo[i].category);
    REQUIRE(loaded[i].mesh.vertices.size() == zoo[i].mesh.vertices.size());
    REQUIRE(loaded[i].mesh.faces.size() == zoo[i].mesh.faces.size());
    for (std::size_t v = 0; v < zoo[i].mesh.vertices.size(); ++v) {
      CHECK((loaded[i].mesh.vertices[v] - zoo[i].mesh.vertices[v])
                .lpNorm<Eigen::Infinity>() < 5e-10);
    }
    CHECK(loaded[i].mesh.faces == zoo[i].mesh.faces);
  }
  fs::remove_all(dir);
  CHECK_THROWS_AS(load_zoo(dir), std::runtime_error);
}

TEST_CASE("committed zoo files match a fresh regeneration byte for byte") {
  const std::string committed = std::string(STRETCHFIT_DATA_DIR) + "/zoo";
  REQUIRE(fs::exists(committed + "/zoo.json"));
  const std::string dir = "zoo_regen_test";
  fs::remove_all(dir);
  save_zoo(dir, default_zoo());
  std::size_t n_files = 0;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    CAPTURE(name);
    CHECK(read_bytes(dir + "/" + name) == read_bytes(committed + "/" + name));
    ++n_files;
  }
  CHECK(n_files == 13);  // 12 meshes + manifest
  fs::remove_all(dir);
}

// ---------------------------------------------------------------------------
// Scene synthesis

TEST_CASE("noiseless scenes reproject their inlier matches exactly") {
  const auto zoo = default_zoo();
  const TriMesh& mesh = zoo[0].mesh;
  SceneSpec spec = basic_spec(mesh, 21);
  spec.n_matches = 12;
  spec.inlier_count = 12;
  spec.pixel_noise_sigma = 0.0;

  SUBCASE("rigid") {}
  SUBCASE("stretched") {
    const Aabb box = bounding_box(mesh);
    spec.gt_stretch = axis_stretch_spec(box, 0.2 * box.extent());
  }

  const Scene scene = generate_scene(spec, mesh);
  REQUIRE(scene.matches.size() == 12);
  const bool stretched = !spec.gt_stretch.planes.empty();
  for (const Match& m : scene.matches) {
    const Vec3 xs = stretched ? stretch_point(m.x, spec.gt_stretch) : m.x;
    const Projection pr = project(xs, spec.gt_pose, spec.k);
    CHECK((pr.uv - m.u).norm() == 0.0);
    if (stretched) {
      // The match stores base coordinates: projecting them unstretched
      // must not reproduce the pixel.
      const Projection raw = project(m.x, spec.gt_pose, spec.k);
      CHECK((raw.uv - m.u).norm() > 1e-6);
    }
  }
  CHECK(scene.mask.foreground_count() > 500);
}

TEST_CASE("outlier matches land on the mask but off their 3D point") {
  const auto zoo = default_zoo();
  SceneSpec spec = basic_spec(zoo[1].mesh, 22);
  spec.n_matches = 12;
  spec.inlier_count = 0;
  spec.pixel_noise_sigma = 0.0;
  const Scene scene = generate_scene(spec, zoo[1].mesh);
  REQUIRE(scene.matches.size() == 12);
  int off = 0;
  for (const Match& m : scene.matches) {
    const int x = static_cast<int>(m.u.x());
    const int y = static_cast<int>(m.u.y());
    CHECK(scene.mask.at(x, y));
    const Projection pr = project(m.x, spec.gt_pose, spec.k);
    if ((pr.uv - m.u).norm() > 3.0) ++off;
  }
  CHECK(off >= 10);  // pairing is random, not geometric
}

TEST_CASE("generate_scene is deterministic and honors noise sigma") {
  const auto zoo = default_zoo();
  SceneSpec spec = basic_spec(zoo[2].mesh, 23);
  spec.inlier_count = 8;
  spec.pixel_noise_sigma = 1.5;
  const Scene a = generate_scene(spec, zoo[2].mesh);
  const Scene b = generate_scene(spec, zoo[2].mesh);
  REQUIRE(a.matches.size() == b.matches.size());
  for (std::size_t i = 0; i < a.matches.size(); ++i) {
    CHECK((a.matches[i].u - b.matches[i].u).norm() == 0.0);
    CHECK((a.matches[i].x - b.matches[i].x).norm() == 0.0);
  }
  CHECK(a.mask.grid == b.mask.grid);

  spec.seed += 1;
  const Scene c = generate_scene(spec, zoo[2].mesh);
  double moved = 0.0;
  for (std::size_t i = 0; i < a.matches.size(); ++i) {
    moved += (a.matches[i].u - c.matches[i].u).norm();
  }
  CHECK(moved > 1.0);
}

TEST_CASE("mask morphology shifts the foreground count both ways") {
  const auto zoo = default_zoo();
  SceneSpec spec = basic_spec(zoo[3].mesh, 24);
  const int base = generate_scene(spec, zoo[3].mesh).mask.foreground_count();
  spec.mask_morph = 2;
  const int fat = generate_scene(spec, zoo[3].mesh).mask.foreground_count();
  spec.mask_morph = -2;
  const int thin = generate_scene(spec, zoo[3].mesh).mask.foreground_count();
  CHECK(fat > base);
  CHECK(thin < base);
}

TEST_CASE("scene masks overlap an exact triangle rasterization") {
  const auto zoo = default_zoo();
  for (std::size_t mi : {std::size_t{0}, std::size_t{4}}) {
    SceneSpec spec = basic_spec(zoo[mi].mesh, 25 + mi);
    const Aabb box = bounding_box(zoo[mi].mesh);
    spec.gt_stretch = axis_stretch_spec(box, 0.15 * box.extent());
    const Scene scene = generate_scene(spec, zoo[mi].mesh, 2000);
    const Mask exact =
        raster_mask(zoo[mi].mesh, spec.gt_stretch, spec.gt_pose, spec.k);
    int inter = 0;
    for (int y = 0; y < exact.height; ++y) {
      for (int x = 0; x < exact.width; ++x) {
        if (exact.at(x, y) && scene.mask.at(x, y)) ++inter;
      }
    }
    // Stamped disks stay inside the true silhouette (high precision) but
    // tile it imperfectly, so recall and IoU sit lower. A wrong pose or
    // stretch would collapse precision, which is what this pins.
    const double precision = double(inter) / scene.mask.foreground_count();
    const double recall = double(inter) / exact.foreground_count();
    const double iou = mask_iou(scene.mask, exact);
    CAPTURE(zoo[mi].id);
    INFO("IoU vs rasterizer: ", iou, ", precision: ", precision,
         ", recall: ", recall);
    CHECK(precision > 0.9);
    CHECK(recall > 0.7);
    CHECK(iou > 0.65);
  }
}

TEST_CASE("scene spec validation rejects inconsistent requests") {
  const auto zoo = default_zoo();
  SceneSpec spec = basic_spec(zoo[0].mesh, 1);
  spec.n_matches = 0;
  CHECK_THROWS_AS(validate_scene_spec(spec), std::invalid_argument);
  spec = basic_spec(zoo[0].mesh, 1);
  spec.inlier_count = spec.n_matches + 1;
  CHECK_THROWS_AS(validate_scene_spec(spec), std::invalid_argument);
  spec = basic_spec(zoo[0].mesh, 1);
  spec.pixel_noise_sigma = -0.1;
  CHECK_THROWS_AS(validate_scene_spec(spec), std::invalid_argument);
  spec = basic_spec(zoo[0].mesh, 1);
  spec.k.fx = 0.0;
  CHECK_THROWS_AS(validate_scene_spec(spec), std::runtime_error);
}

TEST_CASE("a model behind the camera is reported with the scene id") {
  const auto zoo = default_zoo();
  SceneSpec spec = basic_spec(zoo[0].mesh, 2);
  spec.id = "backwards";
  spec.gt_pose.t = Vec3(0.0, 0.0, -5.0);
  try {
    generate_scene(spec, zoo[0].mesh);
    FAIL("expected generate_scene to throw");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("backwards") != std::string::npos);
  }
}

// ---------------------------------------------------------------------------
// Scene pools

TEST_CASE("make_scenes draws models, inlier counts, and poses in range") {
  const auto zoo = small_zoo();
  ScenePoolConfig cfg;
  cfg.n_scenes = 12;
  cfg.inlier_lo = 4;
  cfg.inlier_hi = 6;
  cfg.seed = 31;
  const auto scenes = make_scenes(zoo, cfg);
  REQUIRE(scenes.size() == 12);
  std::set<std::string> ids;
  std::set<std::string> models;
  for (const auto& s : scenes) {
    ids.insert(s.spec.id);
    models.insert(s.spec.model_id);
    CHECK(s.spec.inlier_count >= 4);
    CHECK(s.spec.inlier_count <= 6);
    CHECK(s.spec.n_matches == 12);
    CHECK(!s.category.empty());
    CHECK(s.matches.size() == 12);
    CHECK(s.mask.foreground_count() > 0);
  }
  CHECK(ids.size() == 12);      // unique scene ids
  CHECK(models.size() >= 2);    // catalog actually sampled

  const auto again = make_scenes(zoo, cfg);
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    CHECK(scenes[i].spec.seed == again[i].spec.seed);
    CHECK(scenes[i].mask.grid == again[i].mask.grid);
  }
}

TEST_CASE("make_scenes stretch modes produce the advertised taus") {
  const auto zoo = small_zoo();
  ScenePoolConfig cfg;
  cfg.n_scenes = 8;
  cfg.seed = 32;

  SUBCASE("off by default") {
    for (const auto& s : make_scenes(zoo, cfg)) {
      CHECK(s.spec.gt_stretch.planes.empty());
    }
  }
  SUBCASE("fixed magnitude, random sign") {
    cfg.stretch_magnitude = 0.2;
    int negatives = 0;
    for (const auto& s : make_scenes(zoo, cfg)) {
      REQUIRE(s.spec.gt_stretch.planes.size() == 3);
      const Aabb box = bounding_box(
          [&] {
            for (const auto& e : zoo) {
              if (e.id == s.spec.model_id) return e.mesh;
            }
            throw std::runtime_error("model not found");
          }());
      for (int a = 0; a < 3; ++a) {
        const double tau = s.spec.gt_stretch.tau[static_cast<std::size_t>(a)];
        CHECK(std::abs(std::abs(tau) - 0.2 * box.extent()[a]) < 1e-12);
        if (tau < 0.0) ++negatives;
      }
    }
    CHECK(negatives > 0);
    CHECK(negatives < 24);
  }
  SUBCASE("uniform random stretch") {
    cfg.stretch_random = true;
    bool any_negative = false;
    for (const auto& s : make_scenes(zoo, cfg)) {
      REQUIRE(s.spec.gt_stretch.planes.size() == 3);
      const Aabb box = bounding_box(
          [&] {
            for (const auto& e : zoo) {
              if (e.id == s.spec.model_id) return e.mesh;
            }
            throw std::runtime_error("model not found");
          }());
      for (int a = 0; a < 3; ++a) {
        const double tau = s.spec.gt_stretch.tau[static_cast<std::size_t>(a)];
        const double side = box.extent()[a];
        CHECK(tau >= -0.2 * side - 1e-12);
        CHECK(tau <= 0.3 * side + 1e-12);
        any_negative = any_negative || tau < 0.0;
      }
    }
    CHECK(any_negative);
  }
}

TEST_CASE("scene pools round-trip through a directory bit for bit") {
  const auto zoo = small_zoo();
  ScenePoolConfig cfg;
  cfg.n_scenes = 4;
  cfg.stretch_random = true;
  cfg.pixel_noise_sigma = 0.7;
  cfg.seed = 33;
  const auto scenes = make_scenes(zoo, cfg);
  const std::string dir = "scene_roundtrip_test";
  fs::remove_all(dir);
  save_scenes(dir, scenes);
  const auto loaded = load_scenes(dir);
  REQUIRE(loaded.size() == scenes.size());
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const Scene& a = scenes[i];
    const Scene& b = loaded[i];
    CHECK(a.spec.id == b.spec.id);
    CHECK(a.spec.model_id == b.spec.model_id);
    CHECK(a.spec.seed == b.spec.seed);
    CHECK(a.category == b.category);
    CHECK((a.spec.gt_pose.theta - b.spec.gt_pose.theta).norm() == 0.0);
    CHECK((a.spec.gt_pose.t - b.spec.gt_pose.t).norm() == 0.0);
    REQUIRE(a.spec.gt_stretch.planes.size() == b.spec.gt_stretch.planes.size());
    for (std::size_t p = 0; p < a.spec.gt_stretch.planes.size(); ++p) {
      CHECK(a.spec.gt_stretch.tau[p] == b.spec.gt_stretch.tau[p]);
      CHECK((a.spec.gt_stretch.planes[p].normal -
             b.spec.gt_stretch.planes[p].normal)
                .norm() == 0.0);
      CHECK(a.spec.gt_stretch.planes[p].offset ==
            b.spec.gt_stretch.planes[p].offset);
    }
    REQUIRE(a.matches.size() == b.matches.size());
    for (std::size_t m = 0; m < a.matches.size(); ++m) {
      CHECK((a.matches[m].u - b.matches[m].u).norm() == 0.0);
      CHECK((a.matches[m].x - b.matches[m].x).norm() == 0.0);
    }
    CHECK(a.mask.grid == b.mask.grid);
  }
  fs::remove_all(dir);
  CHECK_THROWS_AS(load_scenes(dir), std::runtime_error);
}

// ---------------------------------------------------------------------------
// Database construction

TEST_CASE("db stretch modes deform the catalog as configured") {
  const auto zoo = small_zoo();
  ExperimentConfig cfg;
  cfg.seed = 41;

  cfg.db_stretch = DbStretchMode::kNone;
  for (const auto& m : build_db_models(zoo, cfg)) {
    CHECK(m.applied.planes.empty());
    CHECK(m.mesh.vertices == m.base.vertices);
  }

  cfg.db_stretch = DbStretchMode::kRandom;
  const auto random_models = build_db_models(zoo, cfg);
  bool any_moved = false;
  for (const auto& m : random_models) {
    REQUIRE(m.applied.planes.size() == 3);
    for (std::size_t v = 0; v < m.base.vertices.size(); ++v) {
      any_moved = any_moved ||
                  (m.mesh.vertices[v] - m.base.vertices[v]).norm() > 1e-9;
    }
  }
  CHECK(any_moved);
  const auto random_again = build_db_models(zoo, cfg);
  for (std::size_t i = 0; i < random_models.size(); ++i) {
    for (std::size_t p = 0; p < 3; ++p) {
      CHECK(random_models[i].applied.tau[p] == random_again[i].applied.tau[p]);
    }
  }

  cfg.db_stretch = DbStretchMode::kSweep;
  cfg.sweep_magnitude = 0.25;
  for (const auto& m : build_db_models(zoo, cfg)) {
    REQUIRE(m.applied.planes.size() == 3);
    const Aabb box = bounding_box(m.base);
    for (int a = 0; a < 3; ++a) {
      CHECK(m.applied.tau[static_cast<std::size_t>(a)] ==
            doctest::Approx(0.25 * box.extent()[a]).epsilon(1e-12));
    }
    const Aabb grown = bounding_box(m.mesh);
    CHECK(grown.extent()[0] ==
          doctest::Approx(1.25 * box.extent()[0]).epsilon(1e-9));
  }
  cfg.sweep_magnitude = 0.0;
  for (const auto& m : build_db_models(zoo, cfg)) {
    CHECK(m.applied.planes.empty());
  }
}

TEST_CASE("build_pipeline_db renders one grid of views per model") {
  const auto zoo = small_zoo();
  ExperimentConfig cfg;
  cfg.grid.n_azimuth = 4;
  cfg.grid.n_elevation = 2;
  cfg.grid.n_samples = 150;
  cfg.seed = 42;
  const PipelineDb db = build_pipeline_db(zoo, cfg, default_scene_intrinsics());
  CHECK(db.models.size() == zoo.size());
  CHECK(db.views.size() == zoo.size() * 8);
  CHECK(db.index.size() == db.views.size());
}

// ---------------------------------------------------------------------------
// Pipeline

TEST_CASE("noiseless closed loop recovers category and shape") {
  const auto zoo = small_zoo();
  ScenePoolConfig pool;
  pool.n_scenes = 10;
  pool.inlier_lo = 12;
  pool.inlier_hi = 12;
  pool.pixel_noise_sigma = 0.0;
  pool.seed = 51;
  const auto scenes = make_scenes(zoo, pool);

  ExperimentConfig cfg;
  cfg.top_n = 3;
  cfg.subset_size = 4;
  cfg.stretch_enabled = false;
  cfg.subset_cap = 150;
  cfg.n_mask_samples = 600;
  cfg.n_mesh_samples = 600;
  cfg.n_f1_samples = 2500;
  cfg.seed = 51;
  const PipelineResult r = run_pipeline(cfg, scenes, zoo);

  CHECK(r.failure_rate == 0.0);
  CHECK(r.outcomes.size() == 10);
  CHECK(r.records.size() == 10);
  int sum_gt = 0;
  for (const auto& [cat, n] : r.n_gt) sum_gt += n;
  CHECK(sum_gt == 10);
  INFO("mean F1: ", r.mean_f1, " mean AP: ", r.report.mean_ap);
  CHECK(r.mean_f1 > 0.9);
  CHECK(r.report.mean_ap > 0.95);
  for (const auto& o : r.outcomes) {
    CHECK(!o.failed);
    CHECK(o.view_index >= 0);
    CHECK(o.tau.empty());  // pose-only run
    CHECK(std::isfinite(o.silhouette));
  }
}

TEST_CASE("pipeline results are independent of the worker count") {
  const auto zoo = small_zoo();
  ScenePoolConfig pool;
  pool.n_scenes = 4;
  pool.inlier_lo = 8;
  pool.inlier_hi = 10;
  pool.pixel_noise_sigma = 0.5;
  pool.seed = 52;
  const auto scenes = make_scenes(zoo, pool);

  ExperimentConfig cfg;
  cfg.top_n = 2;
  cfg.subset_size = 4;
  cfg.stretch_enabled = false;
  cfg.subset_cap = 60;
  cfg.n_mask_samples = 400;
  cfg.n_mesh_samples = 400;
  cfg.n_f1_samples = 1000;
  cfg.seed = 52;

  cfg.jobs = 1;
  const PipelineResult a = run_pipeline(cfg, scenes, zoo);
  cfg.jobs = 3;
  const PipelineResult b = run_pipeline(cfg, scenes, zoo);

  nlohmann::json ja, jb;
  to_json(ja, a);
  to_json(jb, b);
  CHECK(ja.dump() == jb.dump());
}

TEST_CASE("a pipeline re-run from dumped artifacts reproduces the report") {
  const auto zoo = small_zoo();
  ScenePoolConfig pool;
  pool.n_scenes = 3;
  pool.inlier_lo = 9;
  pool.inlier_hi = 10;
  pool.pixel_noise_sigma = 0.4;
  pool.stretch_random = true;
  pool.seed = 53;
  const auto scenes = make_scenes(zoo, pool);

  ExperimentConfig cfg;
  cfg.top_n = 1;
  cfg.subset_size = 4;
  cfg.stretch_enabled = false;
  cfg.subset_cap = 50;
  cfg.n_mask_samples = 400;
  cfg.n_mesh_samples = 400;
  cfg.n_f1_samples = 1000;
  cfg.seed = 53;

  const PipelineDb db = build_pipeline_db(zoo, cfg, pool.k);
  const PipelineResult fresh = run_pipeline(cfg, scenes, zoo, db);

  const std::string dir = "artifact_rerun_test";
  fs::remove_all(dir);
  save_scenes(dir + "/scenes", scenes);
  save_view_database(dir + "/views", db.views);

  const auto scenes2 = load_scenes(dir + "/scenes");
  PipelineDb db2;
  db2.models = build_db_models(zoo, cfg);
  db2.views = load_view_database(dir + "/views");
  db2.index = RetrievalIndex(db2.views);
  const PipelineResult rerun = run_pipeline(cfg, scenes2, zoo, db2);

  nlohmann::json ja, jb;
  to_json(ja, fresh);
  to_json(jb, rerun);
  CHECK(ja.dump() == jb.dump());
  fs::remove_all(dir);
}

TEST_CASE("degenerate scenes become logged failures, not crashes") {
  const auto zoo = small_zoo();
  ScenePoolConfig pool;
  pool.n_scenes = 2;
  pool.inlier_lo = 12;
  pool.inlier_hi = 12;
  pool.pixel_noise_sigma = 0.0;
  pool.seed = 54;
  auto scenes = make_scenes(zoo, pool);

  // Collinear 3D points defeat every PnP path.
  scenes[0].matches.clear();
  for (int i = 0; i < 4; ++i) {
    Match m;
    m.x = Vec3(0.05 * i, 0.0, 0.0);
    m.u = Vec2(100.0 + 30.0 * i, 200.0);
    scenes[0].matches.push_back(m);
  }
  scenes[0].spec.n_matches = 4;
  scenes[0].spec.inlier_count = 0;

  ExperimentConfig cfg;
  cfg.top_n = 1;
  cfg.subset_size = 4;
  cfg.stretch_enabled = false;
  cfg.subset_cap = 30;
  cfg.n_mask_samples = 300;
  cfg.n_mesh_samples = 300;
  cfg.n_f1_samples = 800;
  cfg.seed = 54;
  const PipelineResult r = run_pipeline(cfg, scenes, zoo);

  REQUIRE(r.outcomes.size() == 2);
  CHECK(r.outcomes[0].failed);
  CHECK(!r.outcomes[0].failure.empty());
  CHECK(r.failure_rate == doctest::Approx(0.5));
  CHECK(r.records.size() == 1);
  int sum_gt = 0;
  for (const auto& [cat, n] : r.n_gt) sum_gt += n;
  CHECK(sum_gt == 2);  // the failed scene still counts as a GT instance
}

// ---------------------------------------------------------------------------
// Ablations

TEST_CASE("ablation tables cover their axes with labeled rows") {
  const auto zoo = small_zoo();
  ScenePoolConfig pool;
  pool.n_scenes = 3;
  pool.inlier_lo = 10;
  pool.inlier_hi = 12;
  pool.pixel_noise_sigma = 0.3;
  pool.seed = 61;
  const auto scenes = make_scenes(zoo, pool);

  ExperimentConfig base;
  base.top_n = 2;
  base.subset_size = 4;
  base.stretch_enabled = false;
  base.subset_cap = 40;
  base.n_mask_samples = 300;
  base.n_mesh_samples = 300;
  base.n_f1_samples = 600;
  base.seed = 61;

  SUBCASE("match count") {
    const AblationTable t =
        run_ablation(AblationAxis::kMatchCount, base, scenes, zoo);
    CHECK(t.axis == "match-count");
    REQUIRE(t.rows.size() == 5);
    const std::vector<std::string> want{"3", "4", "5", "6", "7"};
    for (std::size_t i = 0; i < want.size(); ++i) {
      CHECK(t.rows[i].label == want[i]);
      CHECK(t.rows[i].mean_f1 >= 0.0);
      CHECK(t.rows[i].mean_f1 <= 1.0);
    }
  }
  SUBCASE("top n") {
    base.top_n = 10;  // overridden per row anyway
    const AblationTable t =
        run_ablation(AblationAxis::kTopN, base, scenes, zoo);
    REQUIRE(t.rows.size() == 5);
    const std::vector<std::string> want{"1", "2", "5", "10", "20"};
    for (std::size_t i = 0; i < want.size(); ++i) {
      CHECK(t.rows[i].label == want[i]);
    }
  }
  SUBCASE("selection metric") {
    const AblationTable t =
        run_ablation(AblationAxis::kSelectionMetric, base, scenes, zoo);
    REQUIRE(t.rows.size() == 3);
    CHECK(t.rows[0].label == "silhouette-q0.2");
    CHECK(t.rows[1].label == "silhouette-q1.0");
    CHECK(t.rows[2].label == "min-reprojection");
  }
  SUBCASE("db size") {
    const AblationTable t =
        run_ablation(AblationAxis::kDbSize, base, scenes, zoo);
    REQUIRE(t.rows.size() == 4);
    CHECK(t.rows[0].label == "0.25");
    CHECK(t.rows[3].label == "1.00");
  }
}

TEST_CASE("ablation tables print as CSV and markdown") {
  AblationTable t;
  t.axis = "top-n";
  t.rows.push_back({"1", 0.5, 0.25, 0.75, 0.0});
  t.rows.push_back({"5", 0.625, 0.5, 1.0, 0.125});
  const std::string csv = t.to_csv();
  CHECK(csv.find("top-n,mean_f1,ap_mesh,ap50,failure_rate\n") == 0);
  CHECK(csv.find("1,0.500000,0.250000,0.750000,0.000000\n") !=
        std::string::npos);
  CHECK(csv.find("5,0.625000,0.500000,1.000000,0.125000\n") !=
        std::string::npos);
  const std::string md = t.to_markdown();
  CHECK(md.find("| top-n | mean F1 | AP | AP50 | failure rate |") == 0);
  CHECK(md.find("| 1 | 0.5000 | 0.2500 | 0.7500 | 0.0000 |") !=
        std::string::npos);
}

// ---------------------------------------------------------------------------
// Config plumbing

TEST_CASE("experiment config round-trips through JSON") {
  ExperimentConfig cfg;
  cfg.db_stretch = DbStretchMode::kSweep;
  cfg.sweep_magnitude = 0.3;
  cfg.top_n = 7;
  cfg.subset_size = 6;
  cfg.selection = SelectionMetric::kMinReprojection;
  cfg.stretch_enabled = true;
  cfg.fix_z = true;
  cfg.subset_cap = 321;
  cfg.n_mask_samples = 123;
  cfg.n_mesh_samples = 456;
  cfg.n_f1_samples = 789;
  cfg.f1_tau = 0.25;
  cfg.grid.n_azimuth = 12;
  cfg.grid.n_samples = 222;
  cfg.seed = 99;
  cfg.jobs = 3;

  nlohmann::json j;
  to_json(j, cfg);
  ExperimentConfig back;
  from_json(j, back);
  CHECK(back.db_stretch == DbStretchMode::kSweep);
  CHECK(back.sweep_magnitude == 0.3);
  CHECK(back.top_n == 7);
  CHECK(back.subset_size == 6);
  CHECK(back.selection == SelectionMetric::kMinReprojection);
  CHECK(back.stretch_enabled);
  CHECK(back.fix_z);
  CHECK(back.subset_cap == 321);
  CHECK(back.n_mask_samples == 123);
  CHECK(back.n_mesh_samples == 456);
  CHECK(back.n_f1_samples == 789);
  CHECK(back.f1_tau == 0.25);
  CHECK(back.grid.n_azimuth == 12);
  CHECK(back.grid.n_samples == 222);
  CHECK(back.seed == 99);
  CHECK(back.jobs == 3);

  // Partial JSON keeps defaults for everything absent.
  ExperimentConfig partial;
  from_json(nlohmann::json{{"top_n", 5}}, partial);
  CHECK(partial.top_n == 5);
  CHECK(partial.subset_size == ExperimentConfig{}.subset_size);
}

TEST_CASE("scene specs round-trip through JSON bitwise") {
  const auto zoo = default_zoo();
  SceneSpec spec = basic_spec(zoo[5].mesh, 71);
  spec.id = "scene_0042";
  spec.model_id = zoo[5].id;
  const Aabb box = bounding_box(zoo[5].mesh);
  spec.gt_stretch = axis_stretch_spec(box, Vec3(0.017, -0.093, 0.21));
  spec.n_matches = 9;
  spec.inlier_count = 3;
  spec.pixel_noise_sigma = 1.75;
  spec.mask_morph = -1;

  nlohmann::json j;
  to_json(j, spec);
  const nlohmann::json reparsed = nlohmann::json::parse(j.dump());
  SceneSpec back;
  from_json(reparsed, back);
  CHECK(back.id == spec.id);
  CHECK(back.model_id == spec.model_id);
  CHECK((back.gt_pose.theta - spec.gt_pose.theta).norm() == 0.0);
  CHECK((back.gt_pose.t - spec.gt_pose.t).norm() == 0.0);
  REQUIRE(back.gt_stretch.planes.size() == 3);
  for (std::size_t p = 0; p < 3; ++p) {
    CHECK(back.gt_stretch.tau[p] == spec.gt_stretch.tau[p]);
  }
  CHECK(back.n_matches == 9);
  CHECK(back.inlier_count == 3);
  CHECK(back.pixel_noise_sigma == 1.75);
  CHECK(back.mask_morph == -1);
  CHECK(back.seed == spec.seed);
  CHECK(back.k.fx == spec.k.fx);
}

TEST_CASE("experiment config validation flags out-of-range values") {
  ExperimentConfig cfg;
  cfg.stretch_enabled = false;
  cfg.subset_size = 4;
  validate_config(cfg);  // baseline is fine

  ExperimentConfig bad = cfg;
  bad.top_n = 0;
  CHECK_THROWS_AS(validate_config(bad), std::invalid_argument);
  bad = cfg;
  bad.subset_size = 2;
  CHECK_THROWS_AS(validate_config(bad), std::invalid_argument);
  bad = cfg;
  bad.stretch_enabled = true;
  bad.subset_size = 5;
  CHECK_THROWS_AS(validate_config(bad), std::invalid_argument);
  bad = cfg;
  bad.sweep_magnitude = 0.9;
  CHECK_THROWS_AS(validate_config(bad), std::invalid_argument);
  bad = cfg;
  bad.subset_cap = 0;
  CHECK_THROWS_AS(validate_config(bad), std::invalid_argument);
  bad = cfg;
  bad.n_f1_samples = 0;
  CHECK_THROWS_AS(validate_config(bad), std::invalid_argument);
  bad = cfg;
  bad.f1_tau = 0.0;
  CHECK_THROWS_AS(validate_config(bad), std::invalid_argument);
  bad = cfg;
  bad.jobs = 0;
  CHECK_THROWS_AS(validate_config(bad), std::invalid_argument);
  bad = cfg;
  bad.grid.n_azimuth = 0;
  CHECK_THROWS_AS(validate_config(bad), std::runtime_error);
}

TEST_CASE("mode names parse both ways and reject junk") {
  for (DbStretchMode m : {DbStretchMode::kNone, DbStretchMode::kRandom,
                          DbStretchMode::kSweep}) {
    CHECK(db_stretch_mode_from_string(to_string(m)) == m);
  }
  for (SelectionMetric m :
       {SelectionMetric::kSilhouetteQ02, SelectionMetric::kSilhouetteQ10,
        SelectionMetric::kMinReprojection}) {
    CHECK(selection_metric_from_string(to_string(m)) == m);
  }
  for (AblationAxis a : {AblationAxis::kMatchCount, AblationAxis::kTopN,
                         AblationAxis::kSelectionMetric,
                         AblationAxis::kDbSize}) {
    CHECK(ablation_axis_from_string(to_string(a)) == a);
  }
  CHECK_THROWS_AS(db_stretch_mode_from_string("static"),
                  std::invalid_argument);
  CHECK_THROWS_AS(selection_metric_from_string("iou"), std::invalid_argument);
  CHECK_THROWS_AS(ablation_axis_from_string("noise"), std::invalid_argument);
}
