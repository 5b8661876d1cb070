/* SPDX-FileCopyrightText: 2026 The stretchfit Authors
 * SPDX-License-Identifier: Apache-2.0 */

#include "stretchfit/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "stretchfit/parallel.hpp"
#include "stretchfit/rng.hpp"

namespace stretchfit {

namespace {

// Stream keys for deriving per-purpose child seeds.
constexpr std::uint64_t kSilhouetteKey = 0x51107e77ULL;
constexpr std::uint64_t kInlierKey = 0x121e1e55ULL;
constexpr std::uint64_t kNoiseKey = 0x2017e0baULL;
constexpr std::uint64_t kOutlierPixelKey = 0x07715e17ULL;
constexpr std::uint64_t kOutlierPointKey = 0x07715e18ULL;
constexpr std::uint64_t kShuffleKey = 0x5affa7e5ULL;
constexpr std::uint64_t kSceneKey = 0x5ce9e000ULL;
constexpr std::uint64_t kDbKey = 0xdb5ee9ULL;

std::string scene_dir_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "scene_%04zu", index);
  return buf;
}

}  // namespace

std::string to_string(DbStretchMode mode) {
  switch (mode) {
    case DbStretchMode::kNone: return "none";
    case DbStretchMode::kRandom: return "random";
    case DbStretchMode::kSweep: return "sweep";
  }
  throw std::invalid_argument("unknown db stretch mode");
}

std::string to_string(SelectionMetric metric) {
  switch (metric) {
    case SelectionMetric::kSilhouetteQ02: return "silhouette-q0.2";
    case SelectionMetric::kSilhouetteQ10: return "silhouette-q1.0";
    case SelectionMetric::kMinReprojection: return "min-reprojection";
  }
  throw std::invalid_argument("unknown selection metric");
}

DbStretchMode db_stretch_mode_from_string(const std::string& s) {
  if (s == "none") return DbStretchMode::kNone;
  if (s == "random") return DbStretchMode::kRandom;
  if (s == "sweep") return DbStretchMode::kSweep;
  throw std::invalid_argument("unknown db stretch mode '" + s + "'");
}

SelectionMetric selection_metric_from_string(const std::string& s) {
  if (s == "silhouette-q0.2") return SelectionMetric::kSilhouetteQ02;
  if (s == "silhouette-q1.0") return SelectionMetric::kSilhouetteQ10;
  if (s == "min-reprojection") return SelectionMetric::kMinReprojection;
  throw std::invalid_argument("unknown selection metric '" + s + "'");
}

std::string to_string(AblationAxis axis) {
  switch (axis) {
    case AblationAxis::kMatchCount: return "match-count";
    case AblationAxis::kTopN: return "top-n";
    case AblationAxis::kSelectionMetric: return "selection-metric";
    case AblationAxis::kDbSize: return "db-size";
  }
  throw std::invalid_argument("unknown ablation axis");
}

AblationAxis ablation_axis_from_string(const std::string& s) {
  if (s == "match-count") return AblationAxis::kMatchCount;
  if (s == "top-n") return AblationAxis::kTopN;
  if (s == "selection-metric") return AblationAxis::kSelectionMetric;
  if (s == "db-size") return AblationAxis::kDbSize;
  throw std::invalid_argument("unknown ablation axis '" + s + "'");
}

void validate_scene_spec(const SceneSpec& spec) {
  validate_intrinsics(spec.k);
  if (spec.n_matches < 1) {
    throw std::invalid_argument("scene: need at least one match");
  }
  if (spec.inlier_count < 0 || spec.inlier_count > spec.n_matches) {
    throw std::invalid_argument("scene: inlier_count must be in [0, n_matches]");
  }
  if (spec.pixel_noise_sigma < 0.0) {
    throw std::invalid_argument("scene: negative pixel noise");
  }
  if (!spec.gt_stretch.planes.empty()) validate_spec(spec.gt_stretch);
}

Scene generate_scene(const SceneSpec& spec, const TriMesh& model,
                     int n_silhouette) {
  validate_scene_spec(spec);
  validate_mesh(model);
  if (n_silhouette < 1) {
    throw std::invalid_argument("scene: need silhouette samples");
  }

  const bool stretched = !spec.gt_stretch.planes.empty();
  const TriMesh posed_model =
      stretched ? stretch_mesh(model, spec.gt_stretch) : model;

  // GT silhouette mask.
  const SurfaceSample sil = sample_surface(
      posed_model, n_silhouette, mix_seed(spec.seed, kSilhouetteKey));
  std::vector<Vec2> sil_px;
  sil_px.reserve(sil.points.size());
  for (const Vec3& p : sil.points) {
    const Projection pr = project(p, spec.gt_pose, spec.k);
    if (pr.behind) {
      throw std::runtime_error("scene '" + spec.id +
                               "': model behind camera");
    }
    sil_px.push_back(pr.uv);
  }
  Scene scene;
  scene.spec = spec;
  scene.mask = stamp_mask(sil_px, spec.k.width, spec.k.height);
  if (spec.mask_morph > 0) scene.mask = dilate(scene.mask, spec.mask_morph);
  if (spec.mask_morph < 0) scene.mask = erode(scene.mask, -spec.mask_morph);
  if (scene.mask.foreground_count() == 0) {
    throw std::runtime_error("scene '" + spec.id + "': empty mask");
  }

  // Inliers: base-model surface points with noisy projections of their
  // stretched positions.
  Rng noise(mix_seed(spec.seed, kNoiseKey));
  if (spec.inlier_count > 0) {
    const SurfaceSample pts = sample_surface(
        model, spec.inlier_count, mix_seed(spec.seed, kInlierKey));
    for (const Vec3& x : pts.points) {
      const Vec3 xs = stretched ? stretch_point(x, spec.gt_stretch) : x;
      const Projection pr = project(xs, spec.gt_pose, spec.k);
      if (pr.behind) {
        throw std::runtime_error("scene '" + spec.id +
                                 "': inlier behind camera");
      }
      Match m;
      m.x = x;
      m.u = pr.uv + Vec2(noise.normal(0.0, spec.pixel_noise_sigma),
                         noise.normal(0.0, spec.pixel_noise_sigma));
      scene.matches.push_back(m);
    }
  }

  // Outliers: a random mask pixel paired with an unrelated surface point.
  const int n_out = spec.n_matches - spec.inlier_count;
  if (n_out > 0) {
    const std::vector<Vec2> px =
        sample_mask(scene.mask, n_out, mix_seed(spec.seed, kOutlierPixelKey));
    const SurfaceSample pts = sample_surface(
        model, n_out, mix_seed(spec.seed, kOutlierPointKey));
    for (int i = 0; i < n_out; ++i) {
      Match m;
      m.u = px[static_cast<std::size_t>(i)];
      m.x = pts.points[static_cast<std::size_t>(i)];
      scene.matches.push_back(m);
    }
  }

  Rng order(mix_seed(spec.seed, kShuffleKey));
  order.shuffle(scene.matches);
  return scene;
}

Intrinsics default_scene_intrinsics() {
  Intrinsics k;
  k.fx = 500.0;
  k.fy = 500.0;
  k.cx = 320.0;
  k.cy = 240.0;
  k.width = 640;
  k.height = 480;
  return k;
}

ScenePoolConfig::ScenePoolConfig() : k(default_scene_intrinsics()) {}

std::vector<Scene> make_scenes(std::span<const ZooEntry> zoo,
                               const ScenePoolConfig& cfg) {
  if (zoo.empty()) throw std::invalid_argument("make_scenes: empty catalog");
  if (cfg.n_scenes < 1) throw std::invalid_argument("make_scenes: n_scenes");
  if (cfg.inlier_lo < 0 || cfg.inlier_lo > cfg.inlier_hi ||
      cfg.inlier_hi > cfg.n_matches) {
    throw std::invalid_argument("make_scenes: bad inlier range");
  }
  validate_intrinsics(cfg.k);

  std::vector<Scene> scenes;
  scenes.reserve(static_cast<std::size_t>(cfg.n_scenes));
  for (int i = 0; i < cfg.n_scenes; ++i) {
    Rng rng(mix_seed(cfg.seed, 0x5ce5a31ULL + static_cast<std::uint64_t>(i)));
    const ZooEntry& entry = zoo[rng.index(zoo.size())];
    const Aabb box = bounding_box(entry.mesh);

    SceneSpec spec;
    spec.id = scene_dir_name(static_cast<std::size_t>(i));
    spec.model_id = entry.id;
    spec.k = cfg.k;
    spec.n_matches = cfg.n_matches;
    spec.inlier_count =
        cfg.inlier_lo +
        static_cast<int>(rng.index(
            static_cast<std::size_t>(cfg.inlier_hi - cfg.inlier_lo + 1)));
    spec.pixel_noise_sigma = cfg.pixel_noise_sigma;
    spec.mask_morph = cfg.mask_morph;
    spec.seed = mix_seed(cfg.seed, 0x5ee0ULL + static_cast<std::uint64_t>(i));

    const double azimuth = rng.uniform(0.0, 2.0 * kPi);
    const double elevation = rng.uniform(0.12, 0.65);
    const double fill = rng.uniform(0.45, 0.75);
    const double radius = 0.5 * box.extent().norm();
    spec.gt_pose = model_view_pose(
        box, azimuth, elevation, framing_distance(radius, cfg.k, fill));

    if (cfg.stretch_random) {
      spec.gt_stretch = random_stretch_spec(
          entry.mesh, mix_seed(cfg.seed, 0x57e7cULL + static_cast<std::uint64_t>(i)));
    } else if (cfg.stretch_magnitude > 0.0) {
      Vec3 tau;
      for (int a = 0; a < 3; ++a) {
        const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
        tau[a] = sign * cfg.stretch_magnitude * box.extent()[a];
      }
      spec.gt_stretch = axis_stretch_spec(box, tau);
    }

    Scene scene = generate_scene(spec, entry.mesh);
    scene.category = entry.category;
    scenes.push_back(std::move(scene));
  }
  return scenes;
}

void to_json(nlohmann::json& j, const SceneSpec& spec) {
  j = nlohmann::json{{"id", spec.id},
                     {"model_id", spec.model_id},
                     {"n_matches", spec.n_matches},
                     {"inlier_count", spec.inlier_count},
                     {"pixel_noise_sigma", spec.pixel_noise_sigma},
                     {"mask_morph", spec.mask_morph},
                     {"seed", spec.seed}};
  to_json(j["gt_pose"], spec.gt_pose);
  to_json(j["gt_stretch"], spec.gt_stretch);
  to_json(j["intrinsics"], spec.k);
}

void from_json(const nlohmann::json& j, SceneSpec& spec) {
  spec = SceneSpec{};
  spec.id = j.value("id", spec.id);
  spec.model_id = j.value("model_id", spec.model_id);
  spec.n_matches = j.value("n_matches", spec.n_matches);
  spec.inlier_count = j.value("inlier_count", spec.inlier_count);
  spec.pixel_noise_sigma =
      j.value("pixel_noise_sigma", spec.pixel_noise_sigma);
  spec.mask_morph = j.value("mask_morph", spec.mask_morph);
  spec.seed = j.value("seed", spec.seed);
  if (j.contains("gt_pose")) from_json(j.at("gt_pose"), spec.gt_pose);
  if (j.contains("gt_stretch")) from_json(j.at("gt_stretch"), spec.gt_stretch);
  if (j.contains("intrinsics")) from_json(j.at("intrinsics"), spec.k);
}

void save_scenes(const std::string& dir, std::span<const Scene> scenes) {
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const std::string sub = dir + "/" + scene_dir_name(i);
    std::filesystem::create_directories(sub);
    nlohmann::json j;
    to_json(j["spec"], scenes[i].spec);
    j["category"] = scenes[i].category;
    std::ofstream out(sub + "/scene.json");
    if (!out) throw std::runtime_error("cannot write " + sub + "/scene.json");
    out << j.dump(2) << "\n";
    save_matches_csv(scenes[i].matches, sub + "/matches.csv");
    save_pbm(scenes[i].mask, sub + "/mask.pbm");
  }
  nlohmann::json index;
  index["count"] = scenes.size();
  std::ofstream out(dir + "/index.json");
  if (!out) throw std::runtime_error("cannot write " + dir + "/index.json");
  out << index.dump(2) << "\n";
}

std::vector<Scene> load_scenes(const std::string& dir) {
  std::ifstream in(dir + "/index.json");
  if (!in) throw std::runtime_error("cannot read " + dir + "/index.json");
  nlohmann::json index;
  try {
    in >> index;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(dir + "/index.json: " + e.what());
  }
  const auto count = index.at("count").get<std::size_t>();
  std::vector<Scene> scenes;
  scenes.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::string sub = dir + "/" + scene_dir_name(i);
    std::ifstream sj(sub + "/scene.json");
    if (!sj) throw std::runtime_error("cannot read " + sub + "/scene.json");
    nlohmann::json j;
    try {
      sj >> j;
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error(sub + "/scene.json: " + e.what());
    }
    Scene scene;
    from_json(j.at("spec"), scene.spec);
    scene.category = j.value("category", std::string{});
    scene.matches = load_matches_csv(sub + "/matches.csv");
    scene.mask = load_pbm(sub + "/mask.pbm");
    scenes.push_back(std::move(scene));
  }
  return scenes;
}

void validate_config(const ExperimentConfig& cfg) {
  if (cfg.top_n < 1) throw std::invalid_argument("config: top_n < 1");
  if (cfg.subset_size < 3) {
    throw std::invalid_argument("config: subset_size < 3");
  }
  if (cfg.stretch_enabled && cfg.subset_size < 6) {
    throw std::invalid_argument(
        "config: joint pose+stretch needs subset_size >= 6");
  }
  if (cfg.sweep_magnitude < 0.0 || cfg.sweep_magnitude > 0.8) {
    throw std::invalid_argument("config: sweep_magnitude outside [0, 0.8]");
  }
  if (cfg.subset_cap < 1) throw std::invalid_argument("config: subset_cap");
  if (cfg.n_mask_samples < 1 || cfg.n_mesh_samples < 1 ||
      cfg.n_f1_samples < 1) {
    throw std::invalid_argument("config: sample counts must be positive");
  }
  if (cfg.f1_tau <= 0.0) throw std::invalid_argument("config: f1_tau <= 0");
  if (cfg.jobs < 1) throw std::invalid_argument("config: jobs < 1");
  validate_grid(cfg.grid);
}

std::vector<DbModel> build_db_models(std::span<const ZooEntry> zoo,
                                     const ExperimentConfig& cfg) {
  std::vector<DbModel> models;
  models.reserve(zoo.size());
  for (std::size_t i = 0; i < zoo.size(); ++i) {
    DbModel m;
    m.id = zoo[i].id;
    m.category = zoo[i].category;
    m.base = zoo[i].mesh;
    switch (cfg.db_stretch) {
      case DbStretchMode::kNone:
        break;
      case DbStretchMode::kRandom:
        m.applied = random_stretch_spec(m.base, mix_seed(cfg.seed, kDbKey + i));
        break;
      case DbStretchMode::kSweep:
        if (cfg.sweep_magnitude > 0.0) {
          const Aabb box = bounding_box(m.base);
          m.applied =
              axis_stretch_spec(box, cfg.sweep_magnitude * box.extent());
        }
        break;
    }
    m.mesh = m.applied.planes.empty() ? m.base
                                      : stretch_mesh(m.base, m.applied);
    models.push_back(std::move(m));
  }
  return models;
}

PipelineDb build_pipeline_db(std::span<const ZooEntry> zoo,
                             const ExperimentConfig& cfg,
                             const Intrinsics& k) {
  PipelineDb db;
  db.models = build_db_models(zoo, cfg);
  std::vector<NamedMesh> named;
  named.reserve(db.models.size());
  for (const DbModel& m : db.models) named.push_back({m.id, m.mesh});
  db.views = build_view_database(named, cfg.grid, k,
                                 mix_seed(cfg.seed, 0xdbdbULL), cfg.jobs);
  db.index = RetrievalIndex(db.views);
  return db;
}

namespace {

struct ViewCandidate {
  bool valid = false;
  int db_model = -1;
  int view_index = -1;
  CameraPose pose;
  std::vector<double> tau;
  double score = std::numeric_limits<double>::infinity();
  double rms = 0.0;
};

SceneOutcome run_one_scene(const ExperimentConfig& cfg, const Scene& scene,
                           std::size_t scene_index,
                           const PipelineDb& db,
                           const std::unordered_map<std::string, int>& db_index,
                           const std::unordered_map<std::string, int>& zoo_index,
                           std::span<const ZooEntry> zoo) {
  SceneOutcome out;
  out.scene_id = scene.spec.id;
  const std::uint64_t h =
      mix_seed(cfg.seed, kSceneKey + static_cast<std::uint64_t>(scene_index));
  try {
    const std::vector<RenderedView> retrieved =
        retrieve(scene.mask, db.views, db.index, cfg.top_n, 1);
    const IndexedPoints mask_pts(
        sample_mask(scene.mask, cfg.n_mask_samples, mix_seed(h, 1)));

    std::unordered_map<int, SurfaceSample> sample_cache;
    ViewCandidate best;
    std::string last_error;
    for (std::size_t rank = 0; rank < retrieved.size(); ++rank) {
      const RenderedView& rv = retrieved[rank];
      const int mi = db_index.at(rv.model_id);
      const DbModel& dm = db.models[static_cast<std::size_t>(mi)];
      auto it = sample_cache.find(mi);
      if (it == sample_cache.end()) {
        it = sample_cache
                 .emplace(mi, sample_surface(
                                  dm.mesh, cfg.n_mesh_samples,
                                  mix_seed(h, 100 + static_cast<std::uint64_t>(mi)),
                                  dm.id))
                 .first;
      }

      // Matches carry base-catalog coordinates; map them onto the database
      // copy when it was deformed.
      std::vector<Match> matches(scene.matches.begin(), scene.matches.end());
      if (!dm.applied.planes.empty()) {
        for (Match& m : matches) m.x = stretch_point(m.x, dm.applied);
      }

      RobustConfig rc;
      rc.subset_size = cfg.subset_size;
      rc.q = cfg.selection == SelectionMetric::kSilhouetteQ10 ? 1.0 : 0.2;
      rc.subset_cap = cfg.subset_cap;
      rc.seed = mix_seed(h, 200 + static_cast<std::uint64_t>(rank));
      rc.jobs = 1;

      try {
        HypothesisSet hs;
        if (cfg.stretch_enabled) {
          const StretchSpec probe =
              axis_stretch_spec(bounding_box(dm.mesh), Vec3::Zero());
          JointEstimateConfig jc;
          jc.robust = rc;
          hs = estimate_pose_and_shape(matches, scene.spec.k, it->second,
                                       mask_pts, rv.pose, probe.planes, jc);
        } else {
          hs = estimate_pose(matches, scene.spec.k, it->second, mask_pts, rc);
        }
        const int sel = cfg.selection == SelectionMetric::kMinReprojection
                            ? select_by_min_reprojection(hs.candidates)
                            : hs.selected;
        if (sel < 0) continue;
        const Candidate& c = hs.candidates[static_cast<std::size_t>(sel)];
        if (c.score.value < best.score) {
          best.valid = true;
          best.db_model = mi;
          best.view_index = rv.view_index;
          best.pose = c.pose;
          best.tau = c.tau;
          best.score = c.score.value;
          best.rms = c.rms_reprojection;
        }
      } catch (const std::exception& e) {
        last_error = e.what();
      }
    }

    if (!best.valid) {
      out.failed = true;
      out.failure = last_error.empty() ? "no candidate from any retrieval"
                                       : last_error;
      return out;
    }

    const DbModel& dm = db.models[static_cast<std::size_t>(best.db_model)];
    CameraPose pose = best.pose;
    if (cfg.fix_z) pose.t.z() = scene.spec.gt_pose.t.z();

    PosedShape pred;
    pred.mesh = dm.mesh;
    if (!best.tau.empty()) {
      pred.stretch = axis_stretch_spec(bounding_box(dm.mesh), Vec3::Zero());
      pred.stretch.tau = best.tau;
    }
    pred.pose = pose;

    const auto gt_it = zoo_index.find(scene.spec.model_id);
    if (gt_it == zoo_index.end()) {
      throw std::runtime_error("GT model '" + scene.spec.model_id +
                               "' not in catalog");
    }
    PosedShape gt;
    gt.mesh = zoo[static_cast<std::size_t>(gt_it->second)].mesh;
    gt.stretch = scene.spec.gt_stretch;
    gt.pose = scene.spec.gt_pose;

    out.f1 = f1_score(pred, gt, cfg.f1_tau, cfg.n_f1_samples, mix_seed(h, 3))
                 .f1;
    out.model_id = dm.id;
    out.category = dm.category;
    out.view_index = best.view_index;
    out.pose = pose;
    out.tau = best.tau;
    out.silhouette = best.score;
    out.rms = best.rms;

    out.record.image_id = scene.spec.id;
    out.record.category = dm.category;
    out.record.confidence = confidence_from_score(best.score);
    out.record.f1_value = out.f1;
    out.record.matched_gt =
        dm.category == scene.category ? scene.spec.id : std::string{};
  } catch (const std::exception& e) {
    out.failed = true;
    out.failure = e.what();
  }
  return out;
}

}  // namespace

PipelineResult run_pipeline(const ExperimentConfig& cfg,
                            std::span<const Scene> scenes,
                            std::span<const ZooEntry> zoo,
                            const PipelineDb& db) {
  validate_config(cfg);
  if (scenes.empty()) throw std::invalid_argument("run_pipeline: no scenes");
  if (db.views.empty()) throw std::invalid_argument("run_pipeline: empty db");

  std::unordered_map<std::string, int> db_index;
  for (std::size_t i = 0; i < db.models.size(); ++i) {
    db_index[db.models[i].id] = static_cast<int>(i);
  }
  std::unordered_map<std::string, int> zoo_index;
  for (std::size_t i = 0; i < zoo.size(); ++i) {
    zoo_index[zoo[i].id] = static_cast<int>(i);
  }

  PipelineResult result;
  result.outcomes.resize(scenes.size());
  parallel_for(scenes.size(), cfg.jobs, [&](std::size_t i) {
    result.outcomes[i] =
        run_one_scene(cfg, scenes[i], i, db, db_index, zoo_index, zoo);
  });

  int failures = 0;
  double f1_sum = 0.0;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const std::string& cat =
        scenes[i].category.empty() ? "unknown" : scenes[i].category;
    ++result.n_gt[cat];
    const SceneOutcome& o = result.outcomes[i];
    if (o.failed) {
      ++failures;
      continue;
    }
    result.records.push_back(o.record);
    f1_sum += o.f1;
  }
  result.failure_rate =
      static_cast<double>(failures) / static_cast<double>(scenes.size());
  result.mean_f1 = f1_sum / static_cast<double>(scenes.size());
  result.report = ap_mesh(result.records, result.n_gt);
  return result;
}

PipelineResult run_pipeline(const ExperimentConfig& cfg,
                            std::span<const Scene> scenes,
                            std::span<const ZooEntry> zoo) {
  validate_config(cfg);
  if (scenes.empty()) throw std::invalid_argument("run_pipeline: no scenes");
  const PipelineDb db = build_pipeline_db(zoo, cfg, scenes.front().spec.k);
  return run_pipeline(cfg, scenes, zoo, db);
}

namespace {

AblationRow make_row(const std::string& label, const PipelineResult& r) {
  AblationRow row;
  row.label = label;
  row.mean_f1 = r.mean_f1;
  row.mean_ap = r.report.mean_ap;
  row.ap50 = r.report.mean_ap50;
  row.failure_rate = r.failure_rate;
  return row;
}

}  // namespace

AblationTable run_ablation(AblationAxis axis, const ExperimentConfig& base,
                           std::span<const Scene> scenes,
                           std::span<const ZooEntry> zoo) {
  validate_config(base);
  if (scenes.empty()) throw std::invalid_argument("run_ablation: no scenes");
  AblationTable table;
  table.axis = to_string(axis);

  switch (axis) {
    case AblationAxis::kMatchCount: {
      // Pose-only across the axis: the joint solver needs 6 matches, so
      // smaller subsets cannot carry the stretch variant.
      const PipelineDb db =
          build_pipeline_db(zoo, base, scenes.front().spec.k);
      for (int s : {3, 4, 5, 6, 7}) {
        ExperimentConfig cfg = base;
        cfg.subset_size = s;
        cfg.stretch_enabled = false;
        const PipelineResult r = run_pipeline(cfg, scenes, zoo, db);
        table.rows.push_back(make_row(std::to_string(s), r));
      }
      break;
    }
    case AblationAxis::kTopN: {
      const PipelineDb db =
          build_pipeline_db(zoo, base, scenes.front().spec.k);
      for (int n : {1, 2, 5, 10, 20}) {
        ExperimentConfig cfg = base;
        cfg.top_n = n;
        const PipelineResult r = run_pipeline(cfg, scenes, zoo, db);
        table.rows.push_back(make_row(std::to_string(n), r));
      }
      break;
    }
    case AblationAxis::kSelectionMetric: {
      const PipelineDb db =
          build_pipeline_db(zoo, base, scenes.front().spec.k);
      for (SelectionMetric m :
           {SelectionMetric::kSilhouetteQ02, SelectionMetric::kSilhouetteQ10,
            SelectionMetric::kMinReprojection}) {
        ExperimentConfig cfg = base;
        cfg.selection = m;
        const PipelineResult r = run_pipeline(cfg, scenes, zoo, db);
        table.rows.push_back(make_row(to_string(m), r));
      }
      break;
    }
    case AblationAxis::kDbSize: {
      // Nested prefixes of one seeded shuffle, so each fraction's database
      // contains the smaller ones.
      std::vector<std::size_t> order(zoo.size());
      std::iota(order.begin(), order.end(), std::size_t{0});
      Rng rng(mix_seed(base.seed, 0xab1eULL));
      rng.shuffle(order);
      for (double f : {0.25, 0.5, 0.75, 1.0}) {
        const auto count = std::max<std::size_t>(
            1, static_cast<std::size_t>(
                   std::lround(f * static_cast<double>(zoo.size()))));
        std::vector<ZooEntry> subset;
        for (std::size_t i = 0; i < count && i < zoo.size(); ++i) {
          subset.push_back(zoo[order[i]]);
        }
        const PipelineDb db =
            build_pipeline_db(subset, base, scenes.front().spec.k);
        const PipelineResult r = run_pipeline(base, scenes, zoo, db);
        char label[16];
        std::snprintf(label, sizeof(label), "%.2f", f);
        table.rows.push_back(make_row(label, r));
      }
      break;
    }
  }
  return table;
}

std::string AblationTable::to_csv() const {
  std::ostringstream out;
  out << axis << ",mean_f1,ap_mesh,ap50,failure_rate\n";
  for (const AblationRow& r : rows) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f,%.6f,%.6f\n",
                  r.label.c_str(), r.mean_f1, r.mean_ap, r.ap50,
                  r.failure_rate);
    out << buf;
  }
  return out.str();
}

std::string AblationTable::to_markdown() const {
  std::ostringstream out;
  out << "| " << axis << " | mean F1 | AP | AP50 | failure rate |\n";
  out << "|---|---|---|---|---|\n";
  for (const AblationRow& r : rows) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "| %s | %.4f | %.4f | %.4f | %.4f |\n",
                  r.label.c_str(), r.mean_f1, r.mean_ap, r.ap50,
                  r.failure_rate);
    out << buf;
  }
  return out.str();
}

void to_json(nlohmann::json& j, const ExperimentConfig& cfg) {
  j = nlohmann::json{{"db_stretch", to_string(cfg.db_stretch)},
                     {"sweep_magnitude", cfg.sweep_magnitude},
                     {"top_n", cfg.top_n},
                     {"subset_size", cfg.subset_size},
                     {"selection", to_string(cfg.selection)},
                     {"stretch_enabled", cfg.stretch_enabled},
                     {"fix_z", cfg.fix_z},
                     {"subset_cap", cfg.subset_cap},
                     {"n_mask_samples", cfg.n_mask_samples},
                     {"n_mesh_samples", cfg.n_mesh_samples},
                     {"n_f1_samples", cfg.n_f1_samples},
                     {"f1_tau", cfg.f1_tau},
                     {"seed", cfg.seed},
                     {"jobs", cfg.jobs}};
  to_json(j["grid"], cfg.grid);
}

void from_json(const nlohmann::json& j, ExperimentConfig& cfg) {
  cfg = ExperimentConfig{};
  if (j.contains("db_stretch")) {
    cfg.db_stretch =
        db_stretch_mode_from_string(j.at("db_stretch").get<std::string>());
  }
  cfg.sweep_magnitude = j.value("sweep_magnitude", cfg.sweep_magnitude);
  cfg.top_n = j.value("top_n", cfg.top_n);
  cfg.subset_size = j.value("subset_size", cfg.subset_size);
  if (j.contains("selection")) {
    cfg.selection =
        selection_metric_from_string(j.at("selection").get<std::string>());
  }
  cfg.stretch_enabled = j.value("stretch_enabled", cfg.stretch_enabled);
  cfg.fix_z = j.value("fix_z", cfg.fix_z);
  cfg.subset_cap = j.value("subset_cap", cfg.subset_cap);
  cfg.n_mask_samples = j.value("n_mask_samples", cfg.n_mask_samples);
  cfg.n_mesh_samples = j.value("n_mesh_samples", cfg.n_mesh_samples);
  cfg.n_f1_samples = j.value("n_f1_samples", cfg.n_f1_samples);
  cfg.f1_tau = j.value("f1_tau", cfg.f1_tau);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.jobs = j.value("jobs", cfg.jobs);
  if (j.contains("grid")) from_json(j.at("grid"), cfg.grid);
}

void to_json(nlohmann::json& j, const SceneOutcome& o) {
  j = nlohmann::json{{"scene_id", o.scene_id}, {"failed", o.failed}};
  if (o.failed) {
    j["failure"] = o.failure;
    return;
  }
  j["model_id"] = o.model_id;
  j["category"] = o.category;
  j["view_index"] = o.view_index;
  to_json(j["pose"], o.pose);
  j["tau"] = o.tau;
  j["silhouette_px"] = o.silhouette;
  j["rms_px"] = o.rms;
  j["f1"] = o.f1;
  to_json(j["record"], o.record);
}

void to_json(nlohmann::json& j, const PipelineResult& r) {
  to_json(j["report"], r.report);
  j["n_gt"] = r.n_gt;
  j["failure_rate"] = r.failure_rate;
  j["mean_f1"] = r.mean_f1;
  j["outcomes"] = nlohmann::json::array();
  for (const SceneOutcome& o : r.outcomes) {
    nlohmann::json oj;
    to_json(oj, o);
    j["outcomes"].push_back(std::move(oj));
  }
}

}  // namespace stretchfit
