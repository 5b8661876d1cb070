/* SPDX-FileCopyrightText: 2026 The stretchfit Authors
 * SPDX-License-Identifier: Apache-2.0 */

#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "stretchfit/metrics.hpp"
#include "stretchfit/optimize.hpp"
#include "stretchfit/retrieval.hpp"
#include "stretchfit/zoo.hpp"

namespace stretchfit {

/// How the retrieval database is deformed relative to the scene objects.
enum class DbStretchMode {
  kNone,    // database models used as-is
  kRandom,  // per-model stretch, tau ~ U[-0.2, 0.3] x bbox side
  kSweep,   // per-model extension of sweep_magnitude x bbox side on all axes
};

/// How the winning candidate is chosen inside each per-retrieval estimation.
enum class SelectionMetric {
  kSilhouetteQ02,     // truncated chamfer, top 20% of distances
  kSilhouetteQ10,     // plain symmetric chamfer (q = 1)
  kMinReprojection,   // baseline: lowest full-set reprojection RMS
};

std::string to_string(DbStretchMode mode);
std::string to_string(SelectionMetric metric);
DbStretchMode db_stretch_mode_from_string(const std::string& s);
SelectionMetric selection_metric_from_string(const std::string& s);

/// Everything needed to synthesize one image worth of pipeline input.
struct SceneSpec {
  std::string id;
  std::string model_id;
  CameraPose gt_pose;
  StretchSpec gt_stretch;   // applied to the model before rendering
  Intrinsics k;
  int n_matches = 12;
  int inlier_count = 5;
  double pixel_noise_sigma = 1.0;
  int mask_morph = 0;       // >0 dilate, <0 erode, iterations
  std::uint64_t seed = 0;
};

/// Throws std::invalid_argument on inconsistent counts; intrinsics and
/// stretch validation propagate their own errors.
void validate_scene_spec(const SceneSpec& spec);

struct Scene {
  SceneSpec spec;
  std::string category;      // of the GT model
  std::vector<Match> matches;
  Mask mask;
};

/// Synthesizes matches and a segmentation mask for the spec against the
/// given base model. Inliers project random surface points of the stretched
/// model with Gaussian pixel noise; the matches keep the base-model
/// coordinates, so the stretch is recoverable. Outliers pair a random mask
/// pixel with an unrelated surface point. The mask stamps the projected GT
/// silhouette. Category is left empty for the caller.
Scene generate_scene(const SceneSpec& spec, const TriMesh& model,
                     int n_silhouette = 1200);

Intrinsics default_scene_intrinsics();

/// Batch scene synthesis over a model catalog with randomized viewpoints.
struct ScenePoolConfig {
  int n_scenes = 20;
  int n_matches = 12;
  int inlier_lo = 4;
  int inlier_hi = 6;
  double pixel_noise_sigma = 1.0;
  /// Fixed-magnitude GT stretch: tau_i = +-magnitude x bbox side with a
  /// random sign per axis. 0 disables.
  double stretch_magnitude = 0.0;
  /// GT stretch tau_i ~ U[-0.2, 0.3] x bbox side instead (overrides the
  /// fixed magnitude).
  bool stretch_random = false;
  int mask_morph = 0;
  Intrinsics k;   // zero-initialized -> default_scene_intrinsics()
  std::uint64_t seed = 0;

  ScenePoolConfig();
};

std::vector<Scene> make_scenes(std::span<const ZooEntry> zoo,
                               const ScenePoolConfig& cfg);

/// Directory layout: index.json plus scene_NNNN/{scene.json, matches.csv,
/// mask.pbm}. The round trip is bit-exact, so pipelines re-run from dumped
/// scenes reproduce identical metrics.
void save_scenes(const std::string& dir, std::span<const Scene> scenes);
std::vector<Scene> load_scenes(const std::string& dir);

struct ExperimentConfig {
  DbStretchMode db_stretch = DbStretchMode::kNone;
  double sweep_magnitude = 0.0;   // kSweep only, fraction of bbox side
  int top_n = 10;
  int subset_size = 6;
  SelectionMetric selection = SelectionMetric::kSilhouetteQ02;
  bool stretch_enabled = true;    // joint pose+stretch vs pose-only
  bool fix_z = false;             // substitute GT depth into the winner
  int subset_cap = 924;
  int n_mask_samples = 1000;
  int n_mesh_samples = 1000;
  int n_f1_samples = 10000;
  double f1_tau = 0.3;
  ViewGrid grid;
  std::uint64_t seed = 0;
  int jobs = 1;
};

/// Throws std::invalid_argument on out-of-range values (e.g. stretch
/// enabled with subset size < 6).
void validate_config(const ExperimentConfig& cfg);

/// One retrieval-database model: the base catalog mesh plus the deformation
/// baked into the database copy (empty spec in kNone mode).
struct DbModel {
  std::string id;
  std::string category;
  TriMesh base;      // catalog mesh, used as GT reference
  TriMesh mesh;      // deformed copy that the pipeline sees
  StretchSpec applied;
};

std::vector<DbModel> build_db_models(std::span<const ZooEntry> zoo,
                                     const ExperimentConfig& cfg);

struct PipelineDb {
  std::vector<DbModel> models;
  std::vector<RenderedView> views;
  RetrievalIndex index;  // scoring index over `views`
};

PipelineDb build_pipeline_db(std::span<const ZooEntry> zoo,
                             const ExperimentConfig& cfg,
                             const Intrinsics& k);

struct SceneOutcome {
  std::string scene_id;
  bool failed = false;
  std::string failure;        // reason, empty on success
  std::string model_id;       // winning database model
  std::string category;       // its category
  int view_index = -1;        // winning retrieved view
  CameraPose pose;
  std::vector<double> tau;    // empty for pose-only runs
  double silhouette = 0.0;    // winner's silhouette score, px
  double rms = 0.0;           // winner's reprojection RMS, px
  double f1 = 0.0;
  DetectionRecord record;     // valid when !failed
};

struct PipelineResult {
  ApReport report;
  std::vector<DetectionRecord> records;
  std::vector<SceneOutcome> outcomes;
  std::map<std::string, int> n_gt;   // GT scene count per category
  double failure_rate = 0.0;
  double mean_f1 = 0.0;              // over all scenes, failures count as 0
};

/// Retrieval, per-retrieval robust estimation, cross-retrieval winner by
/// silhouette score, and F1 against the GT shape, per scene. The zoo
/// supplies GT meshes; the db may cover fewer models (db-size ablation).
/// Scenes run in parallel; per-scene failures become logged missed
/// detections. The result is independent of cfg.jobs.
PipelineResult run_pipeline(const ExperimentConfig& cfg,
                            std::span<const Scene> scenes,
                            std::span<const ZooEntry> zoo,
                            const PipelineDb& db);
PipelineResult run_pipeline(const ExperimentConfig& cfg,
                            std::span<const Scene> scenes,
                            std::span<const ZooEntry> zoo);

enum class AblationAxis { kMatchCount, kTopN, kSelectionMetric, kDbSize };

std::string to_string(AblationAxis axis);
AblationAxis ablation_axis_from_string(const std::string& s);

struct AblationRow {
  std::string label;
  double mean_f1 = 0.0;
  double mean_ap = 0.0;
  double ap50 = 0.0;
  double failure_rate = 0.0;
};

struct AblationTable {
  std::string axis;
  std::vector<AblationRow> rows;

  std::string to_csv() const;
  std::string to_markdown() const;
};

/// Re-runs the pipeline across the named axis on a fixed scene set:
/// subset size {3,4,5,6,7} (pose-only), top_n {1,2,5,10,20}, the three
/// selection metrics, or database fractions {0.25,0.5,0.75,1.0}.
AblationTable run_ablation(AblationAxis axis, const ExperimentConfig& base,
                           std::span<const Scene> scenes,
                           std::span<const ZooEntry> zoo);

void to_json(nlohmann::json& j, const SceneSpec& spec);
void from_json(const nlohmann::json& j, SceneSpec& spec);
void to_json(nlohmann::json& j, const ExperimentConfig& cfg);
void from_json(const nlohmann::json& j, ExperimentConfig& cfg);
void to_json(nlohmann::json& j, const SceneOutcome& o);
void to_json(nlohmann::json& j, const PipelineResult& r);

}  // namespace stretchfit
