/* SPDX-FileCopyrightText: 2026 The stretchfit Authors
 * SPDX-License-Identifier: Apache-2.0 */

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "stretchfit/mesh.hpp"
#include "stretchfit/silhouette.hpp"

namespace stretchfit {

/// Regular view sphere: n_azimuth angles spanning 360 degrees crossed with
/// n_elevation angles from min_elevation to max_elevation inclusive. The
/// camera distance per model is set so the bounding sphere fills
/// fill_fraction of the image height.
struct ViewGrid {
  int n_azimuth = 16;
  int n_elevation = 4;
  double min_elevation = 0.0;
  double max_elevation = kPi / 4.0;
  double fill_fraction = 0.70;
  int n_samples = 600;  // surface samples per model

  int n_views() const { return n_azimuth * n_elevation; }
};

void validate_grid(const ViewGrid& grid);

struct RenderedView {
  std::string model_id;
  int view_index = 0;  // azimuth-major: index = elevation * n_azimuth + azimuth
  CameraPose pose;     // model coordinates -> camera
  std::vector<Vec2> silhouette;  // projected surface samples, px
  Mask mask;

  double score = 0.0;  // filled by retrieve
};

struct NamedMesh {
  std::string id;
  TriMesh mesh;
};

/// Camera distance that makes a bounding sphere of the given radius span
/// fill_fraction of the image height.
double framing_distance(double radius, const Intrinsics& k, double fill_fraction);

/// Pose on the view sphere around the mesh's bounding-box center.
CameraPose model_view_pose(const Aabb& box, double azimuth, double elevation,
                           double distance);

/// One RenderedView per (model, grid view); deterministic in `seed`, and the
/// (model, view) renders are an order-independent parallel map.
std::vector<RenderedView> build_view_database(std::span<const NamedMesh> models,
                                              const ViewGrid& grid,
                                              const Intrinsics& k,
                                              std::uint64_t seed, int jobs = 1);

/// Query-side point budget for scoring. View silhouettes are scored at full
/// resolution; the query is thinned with a deterministic stride so database
/// scans stay interactive. Mask point clouds are denser than view
/// silhouettes, so the asymmetry costs no ranking fidelity.
inline constexpr int kRetrievalQueryBudget = 1024;

/// Point budget per side for the coarse pass that schedules exact scoring.
/// Coarse scores only pick the evaluation order and never appear in results.
inline constexpr int kCoarseScoreBudget = 48;

/// Per-view scoring data (normalized, indexed silhouettes plus thinned
/// copies for the coarse pass), built once per database and shared
/// read-only across queries.
class RetrievalIndex {
 public:
  RetrievalIndex() = default;
  explicit RetrievalIndex(std::span<const RenderedView> db);

  std::size_t size() const { return views_.size(); }
  const IndexedPoints& view(std::size_t i) const { return views_[i]; }
  const IndexedPoints& coarse(std::size_t i) const { return coarse_[i]; }

 private:
  std::vector<IndexedPoints> views_;
  std::vector<IndexedPoints> coarse_;
};

/// Ranks database views against the query mask by truncated chamfer (q = 1)
/// between the unit-box-normalized view silhouette and the normalized query
/// points, ascending. Ties break by (model id, view index). Returns the best
/// top_n views with `score` set. When top_n covers the whole database every
/// view is scored outright; otherwise candidates are visited in coarse-score
/// order and a candidate is dropped once its partial distance sum exceeds
/// the current top-n cutoff, which cannot change the result because every
/// term is nonnegative.
std::vector<RenderedView> retrieve(const Mask& query_mask,
                                   std::span<const RenderedView> db, int top_n,
                                   int jobs = 1);

/// Same ranking with a prebuilt index; `index` must have been built from
/// this `db`.
std::vector<RenderedView> retrieve(const Mask& query_mask,
                                   std::span<const RenderedView> db,
                                   const RetrievalIndex& index, int top_n,
                                   int jobs = 1);

/// Maximum number of query points used for scoring; denser masks are thinned
/// with a deterministic stride.
inline constexpr int kMaxQueryPoints = 4096;

/// Foreground pixel centers, deterministically thinned to at most cap points.
std::vector<Vec2> mask_points(const Mask& mask, int cap = kMaxQueryPoints);

/// Every stride-th point for the smallest stride that fits the cap; the
/// input order is kept. cap <= 0 disables thinning.
std::vector<Vec2> thin_points(std::span<const Vec2> points, int cap);

/// Maps a point set into the unit box: translate by the bbox minimum, scale
/// by the longest bbox side (isotropic, so aspect is preserved).
std::vector<Vec2> normalize_points(std::span<const Vec2> points);

/// Directory layout: index.json plus view_NNNNN.{pbm,json,csv} per view.
void save_view_database(const std::string& dir,
                        std::span<const RenderedView> db);
std::vector<RenderedView> load_view_database(const std::string& dir);

void to_json(nlohmann::json& j, const ViewGrid& grid);
void from_json(const nlohmann::json& j, ViewGrid& grid);

}  // namespace stretchfit
