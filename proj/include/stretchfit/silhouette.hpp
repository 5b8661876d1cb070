/* SPDX-FileCopyrightText: 2026 The stretchfit Authors
 * SPDX-License-Identifier: Apache-2.0 */

#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "stretchfit/camera.hpp"
#include "stretchfit/geometry.hpp"
#include "stretchfit/mesh.hpp"
#include "stretchfit/stretch.hpp"

namespace stretchfit {

/// Binary segmentation raster, row-major, foreground = true.
struct Mask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> grid;  // width * height entries

  bool at(int x, int y) const {
    return grid[static_cast<std::size_t>(y) * width + x] != 0;
  }
  void set(int x, int y, bool v) {
    grid[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0;
  }
  int foreground_count() const;
};

Mask make_mask(int width, int height);

/// PBM raster (P1 ASCII or P4 binary), foreground = 1.
Mask load_pbm(const std::string& path);
void save_pbm(const Mask& mask, const std::string& path);  // writes P4

Mask dilate(const Mask& mask, int iterations = 1);
Mask erode(const Mask& mask, int iterations = 1);

/// Intersection-over-union of two same-sized masks.
double mask_iou(const Mask& a, const Mask& b);

/// n points uniform over the foreground region (pixel square + sub-pixel
/// jitter), deterministic per seed. Throws on an empty mask.
std::vector<Vec2> sample_mask(const Mask& mask, int n, std::uint64_t seed);

/// Uniform-grid nearest-neighbor index over a fixed 2D point set. Queries
/// use an expanding ring search and return exact nearest distances.
class PointGrid2 {
 public:
  explicit PointGrid2(std::span<const Vec2> points);

  /// Squared distance to the nearest indexed point.
  double nearest_dist2(const Vec2& query) const;

  /// Squared distance to the nearest indexed point other than `skip`.
  double nearest_dist2_excluding(const Vec2& query, int skip) const;

  std::size_t size() const { return n_points_; }

 private:
  double search(const Vec2& query, int skip) const;

  // Points are stored grouped by cell so a cell scan is one contiguous run.
  std::size_t n_points_ = 0;
  std::vector<Vec2> cell_points_;  // CSR payload, grouped by cell
  std::vector<int> cell_ids_;      // original index per payload entry
  std::vector<int> cell_start_;    // CSR offsets, nx*ny+1
  double origin_x_ = 0.0, origin_y_ = 0.0;
  double cell_ = 1.0;
  int nx_ = 1, ny_ = 1;
};

/// Mean distance from each point to its nearest other point.
double mean_nn_spacing(std::span<const Vec2> points);

/// A 2D point set bundled with its nearest-neighbor index, built once and
/// shared read-only across scoring calls.
class IndexedPoints {
 public:
  explicit IndexedPoints(std::vector<Vec2> points)
      : points_(std::move(points)), grid_(points_) {}

  std::span<const Vec2> points() const { return points_; }
  const PointGrid2& grid() const { return grid_; }

 private:
  std::vector<Vec2> points_;
  PointGrid2 grid_;
};

struct SilhouetteScore {
  double value = std::numeric_limits<double>::infinity();  // px, lower = better
  int n_model_points = 0;
  int n_mask_points = 0;
  double q = 0.2;

  bool valid() const { return std::isfinite(value); }
};

/// How the truncation fraction is applied to the bidirectional
/// nearest-neighbor distances.
enum class ChamferPooling {
  kPooled,        // top q of the pooled |a|+|b| distances
  kPerDirection,  // top q of each direction separately, then averaged
};

/// Bidirectional nearest-neighbor distance between two point sets,
/// aggregated as the mean of the largest fraction q of distances. q = 1
/// gives the plain symmetric mean.
SilhouetteScore truncated_chamfer(std::span<const Vec2> a,
                                  std::span<const Vec2> b, double q = 0.2,
                                  ChamferPooling pooling = ChamferPooling::kPooled);

/// Same, with a prebuilt index for the b side.
SilhouetteScore truncated_chamfer(std::span<const Vec2> a,
                                  const IndexedPoints& b, double q = 0.2,
                                  ChamferPooling pooling = ChamferPooling::kPooled);

/// Same, with prebuilt indexes on both sides.
SilhouetteScore truncated_chamfer(const IndexedPoints& a,
                                  const IndexedPoints& b, double q = 0.2,
                                  ChamferPooling pooling = ChamferPooling::kPooled);

/// Stretches the model samples, projects them under (pose, k), and scores
/// the silhouette overlap against the mask points. Infinite if any sample
/// falls behind the camera.
SilhouetteScore score_pose(const SurfaceSample& mesh_samples,
                           const StretchSpec& spec, const CameraPose& pose,
                           const Intrinsics& k, const IndexedPoints& mask_points,
                           double q = 0.2,
                           ChamferPooling pooling = ChamferPooling::kPooled);

/// Rasterizes a point cloud by stamping a disk at every point. The radius is
/// radius_scale times the mean nearest-neighbor spacing of the points, so a
/// well-sampled model produces a connected blob.
Mask stamp_mask(std::span<const Vec2> points, int width, int height,
                double radius_scale = 1.5);

}  // namespace stretchfit
