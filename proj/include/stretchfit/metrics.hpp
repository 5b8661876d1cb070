/* SPDX-FileCopyrightText: 2026 The stretchfit Authors
 * SPDX-License-Identifier: Apache-2.0 */

#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "stretchfit/camera.hpp"
#include "stretchfit/mesh.hpp"
#include "stretchfit/stretch.hpp"

namespace stretchfit {

struct F1Result {
  double precision = 0.0;  // fraction of pred samples within tau of GT
  double recall = 0.0;     // fraction of GT samples within tau of pred
  double f1 = 0.0;
  double tau = 0.3;
};

/// A mesh with its stretch and rigid pose into the evaluation frame.
struct PosedShape {
  TriMesh mesh;
  StretchSpec stretch;  // empty = rigid
  CameraPose pose;
};

/// Bidirectional fraction-of-points-within-tau on already-prepared clouds.
F1Result f1_points(std::span<const Vec3> pred, std::span<const Vec3> gt,
                   double tau);

/// Poses both shapes into the common frame, rescales both by the factor that
/// brings the GT's longest bbox edge to 10, samples n points per shape, and
/// scores fraction-within-tau both ways. tau is in post-rescale units.
/// Both clouds are drawn with sample_surface(mesh, n_samples, seed), so the
/// same seed drives both draws and identical shapes score exactly 1.
F1Result f1_score(const PosedShape& pred, const PosedShape& gt,
                  double tau = 0.3, int n_samples = 10000,
                  std::uint64_t seed = 0);

struct DetectionRecord {
  std::string image_id;
  std::string category;     // predicted category
  double confidence = 0.0;
  double f1_value = 0.0;
  std::string matched_gt;   // empty when the prediction hit no same-category GT
};

/// Ranking confidence from a silhouette score in pixels.
double confidence_from_score(double score_px, double sigma_px = 10.0);

/// Per-category average precision at a single F1 cutoff. A record is a true
/// positive when its f1_value exceeds the threshold and its GT is not already
/// matched by a higher-confidence record. Precision-recall area uses the
/// monotone precision envelope over all points.
std::map<std::string, double> average_precision(
    std::span<const DetectionRecord> records,
    const std::map<std::string, int>& n_gt, double threshold);

struct ApReport {
  std::vector<std::string> categories;  // sorted, >= 1 GT each
  std::map<std::string, double> ap;     // mean over thresholds 0.50..0.95
  std::map<std::string, double> ap50;
  std::map<std::string, double> ap75;
  double mean_ap = 0.0;
  double mean_ap50 = 0.0;
  double mean_ap75 = 0.0;
};

inline constexpr double kApThresholdLo = 0.50;
inline constexpr double kApThresholdStep = 0.05;
inline constexpr int kApThresholdCount = 10;

ApReport ap_mesh(std::span<const DetectionRecord> records,
                 const std::map<std::string, int>& n_gt);

/// One JSON object per line.
void save_records_jsonl(const std::string& path,
                        std::span<const DetectionRecord> records);
std::vector<DetectionRecord> load_records_jsonl(const std::string& path);

/// Fixed-width human-readable summary of an ApReport.
std::string format_ap_table(const ApReport& report);

void to_json(nlohmann::json& j, const F1Result& r);
void to_json(nlohmann::json& j, const DetectionRecord& r);
void from_json(const nlohmann::json& j, DetectionRecord& r);
void to_json(nlohmann::json& j, const ApReport& r);

}  // namespace stretchfit
