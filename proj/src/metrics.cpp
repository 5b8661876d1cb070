/* SPDX-FileCopyrightText: 2026 The stretchfit Authors
 * SPDX-License-Identifier: Apache-2.0 */

#include "stretchfit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "stretchfit/rng.hpp"

namespace stretchfit {

namespace {

/// Hash grid over 3D points with cell size = query radius, so any_within
/// only has to look at the 27 neighboring cells.
class PointGrid3 {
 public:
  PointGrid3(std::span<const Vec3> points, double cell)
      : points_(points), cell_(cell) {
    cells_.reserve(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
      cells_[key(points[i])].push_back(static_cast<int>(i));
    }
  }

  bool any_within(const Vec3& q, double r) const {
    const double r2 = r * r;
    const long long cx = coord(q.x());
    const long long cy = coord(q.y());
    const long long cz = coord(q.z());
    for (long long dz = -1; dz <= 1; ++dz) {
      for (long long dy = -1; dy <= 1; ++dy) {
        for (long long dx = -1; dx <= 1; ++dx) {
          const auto it = cells_.find(pack(cx + dx, cy + dy, cz + dz));
          if (it == cells_.end()) continue;
          for (int i : it->second) {
            if ((points_[static_cast<std::size_t>(i)] - q).squaredNorm() <= r2) {
              return true;
            }
          }
        }
      }
    }
    return false;
  }

 private:
  long long coord(double v) const {
    return static_cast<long long>(std::floor(v / cell_));
  }
  long long pack(long long x, long long y, long long z) const {
    // 21 bits per axis, offset to keep them non-negative.
    const long long m = 1ll << 20;
    return ((x + m) << 42) | ((y + m) << 21) | (z + m);
  }
  long long key(const Vec3& p) const {
    return pack(coord(p.x()), coord(p.y()), coord(p.z()));
  }

  std::span<const Vec3> points_;
  double cell_;
  std::unordered_map<long long, std::vector<int>> cells_;
};

double fraction_within(std::span<const Vec3> from, const PointGrid3& to,
                       double tau) {
  if (from.empty()) return 0.0;
  int hits = 0;
  for (const Vec3& p : from) {
    if (to.any_within(p, tau)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(from.size());
}

std::vector<Vec3> posed_cloud(const PosedShape& shape, int n_samples,
                              std::uint64_t seed) {
  const TriMesh stretched = shape.stretch.planes.empty()
                                ? shape.mesh
                                : stretch_mesh(shape.mesh, shape.stretch);
  const SurfaceSample s = sample_surface(stretched, n_samples, seed);
  const Mat3 r = shape.pose.rotation();
  std::vector<Vec3> out;
  out.reserve(s.points.size());
  for (const Vec3& p : s.points) out.push_back(r * p + shape.pose.t);
  return out;
}

TriMesh posed_mesh(const PosedShape& shape) {
  TriMesh m = shape.stretch.planes.empty() ? shape.mesh
                                           : stretch_mesh(shape.mesh, shape.stretch);
  const Mat3 r = shape.pose.rotation();
  for (auto& v : m.vertices) v = r * v + shape.pose.t;
  return m;
}

}  // namespace

F1Result f1_points(std::span<const Vec3> pred, std::span<const Vec3> gt,
                   double tau) {
  if (tau <= 0.0) throw std::runtime_error("f1: tau must be positive");
  F1Result r;
  r.tau = tau;
  if (pred.empty() || gt.empty()) return r;
  const PointGrid3 gt_grid(gt, tau);
  const PointGrid3 pred_grid(pred, tau);
  r.precision = fraction_within(pred, gt_grid, tau);
  r.recall = fraction_within(gt, pred_grid, tau);
  r.f1 = (r.precision + r.recall > 0.0)
             ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
             : 0.0;
  return r;
}

F1Result f1_score(const PosedShape& pred, const PosedShape& gt, double tau,
                  int n_samples, std::uint64_t seed) {
  if (n_samples < 1) throw std::runtime_error("f1: need at least one sample");
  validate_mesh(pred.mesh);
  validate_mesh(gt.mesh);

  // Rescale factor and center come from the posed GT, and apply to both
  // shapes so their relative alignment is preserved.
  const TriMesh gt_posed = posed_mesh(gt);
  const Aabb gt_box = bounding_box(gt_posed);
  const double longest = gt_box.longest_edge();
  if (longest <= 0.0) throw std::runtime_error("f1: degenerate GT extent");
  const double scale = 10.0 / longest;
  const Vec3 center = 0.5 * (gt_box.min + gt_box.max);

  // Both clouds are drawn with the caller's seed: identical shapes then
  // yield identical clouds, so self-comparison scores exactly 1,
  // pred/gt swaps are exactly symmetric, and the sampling is reproducible
  // from the outside via sample_surface(mesh, n_samples, seed).
  std::vector<Vec3> pred_pts = posed_cloud(pred, n_samples, seed);
  std::vector<Vec3> gt_pts = posed_cloud(gt, n_samples, seed);
  for (auto& p : pred_pts) p = (p - center) * scale;
  for (auto& p : gt_pts) p = (p - center) * scale;
  return f1_points(pred_pts, gt_pts, tau);
}

double confidence_from_score(double score_px, double sigma_px) {
  return std::exp(-score_px / sigma_px);
}

namespace {

/// Precision-recall pairs in confidence order for one category.
struct PrCurve {
  std::vector<double> precision;
  std::vector<double> recall;
};

PrCurve pr_curve(std::vector<const DetectionRecord*> records, int n_gt,
                 double threshold) {
  std::stable_sort(records.begin(), records.end(),
                   [](const DetectionRecord* a, const DetectionRecord* b) {
                     return a->confidence > b->confidence;
                   });
  PrCurve curve;
  std::unordered_map<std::string, bool> matched;
  int tp = 0;
  int fp = 0;
  for (const DetectionRecord* r : records) {
    const bool hit = !r->matched_gt.empty() && r->f1_value > threshold &&
                     !matched[r->matched_gt];
    if (hit) {
      matched[r->matched_gt] = true;
      ++tp;
    } else {
      ++fp;
    }
    curve.precision.push_back(static_cast<double>(tp) /
                              static_cast<double>(tp + fp));
    curve.recall.push_back(static_cast<double>(tp) / static_cast<double>(n_gt));
  }
  return curve;
}

double envelope_area(PrCurve curve) {
  if (curve.precision.empty()) return 0.0;
  // Monotone precision envelope from the right.
  for (std::size_t i = curve.precision.size() - 1; i > 0; --i) {
    curve.precision[i - 1] = std::max(curve.precision[i - 1], curve.precision[i]);
  }
  double area = 0.0;
  double prev_recall = 0.0;
  for (std::size_t i = 0; i < curve.precision.size(); ++i) {
    area += (curve.recall[i] - prev_recall) * curve.precision[i];
    prev_recall = curve.recall[i];
  }
  return area;
}

}  // namespace

std::map<std::string, double> average_precision(
    std::span<const DetectionRecord> records,
    const std::map<std::string, int>& n_gt, double threshold) {
  for (const DetectionRecord& r : records) {
    if (!std::isfinite(r.confidence)) {
      throw std::runtime_error("average_precision: non-finite confidence");
    }
  }
  std::map<std::string, std::vector<const DetectionRecord*>> by_category;
  for (const DetectionRecord& r : records) {
    by_category[r.category].push_back(&r);
  }
  std::map<std::string, double> ap;
  for (const auto& [category, count] : n_gt) {
    if (count < 1) continue;
    const auto it = by_category.find(category);
    if (it == by_category.end()) {
      ap[category] = 0.0;
      continue;
    }
    ap[category] = envelope_area(pr_curve(it->second, count, threshold));
  }
  return ap;
}

ApReport ap_mesh(std::span<const DetectionRecord> records,
                 const std::map<std::string, int>& n_gt) {
  ApReport report;
  for (const auto& [category, count] : n_gt) {
    if (count >= 1) report.categories.push_back(category);
  }
  std::map<std::string, double> sums;
  for (int ti = 0; ti < kApThresholdCount; ++ti) {
    const double threshold = kApThresholdLo + kApThresholdStep * ti;
    const auto ap = average_precision(records, n_gt, threshold);
    for (const auto& [category, value] : ap) sums[category] += value;
    if (ti == 0) report.ap50 = ap;
    if (ti == 5) report.ap75 = ap;
  }
  for (const std::string& category : report.categories) {
    report.ap[category] = sums[category] / kApThresholdCount;
  }
  if (!report.categories.empty()) {
    const double n = static_cast<double>(report.categories.size());
    for (const std::string& category : report.categories) {
      report.mean_ap += report.ap[category] / n;
      report.mean_ap50 += report.ap50[category] / n;
      report.mean_ap75 += report.ap75[category] / n;
    }
  }
  return report;
}

void save_records_jsonl(const std::string& path,
                        std::span<const DetectionRecord> records) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const DetectionRecord& r : records) {
    out << nlohmann::json(r).dump() << "\n";
  }
}

std::vector<DetectionRecord> load_records_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::vector<DetectionRecord> records;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      records.push_back(nlohmann::json::parse(line).get<DetectionRecord>());
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " +
                               e.what());
    }
  }
  return records;
}

std::string format_ap_table(const ApReport& report) {
  std::ostringstream out;
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%-16s %8s %8s %8s\n", "category", "AP",
                "AP50", "AP75");
  out << buf;
  auto row = [&](const std::string& name, double ap, double ap50, double ap75) {
    std::snprintf(buf, sizeof(buf), "%-16s %8.1f %8.1f %8.1f\n", name.c_str(),
                  100.0 * ap, 100.0 * ap50, 100.0 * ap75);
    out << buf;
  };
  for (const std::string& category : report.categories) {
    row(category, report.ap.at(category), report.ap50.at(category),
        report.ap75.at(category));
  }
  row("mean", report.mean_ap, report.mean_ap50, report.mean_ap75);
  return out.str();
}

void to_json(nlohmann::json& j, const F1Result& r) {
  j = nlohmann::json{{"precision", r.precision},
                     {"recall", r.recall},
                     {"f1", r.f1},
                     {"tau", r.tau}};
}

void to_json(nlohmann::json& j, const DetectionRecord& r) {
  j = nlohmann::json{{"image_id", r.image_id},
                     {"category", r.category},
                     {"confidence", r.confidence},
                     {"f1_value", r.f1_value},
                     {"matched_gt", r.matched_gt}};
}

void from_json(const nlohmann::json& j, DetectionRecord& r) {
  j.at("image_id").get_to(r.image_id);
  j.at("category").get_to(r.category);
  j.at("confidence").get_to(r.confidence);
  j.at("f1_value").get_to(r.f1_value);
  r.matched_gt = j.value("matched_gt", std::string());
}

void to_json(nlohmann::json& j, const ApReport& r) {
  j = nlohmann::json{{"categories", r.categories},
                     {"ap", r.ap},
                     {"ap50", r.ap50},
                     {"ap75", r.ap75},
                     {"mean_ap", r.mean_ap},
                     {"mean_ap50", r.mean_ap50},
                     {"mean_ap75", r.mean_ap75}};
}

}  // namespace stretchfit
