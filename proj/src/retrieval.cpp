/* SPDX-FileCopyrightText: 2026 The stretchfit Authors
 * SPDX-License-Identifier: Apache-2.0 */

#include "stretchfit/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <queue>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "stretchfit/parallel.hpp"
#include "stretchfit/rng.hpp"

namespace stretchfit {

namespace fs = std::filesystem;

void validate_grid(const ViewGrid& grid) {
  if (grid.n_azimuth < 1 || grid.n_elevation < 1) {
    throw std::runtime_error("view grid: counts must be positive");
  }
  if (grid.min_elevation < 0.0 || grid.max_elevation < grid.min_elevation ||
      grid.max_elevation >= kPi / 2.0) {
    throw std::runtime_error("view grid: elevations must satisfy 0 <= min <= max < 90 deg");
  }
  if (!(grid.fill_fraction > 0.0) || grid.fill_fraction > 1.0) {
    throw std::runtime_error("view grid: fill fraction must be in (0, 1]");
  }
  if (grid.n_samples < 1) {
    throw std::runtime_error("view grid: need at least one surface sample");
  }
}

double framing_distance(double radius, const Intrinsics& k,
                        double fill_fraction) {
  if (radius <= 0.0) throw std::runtime_error("framing_distance: radius <= 0");
  return 2.0 * k.fy * radius / (fill_fraction * k.height);
}

CameraPose model_view_pose(const Aabb& box, double azimuth, double elevation,
                           double distance) {
  CameraPose pose = look_at_pose(azimuth, elevation, distance);
  const Vec3 center = 0.5 * (box.min + box.max);
  pose.t -= pose.rotation() * center;
  return pose;
}

std::vector<RenderedView> build_view_database(std::span<const NamedMesh> models,
                                              const ViewGrid& grid,
                                              const Intrinsics& k,
                                              std::uint64_t seed, int jobs) {
  if (models.empty()) {
    throw std::runtime_error("build_view_database: no models");
  }
  validate_grid(grid);
  validate_intrinsics(k);

  // One sample set per model, shared across its views.
  std::vector<SurfaceSample> samples(models.size());
  std::vector<double> distance(models.size());
  std::vector<Aabb> boxes(models.size());
  for (std::size_t m = 0; m < models.size(); ++m) {
    samples[m] = sample_surface(models[m].mesh, grid.n_samples,
                                mix_seed(seed, static_cast<std::uint64_t>(m)));
    boxes[m] = bounding_box(models[m].mesh);
    const double radius = 0.5 * boxes[m].extent().norm();
    distance[m] = framing_distance(radius, k, grid.fill_fraction);
  }

  const int per_model = grid.n_views();
  std::vector<RenderedView> db(models.size() * static_cast<std::size_t>(per_model));
  parallel_for(db.size(), jobs, [&](std::size_t slot) {
    const std::size_t m = slot / static_cast<std::size_t>(per_model);
    const int v = static_cast<int>(slot % static_cast<std::size_t>(per_model));
    const int ei = v / grid.n_azimuth;
    const int ai = v % grid.n_azimuth;
    const double azimuth = 2.0 * kPi * ai / grid.n_azimuth;
    const double elevation =
        grid.n_elevation == 1
            ? grid.min_elevation
            : grid.min_elevation + (grid.max_elevation - grid.min_elevation) *
                                       ei / (grid.n_elevation - 1);
    RenderedView view;
    view.model_id = models[m].id;
    view.view_index = v;
    view.pose = model_view_pose(boxes[m], azimuth, elevation, distance[m]);
    view.silhouette.reserve(samples[m].points.size());
    for (const Vec3& p : samples[m].points) {
      const Projection pr = project(p, view.pose, k);
      if (pr.behind) {
        throw std::runtime_error("build_view_database: sample behind camera");
      }
      view.silhouette.push_back(pr.uv);
    }
    view.mask = stamp_mask(view.silhouette, k.width, k.height);
    db[slot] = std::move(view);
  });
  return db;
}

std::vector<Vec2> mask_points(const Mask& mask, int cap) {
  std::vector<Vec2> pts;
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (mask.at(x, y)) pts.emplace_back(x + 0.5, y + 0.5);
    }
  }
  return thin_points(pts, cap);
}

std::vector<Vec2> thin_points(std::span<const Vec2> points, int cap) {
  if (cap <= 0 || static_cast<int>(points.size()) <= cap) {
    return {points.begin(), points.end()};
  }
  const std::size_t stride =
      (points.size() + static_cast<std::size_t>(cap) - 1) /
      static_cast<std::size_t>(cap);
  std::vector<Vec2> thin;
  thin.reserve(points.size() / stride + 1);
  for (std::size_t i = 0; i < points.size(); i += stride) {
    thin.push_back(points[i]);
  }
  return thin;
}

std::vector<Vec2> normalize_points(std::span<const Vec2> points) {
  if (points.empty()) return {};
  Vec2 lo = points[0];
  Vec2 hi = points[0];
  for (const Vec2& p : points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const double side = std::max((hi - lo).maxCoeff(), 1e-12);
  std::vector<Vec2> out;
  out.reserve(points.size());
  for (const Vec2& p : points) out.push_back((p - lo) / side);
  return out;
}

RetrievalIndex::RetrievalIndex(std::span<const RenderedView> db) {
  views_.reserve(db.size());
  coarse_.reserve(db.size());
  for (const RenderedView& v : db) {
    // Normalize before thinning so the unit-box frame comes from the full
    // silhouette, not from whichever points the stride keeps.
    std::vector<Vec2> norm = normalize_points(v.silhouette);
    coarse_.emplace_back(thin_points(norm, kCoarseScoreBudget));
    views_.emplace_back(std::move(norm));
  }
}

std::vector<RenderedView> retrieve(const Mask& query_mask,
                                   std::span<const RenderedView> db, int top_n,
                                   int jobs) {
  return retrieve(query_mask, db, RetrievalIndex(db), top_n, jobs);
}

namespace {

/// Scans the pooled q = 1 chamfer terms in natural order and gives up once
/// the running sum exceeds `bound`. Every term is nonnegative, so a partial
/// sum above the bound proves the full mean is above the matching cutoff.
/// Returns whether the scan ran to completion.
bool chamfer_sum_within(const IndexedPoints& a, const IndexedPoints& b,
                        double bound) {
  double sum = 0.0;
  int since_check = 0;
  const auto scan = [&](std::span<const Vec2> pts, const PointGrid2& grid) {
    for (const Vec2& p : pts) {
      sum += std::sqrt(grid.nearest_dist2(p));
      if (++since_check == 8) {
        since_check = 0;
        if (sum > bound) return false;
      }
    }
    return true;
  };
  return scan(a.points(), b.grid()) && scan(b.points(), a.grid());
}

}  // namespace

std::vector<RenderedView> retrieve(const Mask& query_mask,
                                   std::span<const RenderedView> db,
                                   const RetrievalIndex& index, int top_n,
                                   int jobs) {
  if (db.empty()) throw std::runtime_error("retrieve: empty view database");
  if (index.size() != db.size()) {
    throw std::runtime_error("retrieve: index does not match the database");
  }
  if (top_n < 1) throw std::runtime_error("retrieve: top_n must be >= 1");
  const std::vector<Vec2> query = mask_points(query_mask, 0);
  if (query.empty()) throw std::runtime_error("retrieve: query mask is empty");
  std::vector<Vec2> query_full = normalize_points(query);
  const IndexedPoints query_coarse(thin_points(query_full, kCoarseScoreBudget));
  const IndexedPoints query_norm(
      thin_points(query_full, kRetrievalQueryBudget));
  query_full.clear();

  const std::size_t n = db.size();
  const std::size_t kept = std::min<std::size_t>(
      static_cast<std::size_t>(top_n), n);
  const auto before = [&](std::size_t a, double sa, std::size_t b, double sb) {
    if (sa != sb) return sa < sb;
    if (db[a].model_id != db[b].model_id) {
      return db[a].model_id < db[b].model_id;
    }
    return db[a].view_index < db[b].view_index;
  };

  std::vector<std::pair<double, std::size_t>> exact;
  if (kept == n) {
    // Full ranking requested: score everything.
    std::vector<double> scores(n);
    parallel_for(n, jobs, [&](std::size_t i) {
      scores[i] = truncated_chamfer(index.view(i), query_norm, 1.0).value;
    });
    exact.reserve(n);
    for (std::size_t i = 0; i < n; ++i) exact.emplace_back(scores[i], i);
  } else {
    // Coarse ordering pass; scores are only a schedule.
    std::vector<double> coarse(n);
    parallel_for(n, jobs, [&](std::size_t i) {
      coarse[i] =
          truncated_chamfer(index.coarse(i), query_coarse, 1.0).value;
    });
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return before(a, coarse[a], b, coarse[b]);
    });

    // Exact pass with branch-and-bound: a candidate whose partial distance
    // sum already exceeds the current kept-th best cannot enter the result.
    std::priority_queue<double> worst_kept;
    const double nb = static_cast<double>(query_norm.points().size());
    for (const std::size_t i : order) {
      if (worst_kept.size() == kept) {
        const double na = static_cast<double>(index.view(i).points().size());
        // Tiny inflation so borderline candidates are scored outright
        // rather than decided by summation roundoff.
        const double bound = worst_kept.top() * (na + nb) * (1.0 + 1e-12);
        if (!chamfer_sum_within(index.view(i), query_norm, bound)) continue;
      }
      const double s = truncated_chamfer(index.view(i), query_norm, 1.0).value;
      exact.emplace_back(s, i);
      worst_kept.push(s);
      if (worst_kept.size() > kept) worst_kept.pop();
    }
  }

  std::sort(exact.begin(), exact.end(), [&](const auto& a, const auto& b) {
    return before(a.second, a.first, b.second, b.first);
  });
  std::vector<RenderedView> out;
  out.reserve(kept);
  for (std::size_t i = 0; i < kept; ++i) {
    out.push_back(db[exact[i].second]);
    out.back().score = exact[i].first;
  }
  return out;
}

namespace {

std::string view_stem(int i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "view_%05d", i);
  return buf;
}

void save_points_csv(const std::string& path, std::span<const Vec2> pts) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "u_px,v_px\n";
  char buf[80];
  for (const Vec2& p : pts) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", p.x(), p.y());
    out << buf;
  }
}

std::vector<Vec2> load_points_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::string line;
  std::vector<Vec2> pts;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || lineno == 1) continue;  // header
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": expected u_px,v_px");
    }
    pts.emplace_back(std::stod(line.substr(0, comma)),
                     std::stod(line.substr(comma + 1)));
  }
  return pts;
}

}  // namespace

void save_view_database(const std::string& dir,
                        std::span<const RenderedView> db) {
  fs::create_directories(dir);
  nlohmann::json index;
  index["count"] = db.size();
  for (std::size_t i = 0; i < db.size(); ++i) {
    const std::string stem = view_stem(static_cast<int>(i));
    save_pbm(db[i].mask, dir + "/" + stem + ".pbm");
    save_points_csv(dir + "/" + stem + ".csv", db[i].silhouette);
    nlohmann::json j;
    j["model_id"] = db[i].model_id;
    j["view_index"] = db[i].view_index;
    j["pose"] = db[i].pose;
    std::ofstream out(dir + "/" + stem + ".json");
    if (!out) throw std::runtime_error("cannot write view json in " + dir);
    out << j.dump(2) << "\n";
  }
  std::ofstream out(dir + "/index.json");
  if (!out) throw std::runtime_error("cannot write " + dir + "/index.json");
  out << index.dump(2) << "\n";
}

std::vector<RenderedView> load_view_database(const std::string& dir) {
  std::ifstream in(dir + "/index.json");
  if (!in) throw std::runtime_error("cannot read " + dir + "/index.json");
  nlohmann::json index = nlohmann::json::parse(in);
  const std::size_t count = index.at("count").get<std::size_t>();
  std::vector<RenderedView> db(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::string stem = dir + "/" + view_stem(static_cast<int>(i));
    std::ifstream jin(stem + ".json");
    if (!jin) throw std::runtime_error("cannot read " + stem + ".json");
    const nlohmann::json j = nlohmann::json::parse(jin);
    db[i].model_id = j.at("model_id").get<std::string>();
    db[i].view_index = j.at("view_index").get<int>();
    db[i].pose = j.at("pose").get<CameraPose>();
    db[i].silhouette = load_points_csv(stem + ".csv");
    db[i].mask = load_pbm(stem + ".pbm");
  }
  return db;
}

void to_json(nlohmann::json& j, const ViewGrid& grid) {
  j = nlohmann::json{{"n_azimuth", grid.n_azimuth},
                     {"n_elevation", grid.n_elevation},
                     {"min_elevation", grid.min_elevation},
                     {"max_elevation", grid.max_elevation},
                     {"fill_fraction", grid.fill_fraction},
                     {"n_samples", grid.n_samples}};
}

void from_json(const nlohmann::json& j, ViewGrid& grid) {
  grid.n_azimuth = j.value("n_azimuth", grid.n_azimuth);
  grid.n_elevation = j.value("n_elevation", grid.n_elevation);
  grid.min_elevation = j.value("min_elevation", grid.min_elevation);
  grid.max_elevation = j.value("max_elevation", grid.max_elevation);
  grid.fill_fraction = j.value("fill_fraction", grid.fill_fraction);
  grid.n_samples = j.value("n_samples", grid.n_samples);
}

}  // namespace stretchfit
