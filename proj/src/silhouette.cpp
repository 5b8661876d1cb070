/* SPDX-FileCopyrightText: 2026 The stretchfit Authors
 * SPDX-License-Identifier: Apache-2.0 */

#include "stretchfit/silhouette.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <optional>
#include <stdexcept>

#include "stretchfit/rng.hpp"

namespace stretchfit {

int Mask::foreground_count() const {
  int n = 0;
  for (auto v : grid) n += v ? 1 : 0;
  return n;
}

Mask make_mask(int width, int height) {
  if (width <= 0 || height <= 0) throw std::runtime_error("bad mask size");
  Mask m;
  m.width = width;
  m.height = height;
  m.grid.assign(static_cast<std::size_t>(width) * height, 0);
  return m;
}

Mask load_pbm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");

  auto next_token = [&in, &path]() {
    std::string tok;
    while (in) {
      int c = in.get();
      if (c == EOF) break;
      if (c == '#') {
        while (in && in.get() != '\n') {
        }
        continue;
      }
      if (std::isspace(c)) {
        if (!tok.empty()) return tok;
        continue;
      }
      tok.push_back(static_cast<char>(c));
    }
    if (tok.empty()) throw std::runtime_error("'" + path + "': truncated PBM");
    return tok;
  };

  const std::string magic = next_token();
  if (magic != "P1" && magic != "P4") {
    throw std::runtime_error("'" + path + "': not a PBM file");
  }
  const int width = std::stoi(next_token());
  const int height = std::stoi(next_token());
  Mask mask = make_mask(width, height);

  if (magic == "P1") {
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        const std::string tok = next_token();
        if (tok != "0" && tok != "1") {
          throw std::runtime_error("'" + path + "': bad P1 digit");
        }
        mask.set(x, y, tok == "1");
      }
    }
  } else {
    // P4: single whitespace after height, then packed rows, MSB first.
    const int row_bytes = (width + 7) / 8;
    std::vector<char> row(row_bytes);
    for (int y = 0; y < height; ++y) {
      if (!in.read(row.data(), row_bytes)) {
        throw std::runtime_error("'" + path + "': truncated P4 data");
      }
      for (int x = 0; x < width; ++x) {
        const int bit = (row[x / 8] >> (7 - x % 8)) & 1;
        mask.set(x, y, bit != 0);
      }
    }
  }
  return mask;
}

void save_pbm(const Mask& mask, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "P4\n" << mask.width << ' ' << mask.height << '\n';
  const int row_bytes = (mask.width + 7) / 8;
  std::vector<char> row(row_bytes);
  for (int y = 0; y < mask.height; ++y) {
    std::fill(row.begin(), row.end(), 0);
    for (int x = 0; x < mask.width; ++x) {
      if (mask.at(x, y)) row[x / 8] |= static_cast<char>(1 << (7 - x % 8));
    }
    out.write(row.data(), row_bytes);
  }
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

namespace {

Mask morph(const Mask& mask, int iterations, bool grow) {
  Mask cur = mask;
  for (int it = 0; it < iterations; ++it) {
    Mask next = cur;
    for (int y = 0; y < cur.height; ++y) {
      for (int x = 0; x < cur.width; ++x) {
        bool hit = grow ? false : true;
        for (int dy = -1; dy <= 1 && (grow ? !hit : hit); ++dy) {
          for (int dx = -1; dx <= 1 && (grow ? !hit : hit); ++dx) {
            const int xx = x + dx, yy = y + dy;
            const bool v = (xx >= 0 && xx < cur.width && yy >= 0 &&
                            yy < cur.height)
                               ? cur.at(xx, yy)
                               : false;
            if (grow) {
              hit = hit || v;
            } else {
              hit = hit && v;
            }
          }
        }
        next.set(x, y, hit);
      }
    }
    cur = std::move(next);
  }
  return cur;
}

}  // namespace

Mask dilate(const Mask& mask, int iterations) {
  return morph(mask, iterations, true);
}

Mask erode(const Mask& mask, int iterations) {
  return morph(mask, iterations, false);
}

double mask_iou(const Mask& a, const Mask& b) {
  if (a.width != b.width || a.height != b.height) {
    throw std::runtime_error("mask_iou: size mismatch");
  }
  long long inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.grid.size(); ++i) {
    const bool va = a.grid[i] != 0, vb = b.grid[i] != 0;
    inter += (va && vb) ? 1 : 0;
    uni += (va || vb) ? 1 : 0;
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<Vec2> sample_mask(const Mask& mask, int n, std::uint64_t seed) {
  if (n < 1) throw std::runtime_error("sample_mask needs n >= 1");
  std::vector<int> foreground;
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (mask.at(x, y)) foreground.push_back(y * mask.width + x);
    }
  }
  if (foreground.empty()) throw std::runtime_error("sample_mask: empty mask");

  Rng rng(seed);
  std::vector<Vec2> points;
  points.reserve(n);
  for (int i = 0; i < n; ++i) {
    const int pix = foreground[rng.index(foreground.size())];
    const double x = pix % mask.width;
    const double y = pix / mask.width;
    points.emplace_back(x + rng.uniform(), y + rng.uniform());
  }
  return points;
}

PointGrid2::PointGrid2(std::span<const Vec2> points)
    : n_points_(points.size()) {
  if (points.empty()) {
    cell_start_.assign(2, 0);
    return;
  }
  double min_x = points[0].x(), max_x = points[0].x();
  double min_y = points[0].y(), max_y = points[0].y();
  for (const Vec2& p : points) {
    min_x = std::min(min_x, p.x());
    max_x = std::max(max_x, p.x());
    min_y = std::min(min_y, p.y());
    max_y = std::max(max_y, p.y());
  }
  origin_x_ = min_x;
  origin_y_ = min_y;
  const double ex = max_x - min_x, ey = max_y - min_y;
  // Cell size near the expected point spacing for uniformly spread sets.
  const double area = std::max(ex * ey, 1e-12);
  const double n = static_cast<double>(points.size());
  cell_ = std::max(std::sqrt(area / n), 1e-9);
  // Degenerate layouts (collinear sets) make the area heuristic collapse;
  // grow the cell until the table stays proportional to the point count.
  const double cap = 4.0 * n + 64.0;
  while ((std::floor(ex / cell_) + 1.0) * (std::floor(ey / cell_) + 1.0) >
         cap) {
    cell_ *= 2.0;
  }
  nx_ = std::max(1, static_cast<int>(ex / cell_) + 1);
  ny_ = std::max(1, static_cast<int>(ey / cell_) + 1);

  const std::size_t n_cells = static_cast<std::size_t>(nx_) * ny_;
  std::vector<int> counts(n_cells, 0);
  auto cell_of = [&](const Vec2& p) {
    const int cx = std::clamp(static_cast<int>((p.x() - origin_x_) / cell_), 0,
                              nx_ - 1);
    const int cy = std::clamp(static_cast<int>((p.y() - origin_y_) / cell_), 0,
                              ny_ - 1);
    return cy * nx_ + cx;
  };
  for (const Vec2& p : points) counts[cell_of(p)]++;
  cell_start_.assign(n_cells + 1, 0);
  for (std::size_t c = 0; c < n_cells; ++c) {
    cell_start_[c + 1] = cell_start_[c] + counts[c];
  }
  cell_points_.resize(points.size());
  cell_ids_.resize(points.size());
  std::vector<int> cursor(cell_start_.begin(), cell_start_.end() - 1);
  for (int i = 0; i < static_cast<int>(points.size()); ++i) {
    const int slot = cursor[cell_of(points[i])]++;
    cell_points_[slot] = points[i];
    cell_ids_[slot] = i;
  }
}

double PointGrid2::search(const Vec2& query, int skip) const {
  if (n_points_ == 0 || (n_points_ == 1 && skip == 0)) {
    return std::numeric_limits<double>::infinity();
  }
  const int qx = std::clamp(static_cast<int>((query.x() - origin_x_) / cell_),
                            0, nx_ - 1);
  const int qy = std::clamp(static_cast<int>((query.y() - origin_y_) / cell_),
                            0, ny_ - 1);
  const double px = query.x(), py = query.y();
  const Vec2* pts = cell_points_.data();
  double best = std::numeric_limits<double>::infinity();
  // Scans [start, end) of the cell payload; row scans pass a whole run of
  // adjacent cells since their payloads are contiguous.
  auto scan = [&](int start, int end) {
    for (int k = start; k < end; ++k) {
      if (skip >= 0 && cell_ids_[k] == skip) continue;
      const double dx = pts[k].x() - px;
      const double dy = pts[k].y() - py;
      const double d2 = dx * dx + dy * dy;
      if (d2 < best) best = d2;
    }
  };
  const int max_ring = std::max(nx_, ny_);
  for (int ring = 0; ring <= max_ring; ++ring) {
    // Any point in a farther ring is at least (ring - 1) * cell away, no
    // matter where the query sits inside its cell.
    if (ring >= 2) {
      const double lower = (ring - 1) * cell_;
      if (lower * lower > best) break;
    }
    if (ring == 0) {
      const int c = qy * nx_ + qx;
      scan(cell_start_[c], cell_start_[c + 1]);
      continue;
    }
    const int x0 = qx - ring, x1 = qx + ring;
    const int y0 = qy - ring, y1 = qy + ring;
    const int cx0 = std::max(x0, 0), cx1 = std::min(x1, nx_ - 1);
    if (y0 >= 0) {
      const int row = y0 * nx_;
      scan(cell_start_[row + cx0], cell_start_[row + cx1 + 1]);
    }
    if (y1 < ny_) {
      const int row = y1 * nx_;
      scan(cell_start_[row + cx0], cell_start_[row + cx1 + 1]);
    }
    const int cy0 = std::max(y0 + 1, 0), cy1 = std::min(y1 - 1, ny_ - 1);
    for (int cy = cy0; cy <= cy1; ++cy) {
      const int row = cy * nx_;
      if (x0 >= 0) scan(cell_start_[row + x0], cell_start_[row + x0 + 1]);
      if (x1 < nx_) scan(cell_start_[row + x1], cell_start_[row + x1 + 1]);
    }
  }
  return best;
}

double PointGrid2::nearest_dist2(const Vec2& query) const {
  return search(query, -1);
}

double PointGrid2::nearest_dist2_excluding(const Vec2& query, int skip) const {
  return search(query, skip);
}

double mean_nn_spacing(std::span<const Vec2> points) {
  if (points.size() < 2) return 0.0;
  PointGrid2 grid(points);
  double total = 0.0;
  for (int i = 0; i < static_cast<int>(points.size()); ++i) {
    total += std::sqrt(grid.nearest_dist2_excluding(points[i], i));
  }
  return total / static_cast<double>(points.size());
}

namespace {

double truncated_mean_desc(std::vector<double>& dists, double q) {
  const std::size_t m = static_cast<std::size_t>(
      std::ceil(q * static_cast<double>(dists.size())));
  const std::size_t keep = std::clamp<std::size_t>(m, 1, dists.size());
  std::nth_element(dists.begin(), dists.begin() + (keep - 1), dists.end(),
                   std::greater<double>());
  double total = 0.0;
  for (std::size_t i = 0; i < keep; ++i) total += dists[i];
  return total / static_cast<double>(keep);
}

SilhouetteScore chamfer_impl(std::span<const Vec2> a, const PointGrid2* a_grid,
                             std::span<const Vec2> b, const PointGrid2& b_grid,
                             double q, ChamferPooling pooling) {
  if (a.empty() || b.empty()) {
    throw std::runtime_error("truncated_chamfer: empty point set");
  }
  if (!(q > 0.0 && q <= 1.0)) {
    throw std::runtime_error("truncated_chamfer: q must be in (0, 1]");
  }
  std::optional<PointGrid2> local_a;
  if (a_grid == nullptr) {
    local_a.emplace(a);
    a_grid = &*local_a;
  }
  std::vector<double> a_to_b(a.size()), b_to_a(b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    a_to_b[i] = std::sqrt(b_grid.nearest_dist2(a[i]));
  }
  for (std::size_t i = 0; i < b.size(); ++i) {
    b_to_a[i] = std::sqrt(a_grid->nearest_dist2(b[i]));
  }

  SilhouetteScore score;
  score.n_model_points = static_cast<int>(a.size());
  score.n_mask_points = static_cast<int>(b.size());
  score.q = q;
  if (pooling == ChamferPooling::kPooled) {
    std::vector<double> pooled;
    pooled.reserve(a.size() + b.size());
    pooled.insert(pooled.end(), a_to_b.begin(), a_to_b.end());
    pooled.insert(pooled.end(), b_to_a.begin(), b_to_a.end());
    score.value = truncated_mean_desc(pooled, q);
  } else {
    score.value = 0.5 * (truncated_mean_desc(a_to_b, q) +
                         truncated_mean_desc(b_to_a, q));
  }
  return score;
}

}  // namespace

SilhouetteScore truncated_chamfer(std::span<const Vec2> a,
                                  std::span<const Vec2> b, double q,
                                  ChamferPooling pooling) {
  PointGrid2 b_grid(b);
  return chamfer_impl(a, nullptr, b, b_grid, q, pooling);
}

SilhouetteScore truncated_chamfer(std::span<const Vec2> a,
                                  const IndexedPoints& b, double q,
                                  ChamferPooling pooling) {
  return chamfer_impl(a, nullptr, b.points(), b.grid(), q, pooling);
}

SilhouetteScore truncated_chamfer(const IndexedPoints& a,
                                  const IndexedPoints& b, double q,
                                  ChamferPooling pooling) {
  return chamfer_impl(a.points(), &a.grid(), b.points(), b.grid(), q, pooling);
}

SilhouetteScore score_pose(const SurfaceSample& mesh_samples,
                           const StretchSpec& spec, const CameraPose& pose,
                           const Intrinsics& k, const IndexedPoints& mask_points,
                           double q, ChamferPooling pooling) {
  std::vector<Vec2> projected;
  projected.reserve(mesh_samples.points.size());
  const Mat3 r = pose.rotation();
  for (const Vec3& x : mesh_samples.points) {
    const Vec3 xs = spec.planes.empty() ? x : stretch_point(x, spec);
    const Vec3 pc = r * xs + pose.t;
    if (pc.z() <= kMinDepth) {
      SilhouetteScore bad;
      bad.n_model_points = static_cast<int>(mesh_samples.points.size());
      bad.n_mask_points = static_cast<int>(mask_points.points().size());
      bad.q = q;
      return bad;  // infinite sentinel: pose puts the model behind the camera
    }
    projected.emplace_back(k.fx * pc.x() / pc.z() + k.cx,
                           k.fy * pc.y() / pc.z() + k.cy);
  }
  return chamfer_impl(projected, nullptr, mask_points.points(),
                      mask_points.grid(), q,
                      pooling);
}

Mask stamp_mask(std::span<const Vec2> points, int width, int height,
                double radius_scale) {
  Mask mask = make_mask(width, height);
  if (points.empty()) return mask;
  const double spacing = mean_nn_spacing(points);
  const double radius = std::max(radius_scale * spacing, 0.75);
  const double r2 = radius * radius;
  for (const Vec2& p : points) {
    const int x0 = std::max(0, static_cast<int>(std::floor(p.x() - radius)));
    const int x1 =
        std::min(width - 1, static_cast<int>(std::ceil(p.x() + radius)));
    const int y0 = std::max(0, static_cast<int>(std::floor(p.y() - radius)));
    const int y1 =
        std::min(height - 1, static_cast<int>(std::ceil(p.y() + radius)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double dx = x + 0.5 - p.x();
        const double dy = y + 0.5 - p.y();
        if (dx * dx + dy * dy <= r2) mask.set(x, y, true);
      }
    }
  }
  return mask;
}

}  // namespace stretchfit
