/* SPDX-FileCopyrightText: 2026 The stretchfit Authors
 * SPDX-License-Identifier: Apache-2.0 */

#include "stretchfit/silhouette.hpp"

#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>

#include "stretchfit/rng.hpp"
#include "test_helpers.hpp"

using namespace stretchfit;

namespace {

std::vector<Vec2> random_points(int n, std::uint64_t seed, double lo = 0.0,
                                double hi = 100.0) {
  Rng rng(seed);
  std::vector<Vec2> pts;
  pts.reserve(n);
  for (int i = 0; i < n; ++i) {
    pts.emplace_back(rng.uniform(lo, hi), rng.uniform(lo, hi));
  }
  return pts;
}

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("mask basics") {
  Mask m = make_mask(4, 3);
  CHECK(m.foreground_count() == 0);
  m.set(1, 2, true);
  m.set(3, 0, true);
  CHECK(m.at(1, 2));
  CHECK(m.at(3, 0));
  CHECK_FALSE(m.at(0, 0));
  CHECK(m.foreground_count() == 2);
  CHECK_THROWS(make_mask(0, 5));
}

TEST_CASE("pbm round-trip preserves every pixel") {
  Rng rng(2);
  Mask m = make_mask(37, 21);  // width not divisible by 8
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      m.set(x, y, rng.uniform() < 0.4);
    }
  }
  const std::string path = temp_path("sf_test_roundtrip.pbm");
  save_pbm(m, path);
  const Mask back = load_pbm(path);
  REQUIRE(back.width == m.width);
  REQUIRE(back.height == m.height);
  CHECK(back.grid == m.grid);
  std::remove(path.c_str());
}

TEST_CASE("p1 ascii parsing with comments") {
  const std::string path = temp_path("sf_test_ascii.pbm");
  {
    std::ofstream out(path);
    out << "P1\n# comment line\n3 2\n1 0 1\n0 1 0\n";
  }
  const Mask m = load_pbm(path);
  CHECK(m.width == 3);
  CHECK(m.height == 2);
  CHECK(m.at(0, 0));
  CHECK_FALSE(m.at(1, 0));
  CHECK(m.at(1, 1));
  std::remove(path.c_str());
}

TEST_CASE("load_pbm rejects garbage") {
  const std::string path = temp_path("sf_test_bad.pbm");
  {
    std::ofstream out(path);
    out << "P5\n3 2\n";
  }
  CHECK_THROWS(load_pbm(path));
  std::remove(path.c_str());
  CHECK_THROWS(load_pbm(temp_path("sf_does_not_exist.pbm")));
}

TEST_CASE("dilate then erode closes single-pixel holes") {
  Mask m = make_mask(16, 16);
  for (int y = 4; y < 12; ++y) {
    for (int x = 4; x < 12; ++x) m.set(x, y, true);
  }
  m.set(8, 8, false);  // hole
  const Mask closed = erode(dilate(m));
  CHECK(closed.at(8, 8));
  // Closing never shrinks the region.
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) {
      if (m.at(x, y)) CHECK(closed.at(x, y));
    }
  }
}

TEST_CASE("mask_iou on rectangles matches hand arithmetic") {
  Mask a = make_mask(20, 20), b = make_mask(20, 20);
  for (int y = 0; y < 10; ++y) {
    for (int x = 0; x < 10; ++x) a.set(x, y, true);
  }
  for (int y = 5; y < 15; ++y) {
    for (int x = 5; x < 15; ++x) b.set(x, y, true);
  }
  // intersection 25, union 175
  CHECK(mask_iou(a, b) == doctest::Approx(25.0 / 175.0));
  CHECK(mask_iou(a, a) == doctest::Approx(1.0));
  const Mask empty = make_mask(20, 20);
  CHECK(mask_iou(empty, empty) == 0.0);
  Mask other_size = make_mask(5, 5);
  CHECK_THROWS(mask_iou(a, other_size));
}

TEST_CASE("sample_mask stays inside foreground pixels") {
  Mask m = make_mask(32, 32);
  for (int y = 10; y < 20; ++y) {
    for (int x = 12; x < 25; ++x) m.set(x, y, true);
  }
  const auto pts = sample_mask(m, 500, 9);
  REQUIRE(pts.size() == 500);
  for (const Vec2& p : pts) {
    const int px = static_cast<int>(p.x());
    const int py = static_cast<int>(p.y());
    CHECK(m.at(px, py));
  }
  const auto again = sample_mask(m, 500, 9);
  CHECK(pts[0] == again[0]);
  CHECK(pts[499] == again[499]);
  const auto other = sample_mask(m, 500, 10);
  CHECK(pts[0] != other[0]);
  const Mask empty = make_mask(8, 8);
  CHECK_THROWS(sample_mask(empty, 10, 1));
}

TEST_CASE("sample_mask covers the region roughly uniformly") {
  Mask m = make_mask(40, 40);
  for (int y = 0; y < 40; ++y) {
    for (int x = 0; x < 40; ++x) m.set(x, y, true);
  }
  const auto pts = sample_mask(m, 20000, 3);
  int left = 0;
  for (const Vec2& p : pts) {
    if (p.x() < 20.0) ++left;
  }
  // Binomial(20000, 0.5), 4 sigma ~ 283.
  CHECK(std::abs(left - 10000) < 300);
}

TEST_CASE("grid nearest matches brute force on random sets") {
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    const auto pts = random_points(400, seed);
    PointGrid2 grid(pts);
    const auto queries = random_points(200, seed + 100, -20.0, 120.0);
    for (const Vec2& q : queries) {
      const double expect = testing::brute_nearest(q, pts);
      CHECK(std::sqrt(grid.nearest_dist2(q)) ==
            doctest::Approx(expect).epsilon(1e-12));
    }
  }
}

TEST_CASE("grid nearest handles clustered and degenerate layouts") {
  SUBCASE("all points identical") {
    std::vector<Vec2> pts(50, Vec2(3.0, 4.0));
    PointGrid2 grid(pts);
    CHECK(grid.nearest_dist2(Vec2(3.0, 4.0)) == 0.0);
    CHECK(std::sqrt(grid.nearest_dist2(Vec2(0.0, 0.0))) ==
          doctest::Approx(5.0));
  }
  SUBCASE("collinear points") {
    std::vector<Vec2> pts;
    for (int i = 0; i < 100; ++i) pts.emplace_back(i * 0.5, 7.0);
    PointGrid2 grid(pts);
    CHECK(std::sqrt(grid.nearest_dist2(Vec2(25.1, 0.0))) ==
          doctest::Approx(testing::brute_nearest(Vec2(25.1, 0.0), pts))
              .epsilon(1e-12));
  }
  SUBCASE("single point") {
    std::vector<Vec2> pts{Vec2(1.0, 1.0)};
    PointGrid2 grid(pts);
    CHECK(std::sqrt(grid.nearest_dist2(Vec2(4.0, 5.0))) ==
          doctest::Approx(5.0));
    CHECK(std::isinf(grid.nearest_dist2_excluding(Vec2(0, 0), 0)));
  }
  SUBCASE("two tight clusters far apart") {
    std::vector<Vec2> pts;
    Rng rng(8);
    for (int i = 0; i < 100; ++i) {
      pts.emplace_back(rng.uniform(0, 0.1), rng.uniform(0, 0.1));
      pts.emplace_back(rng.uniform(999.9, 1000), rng.uniform(999.9, 1000));
    }
    PointGrid2 grid(pts);
    const Vec2 q(500, 500);
    CHECK(std::sqrt(grid.nearest_dist2(q)) ==
          doctest::Approx(testing::brute_nearest(q, pts)).epsilon(1e-12));
  }
}

TEST_CASE("nearest_dist2_excluding skips exactly the named point") {
  const auto pts = random_points(100, 77);
  PointGrid2 grid(pts);
  for (int i = 0; i < 100; i += 7) {
    double expect = std::numeric_limits<double>::infinity();
    for (int j = 0; j < 100; ++j) {
      if (j == i) continue;
      expect = std::min(expect, (pts[j] - pts[i]).norm());
    }
    CHECK(std::sqrt(grid.nearest_dist2_excluding(pts[i], i)) ==
          doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("mean_nn_spacing on a regular lattice") {
  std::vector<Vec2> pts;
  for (int y = 0; y < 10; ++y) {
    for (int x = 0; x < 10; ++x) pts.emplace_back(2.0 * x, 2.0 * y);
  }
  CHECK(mean_nn_spacing(pts) == doctest::Approx(2.0));
  CHECK(mean_nn_spacing(std::vector<Vec2>{Vec2(0, 0)}) == 0.0);
}

TEST_CASE("truncated chamfer agrees with the brute-force oracle") {
  for (std::uint64_t seed : {5ull, 6ull}) {
    const auto a = random_points(150, seed);
    const auto b = random_points(220, seed + 50);
    for (double q : {0.2, 0.5, 1.0}) {
      const double expect = testing::brute_truncated_chamfer(a, b, q);
      const SilhouetteScore got = truncated_chamfer(a, b, q);
      CHECK(got.value == doctest::Approx(expect).epsilon(1e-12));
      CHECK(got.n_model_points == 150);
      CHECK(got.n_mask_points == 220);
    }
  }
}

TEST_CASE("chamfer of a set against itself is zero") {
  const auto a = random_points(100, 12);
  CHECK(truncated_chamfer(a, a, 0.2).value == 0.0);
  CHECK(truncated_chamfer(a, a, 1.0).value == 0.0);
}

TEST_CASE("q=1 equals the plain symmetric mean") {
  const auto a = random_points(80, 21);
  const auto b = random_points(90, 22);
  double total = 0.0;
  for (const Vec2& p : a) total += testing::brute_nearest(p, b);
  for (const Vec2& p : b) total += testing::brute_nearest(p, a);
  const double mean = total / (a.size() + b.size());
  CHECK(truncated_chamfer(a, b, 1.0).value ==
        doctest::Approx(mean).epsilon(1e-12));
}

TEST_CASE("truncation focuses on the worst mismatches") {
  // b = a plus a far outlier; only the truncated tail sees the outlier.
  auto a = random_points(100, 31, 0.0, 10.0);
  auto b = a;
  b.emplace_back(500.0, 500.0);
  const double q02 = truncated_chamfer(a, b, 0.2).value;
  const double q10 = truncated_chamfer(a, b, 1.0).value;
  CHECK(q02 > q10);
  CHECK(q02 > 10.0);   // dominated by the outlier
  CHECK(q10 < 10.0);   // diluted across 201 distances
}

TEST_CASE("per-direction pooling differs from pooled on asymmetric sets") {
  // a is a tight cluster, b is spread out: b->a distances dominate.
  const auto a = random_points(50, 41, 0.0, 1.0);
  const auto b = random_points(50, 42, 0.0, 60.0);
  const SilhouetteScore pooled =
      truncated_chamfer(a, b, 0.2, ChamferPooling::kPooled);
  const SilhouetteScore split =
      truncated_chamfer(a, b, 0.2, ChamferPooling::kPerDirection);
  CHECK(pooled.value != doctest::Approx(split.value).epsilon(1e-6));
  // Oracle for the per-direction variant.
  std::vector<double> ab, ba;
  for (const Vec2& p : a) ab.push_back(testing::brute_nearest(p, b));
  for (const Vec2& p : b) ba.push_back(testing::brute_nearest(p, a));
  auto top_mean = [](std::vector<double> d, double q) {
    std::sort(d.begin(), d.end(), std::greater<double>());
    const std::size_t keep = static_cast<std::size_t>(
        std::ceil(q * static_cast<double>(d.size())));
    double t = 0.0;
    for (std::size_t i = 0; i < keep; ++i) t += d[i];
    return t / static_cast<double>(keep);
  };
  CHECK(split.value ==
        doctest::Approx(0.5 * (top_mean(ab, 0.2) + top_mean(ba, 0.2)))
            .epsilon(1e-12));
}

TEST_CASE("chamfer input validation") {
  const auto a = random_points(10, 1);
  std::vector<Vec2> empty;
  CHECK_THROWS(truncated_chamfer(a, empty, 0.2));
  CHECK_THROWS(truncated_chamfer(empty, a, 0.2));
  CHECK_THROWS(truncated_chamfer(a, a, 0.0));
  CHECK_THROWS(truncated_chamfer(a, a, 1.5));
}

TEST_CASE("prebuilt index gives identical scores") {
  const auto a = random_points(120, 61);
  auto b = random_points(140, 62);
  IndexedPoints indexed(b);
  const double direct = truncated_chamfer(a, b, 0.2).value;
  const double via_index = truncated_chamfer(a, indexed, 0.2).value;
  CHECK(direct == via_index);
}

TEST_CASE("score_pose matches manual project-then-chamfer") {
  const TriMesh cube = testing::centered_cube();
  const SurfaceSample samples = sample_surface(cube, 300, 5);
  Intrinsics k;
  k.fx = k.fy = 400;
  k.cx = 320;
  k.cy = 240;
  k.width = 640;
  k.height = 480;
  const CameraPose pose = look_at_pose(0.4, 0.3, 3.0);
  StretchSpec spec = axis_stretch_spec(bounding_box(cube), Vec3(0.2, 0, 0));

  std::vector<Vec2> manual;
  for (const Vec3& x : samples.points) {
    const Projection p = project(stretch_point(x, spec), pose, k);
    REQUIRE_FALSE(p.behind);
    manual.push_back(p.uv);
  }
  const auto mask_pts = random_points(200, 7, 200.0, 400.0);
  IndexedPoints indexed(mask_pts);
  const SilhouetteScore got = score_pose(samples, spec, pose, k, indexed, 0.2);
  const double expect = testing::brute_truncated_chamfer(manual, mask_pts, 0.2);
  CHECK(got.value == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("score_pose returns the infinite sentinel behind the camera") {
  const TriMesh cube = testing::centered_cube();
  const SurfaceSample samples = sample_surface(cube, 100, 5);
  Intrinsics k;
  k.fx = k.fy = 400;
  k.cx = 320;
  k.cy = 240;
  k.width = 640;
  k.height = 480;
  CameraPose pose;  // model at the origin sits astride the camera plane
  const auto mask_pts = random_points(50, 7, 0.0, 640.0);
  IndexedPoints indexed(mask_pts);
  const SilhouetteScore got =
      score_pose(samples, StretchSpec{}, pose, k, indexed, 0.2);
  CHECK_FALSE(got.valid());
  CHECK(std::isinf(got.value));
}

TEST_CASE("stamp_mask renders a filled blob around the points") {
  std::vector<Vec2> pts;
  Rng rng(19);
  for (int i = 0; i < 800; ++i) {
    pts.emplace_back(rng.uniform(100, 160), rng.uniform(80, 120));
  }
  const Mask m = stamp_mask(pts, 320, 240);
  CHECK(m.foreground_count() > 60 * 40 / 2);
  for (const Vec2& p : pts) {
    CHECK(m.at(static_cast<int>(p.x()), static_cast<int>(p.y())));
  }
  // Nothing stamped far away from the cluster.
  CHECK_FALSE(m.at(10, 10));
  CHECK_FALSE(m.at(300, 200));
}
