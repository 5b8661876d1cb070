/* SPDX-FileCopyrightText: 2026 The stretchfit Authors
 * SPDX-License-Identifier: Apache-2.0 */

#include "stretchfit/camera.hpp"

#include <doctest.h>

#include <nlohmann/json.hpp>

#include "stretchfit/rng.hpp"
#include "test_helpers.hpp"

using namespace stretchfit;

namespace {

Intrinsics test_cam() {
  Intrinsics k;
  k.fx = 500;
  k.fy = 480;
  k.cx = 320;
  k.cy = 240;
  k.width = 640;
  k.height = 480;
  return k;
}

Mat3 axis_rotation(int axis, double a) {
  Mat3 r = Mat3::Identity();
  const double c = std::cos(a), s = std::sin(a);
  const int i = (axis + 1) % 3, j = (axis + 2) % 3;
  r(i, i) = c;
  r(j, j) = c;
  r(i, j) = -s;
  r(j, i) = s;
  return r;
}

}  // namespace

TEST_CASE("euler_to_rotation matches Rz*Ry*Rx composition") {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const Vec3 e(rng.uniform(-kPi, kPi), rng.uniform(-kPi / 2, kPi / 2),
                 rng.uniform(-kPi, kPi));
    const Mat3 direct = euler_to_rotation(e);
    const Mat3 composed =
        axis_rotation(2, e[0]) * axis_rotation(1, e[1]) * axis_rotation(0, e[2]);
    CHECK((direct - composed).norm() < 1e-14);
  }
}

TEST_CASE("rotation matrices are proper") {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const Mat3 r = euler_to_rotation(testing::random_euler(rng));
    CHECK((r * r.transpose() - Mat3::Identity()).norm() < 1e-14);
    CHECK(r.determinant() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("euler round-trip away from gimbal lock") {
  Rng rng(9);
  for (int trial = 0; trial < 500; ++trial) {
    const Vec3 e = testing::random_euler(rng);
    const Vec3 back = rotation_to_euler(euler_to_rotation(e));
    // Angles can differ by 2*pi; compare the rotations and wrapped angles.
    CHECK((euler_to_rotation(back) - euler_to_rotation(e)).norm() < 1e-12);
    for (int i = 0; i < 3; ++i) {
      CHECK(std::abs(wrap_angle(back[i] - e[i])) < 1e-12);
    }
  }
}

TEST_CASE("identity and single-axis euler recovery") {
  CHECK((rotation_to_euler(Mat3::Identity())).norm() == 0.0);
  const Vec3 yaw_only(0.7, 0, 0);
  CHECK((rotation_to_euler(euler_to_rotation(yaw_only)) - yaw_only).norm() <
        1e-15);
}

TEST_CASE("projection of points on the optical axis hits the principal point") {
  const Intrinsics k = test_cam();
  CameraPose pose;  // identity rotation, zero translation
  const Projection p = project(Vec3(0, 0, 2.5), pose, k);
  CHECK_FALSE(p.behind);
  CHECK(p.depth == doctest::Approx(2.5));
  CHECK(p.uv.x() == doctest::Approx(k.cx));
  CHECK(p.uv.y() == doctest::Approx(k.cy));
}

TEST_CASE("projection applies the pinhole model") {
  const Intrinsics k = test_cam();
  CameraPose pose;
  const Projection p = project(Vec3(0.2, -0.1, 2.0), pose, k);
  CHECK(p.uv.x() == doctest::Approx(k.cx + k.fx * 0.1));
  CHECK(p.uv.y() == doctest::Approx(k.cy - k.fy * 0.05));
}

TEST_CASE("points behind the camera are flagged") {
  const Intrinsics k = test_cam();
  CameraPose pose;
  CHECK(project(Vec3(0, 0, -1.0), pose, k).behind);
  CHECK(project(Vec3(0, 0, 0.0), pose, k).behind);
  CHECK(project(Vec3(0, 0, 1e-7), pose, k).behind);
  CHECK_FALSE(project(Vec3(0, 0, 1e-5), pose, k).behind);
}

TEST_CASE("pose transform composes rotation then translation") {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    CameraPose pose;
    pose.theta = testing::random_euler(rng);
    pose.t = Vec3(rng.normal(), rng.normal(), rng.normal() + 4.0);
    const Vec3 x(rng.normal(), rng.normal(), rng.normal());
    const Vec3 expected = pose.rotation() * x + pose.t;
    const Intrinsics k = test_cam();
    const Projection p = project(x, pose, k);
    if (expected.z() > kMinDepth) {
      CHECK(p.depth == doctest::Approx(expected.z()));
      CHECK(p.uv.x() ==
            doctest::Approx(k.fx * expected.x() / expected.z() + k.cx));
    } else {
      CHECK(p.behind);
    }
  }
}

TEST_CASE("look_at_pose places the target on the optical axis") {
  const Intrinsics k = test_cam();
  Rng rng(41);
  for (int trial = 0; trial < 40; ++trial) {
    const double az = rng.uniform(0, 2 * kPi);
    const double el = rng.uniform(-1.2, 1.2);
    const double dist = rng.uniform(1.0, 8.0);
    const CameraPose pose = look_at_pose(az, el, dist);
    const Projection p = project(Vec3::Zero(), pose, k);
    CHECK_FALSE(p.behind);
    CHECK(p.depth == doctest::Approx(dist).epsilon(1e-10));
    CHECK(p.uv.x() == doctest::Approx(k.cx).epsilon(1e-9));
    CHECK(p.uv.y() == doctest::Approx(k.cy).epsilon(1e-9));
    const Mat3 r = pose.rotation();
    CHECK(r.determinant() == doctest::Approx(1.0).epsilon(1e-12));
    // The recovered Euler convention must reproduce the same rotation.
    CHECK((euler_to_rotation(pose.theta) - r).norm() < 1e-9);
  }
}

TEST_CASE("distinct viewpoints give distinct poses") {
  const CameraPose a = look_at_pose(0.0, 0.3, 3.0);
  const CameraPose b = look_at_pose(kPi / 2, 0.3, 3.0);
  CHECK((euler_to_rotation(a.theta) - euler_to_rotation(b.theta)).norm() > 0.5);
}

TEST_CASE("euler_rotation_jacobian matches central differences") {
  Rng rng(55);
  const double h = 1e-6;
  for (int trial = 0; trial < 30; ++trial) {
    const Vec3 e = testing::random_euler(rng);
    const auto jac = euler_rotation_jacobian(e);
    for (int i = 0; i < 3; ++i) {
      Vec3 ep = e, em = e;
      ep[i] += h;
      em[i] -= h;
      const Mat3 fd =
          (euler_to_rotation(ep) - euler_to_rotation(em)) / (2.0 * h);
      CHECK((jac[i] - fd).norm() < 1e-9);
    }
  }
}

TEST_CASE("pose json round-trip and convention tag") {
  CameraPose pose;
  pose.theta = Vec3(0.2, -0.4, 1.1);
  pose.t = Vec3(0.5, -0.25, 3.0);
  nlohmann::json j = pose;
  CHECK(j["convention"] == "zyx-intrinsic");
  const CameraPose back = j.get<CameraPose>();
  CHECK((back.theta - pose.theta).norm() == 0.0);
  CHECK((back.t - pose.t).norm() == 0.0);

  j["convention"] = "xyz-extrinsic";
  CHECK_THROWS(j.get<CameraPose>());
}

TEST_CASE("intrinsics validation") {
  Intrinsics k = test_cam();
  CHECK_NOTHROW(validate_intrinsics(k));
  k.fx = 0;
  CHECK_THROWS(validate_intrinsics(k));
  k = test_cam();
  k.width = 0;
  CHECK_THROWS(validate_intrinsics(k));
}
