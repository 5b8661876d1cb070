/* SPDX-FileCopyrightText: 2026 The stretchfit Authors
 * SPDX-License-Identifier: Apache-2.0 */

#pragma once

#include <array>

#include <nlohmann/json_fwd.hpp>

#include "stretchfit/geometry.hpp"

namespace stretchfit {

/// Calibrated pinhole intrinsics, zero skew.
struct Intrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;
};

void validate_intrinsics(const Intrinsics& k);

/// Rigid camera pose. Rotation is stored as Euler angles in the Z-Y-X
/// intrinsic convention: R = Rz(theta0) * Ry(theta1) * Rx(theta2). A world
/// point maps to camera coordinates as R * x + t.
struct CameraPose {
  Vec3 theta = Vec3::Zero();
  Vec3 t = Vec3::Zero();

  Mat3 rotation() const;
};

inline constexpr double kMinDepth = 1e-6;

Mat3 euler_to_rotation(const Vec3& theta);

/// Inverse of euler_to_rotation. Well-defined away from gimbal lock
/// (|pitch| < pi/2); angles returned in (-pi, pi].
Vec3 rotation_to_euler(const Mat3& rotation);

/// Partial derivatives dR/dtheta_i of the Z-Y-X rotation, used by the
/// Levenberg-Marquardt and joint-objective gradients.
std::array<Mat3, 3> euler_rotation_jacobian(const Vec3& theta);

struct Projection {
  Vec2 uv = Vec2::Zero();
  double depth = 0.0;
  bool behind = false;  // depth <= kMinDepth
};

Projection project(const Vec3& x, const CameraPose& pose, const Intrinsics& k);

/// Pose on the view sphere looking at the origin with world up = +y.
/// Azimuth 0 places the camera on the +z axis; elevation is measured from
/// the horizontal plane.
CameraPose look_at_pose(double azimuth, double elevation, double distance);

void to_json(nlohmann::json& j, const CameraPose& pose);
void from_json(const nlohmann::json& j, CameraPose& pose);
void to_json(nlohmann::json& j, const Intrinsics& k);
void from_json(const nlohmann::json& j, Intrinsics& k);

}  // namespace stretchfit
