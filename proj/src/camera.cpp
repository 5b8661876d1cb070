/* SPDX-FileCopyrightText: 2026 The stretchfit Authors
 * SPDX-License-Identifier: Apache-2.0 */

#include "stretchfit/camera.hpp"

#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace stretchfit {

void validate_intrinsics(const Intrinsics& k) {
  if (k.fx <= 0.0 || k.fy <= 0.0) {
    throw std::runtime_error("intrinsics: focal lengths must be positive");
  }
  if (k.width <= 0 || k.height <= 0) {
    throw std::runtime_error("intrinsics: image size must be positive");
  }
  if (k.cx < 0.0 || k.cx >= k.width || k.cy < 0.0 || k.cy >= k.height) {
    throw std::runtime_error("intrinsics: principal point outside image");
  }
}

Mat3 euler_to_rotation(const Vec3& theta) {
  const double ca = std::cos(theta[0]), sa = std::sin(theta[0]);
  const double cb = std::cos(theta[1]), sb = std::sin(theta[1]);
  const double cc = std::cos(theta[2]), sc = std::sin(theta[2]);
  Mat3 r;
  r << ca * cb, ca * sb * sc - sa * cc, ca * sb * cc + sa * sc,  //
      sa * cb, sa * sb * sc + ca * cc, sa * sb * cc - ca * sc,   //
      -sb, cb * sc, cb * cc;
  return r;
}

Vec3 rotation_to_euler(const Mat3& r) {
  const double pitch = std::asin(std::clamp(-r(2, 0), -1.0, 1.0));
  const double yaw = std::atan2(r(1, 0), r(0, 0));
  const double roll = std::atan2(r(2, 1), r(2, 2));
  return Vec3(wrap_angle(yaw), wrap_angle(pitch), wrap_angle(roll));
}

std::array<Mat3, 3> euler_rotation_jacobian(const Vec3& theta) {
  const double ca = std::cos(theta[0]), sa = std::sin(theta[0]);
  const double cb = std::cos(theta[1]), sb = std::sin(theta[1]);
  const double cc = std::cos(theta[2]), sc = std::sin(theta[2]);
  Mat3 rz, ry, rx, dz, dy, dx;
  rz << ca, -sa, 0, sa, ca, 0, 0, 0, 1;
  ry << cb, 0, sb, 0, 1, 0, -sb, 0, cb;
  rx << 1, 0, 0, 0, cc, -sc, 0, sc, cc;
  dz << -sa, -ca, 0, ca, -sa, 0, 0, 0, 0;
  dy << -sb, 0, cb, 0, 0, 0, -cb, 0, -sb;
  dx << 0, 0, 0, 0, -sc, -cc, 0, cc, -sc;
  return {dz * ry * rx, rz * dy * rx, rz * ry * dx};
}

Mat3 CameraPose::rotation() const { return euler_to_rotation(theta); }

Projection project(const Vec3& x, const CameraPose& pose,
                   const Intrinsics& k) {
  const Vec3 pc = pose.rotation() * x + pose.t;
  Projection out;
  out.depth = pc.z();
  if (pc.z() <= kMinDepth) {
    out.behind = true;
    return out;
  }
  out.uv = Vec2(k.fx * pc.x() / pc.z() + k.cx, k.fy * pc.y() / pc.z() + k.cy);
  return out;
}

CameraPose look_at_pose(double azimuth, double elevation, double distance) {
  if (distance <= 0.0) throw std::runtime_error("look_at_pose: distance <= 0");
  const Vec3 center(distance * std::cos(elevation) * std::sin(azimuth),
                    distance * std::sin(elevation),
                    distance * std::cos(elevation) * std::cos(azimuth));
  const Vec3 up = Vec3::UnitY();
  const Vec3 forward = (-center).normalized();
  Vec3 right = forward.cross(up);
  if (right.norm() < 1e-12) {
    // Camera straight above/below the target; pick an arbitrary right axis.
    right = Vec3::UnitX();
  }
  right.normalize();
  const Vec3 down = forward.cross(right);
  Mat3 r;
  r.row(0) = right.transpose();
  r.row(1) = down.transpose();
  r.row(2) = forward.transpose();
  CameraPose pose;
  pose.theta = rotation_to_euler(r);
  pose.t = -(r * center);
  return pose;
}

void to_json(nlohmann::json& j, const CameraPose& pose) {
  j = nlohmann::json{{"theta", {pose.theta[0], pose.theta[1], pose.theta[2]}},
                     {"t", {pose.t[0], pose.t[1], pose.t[2]}},
                     {"convention", "zyx-intrinsic"}};
}

void from_json(const nlohmann::json& j, CameraPose& pose) {
  if (j.contains("convention") &&
      j.at("convention").get<std::string>() != "zyx-intrinsic") {
    throw std::runtime_error("unsupported pose convention");
  }
  for (int i = 0; i < 3; ++i) {
    pose.theta[i] = j.at("theta")[i].get<double>();
    pose.t[i] = j.at("t")[i].get<double>();
  }
}

void to_json(nlohmann::json& j, const Intrinsics& k) {
  j = nlohmann::json{{"fx", k.fx}, {"fy", k.fy},       {"cx", k.cx},
                     {"cy", k.cy}, {"width", k.width}, {"height", k.height}};
}

void from_json(const nlohmann::json& j, Intrinsics& k) {
  k.fx = j.at("fx").get<double>();
  k.fy = j.at("fy").get<double>();
  k.cx = j.at("cx").get<double>();
  k.cy = j.at("cy").get<double>();
  k.width = j.at("width").get<int>();
  k.height = j.at("height").get<int>();
  validate_intrinsics(k);
}

}  // namespace stretchfit
