/* SPDX-FileCopyrightText: 2026 The stretchfit Authors
 * SPDX-License-Identifier: Apache-2.0 */

#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stretchfit/camera.hpp"
#include "stretchfit/geometry.hpp"

namespace stretchfit {

/// One 2D-3D correspondence: a pixel and the model point it depicts.
struct Match {
  Vec2 u = Vec2::Zero();   // pixel
  Vec3 x = Vec3::Zero();   // model point
  double weight = 1.0;
};

struct PnpSolution {
  CameraPose pose;
  double rms_reprojection = 0.0;  // px
  bool converged = false;
};

/// Reprojection contribution for points behind the camera, in pixels.
inline constexpr double kBehindSentinelPx = 1e6;

/// 3D point sets thinner than this (relative to the largest principal
/// extent) are treated as collinear and rejected as degenerate.
inline constexpr double kCollinearTol = 1e-9;

/// Point sets whose thinnest principal extent falls below this fraction of
/// the largest are solved through the planar homography path.
inline constexpr double kPlanarTol = 1e-6;

/// sqrt(mean squared pixel error) over the matches. Matches projecting
/// behind the camera contribute the sentinel distance instead.
double reprojection_rms(std::span<const Match> matches, const CameraPose& pose,
                        const Intrinsics& k);

/// All pose candidates for n >= 4 matches: a control-point linear
/// initialization refined by Levenberg-Marquardt for general point sets, or
/// a homography decomposition (both roots) when the points are planar.
/// Candidates placing any match behind the camera are dropped. Empty result
/// = degenerate input (collinear points, rank-deficient system, or no
/// cheirality-consistent pose).
std::vector<PnpSolution> solve_pnp_all(std::span<const Match> matches,
                                       const Intrinsics& k);

/// Best candidate from solve_pnp_all by reprojection RMS, if any.
std::optional<PnpSolution> solve_pnp(std::span<const Match> matches,
                                     const Intrinsics& k);

/// Minimal three-point solver (Grunert quartic). Returns every
/// cheirality-consistent pose, unrefined; callers disambiguate downstream.
std::vector<PnpSolution> solve_p3p(std::span<const Match> matches,
                                   const Intrinsics& k);

/// Levenberg-Marquardt refinement of (theta, t) minimizing weighted squared
/// pixel error. Stops on gradient max-norm < 1e-10, step norm < 1e-12, or
/// 100 iterations; converged reports which.
PnpSolution refine_pose(std::span<const Match> matches, const Intrinsics& k,
                        const CameraPose& init);

/// Match list CSV: header `u_px,v_px,x,y,z`, one match per row.
std::vector<Match> load_matches_csv(const std::string& path);

/// Writes the same format with round-trip-exact doubles. Weights are not
/// stored; loading yields weight = 1.
void save_matches_csv(std::span<const Match> matches, const std::string& path);

}  // namespace stretchfit
