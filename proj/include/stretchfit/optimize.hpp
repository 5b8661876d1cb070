/* SPDX-FileCopyrightText: 2026 The stretchfit Authors
 * SPDX-License-Identifier: Apache-2.0 */

#pragma once

#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "stretchfit/lbfgs.hpp"
#include "stretchfit/pnp.hpp"
#include "stretchfit/robust.hpp"
#include "stretchfit/stretch.hpp"

namespace stretchfit {

struct JointSolution {
  CameraPose pose;
  std::vector<double> tau;
  double objective = 0.0;  // px^2
  int iterations = 0;
  bool converged = false;
};

/// Smooth penalty for matches that fall behind the camera during the joint
/// optimization: kBehindPenaltyScale * (eps - Zc)^2 + kBehindPenaltyOffset.
inline constexpr double kBehindPenaltyScale = 1e6;
inline constexpr double kBehindPenaltyOffset = 1e12;

/// f = sum_j ||u_j - v_j(theta, t, tau)||^2 where v_j projects the
/// stretched model point. Parameters pack as [theta(3), t(3), tau(N)].
/// The stretch side s_i of each match is frozen at its tau-independent
/// value, so matches inside the on-plane band contribute no tau gradient.
/// If `gradient` is non-null it receives the analytic gradient (size 6+N).
double joint_objective(const VecX& params, std::span<const Match> matches,
                       std::span<const StretchPlane> planes,
                       const Intrinsics& k, VecX* gradient);

struct JointConfig {
  LbfgsOptions lbfgs;
  /// Absolute per-plane bound on |tau_i|, enforced by projection after each
  /// line search. Empty = derive from the match points' extent along each
  /// plane normal (kStretchCapFraction of it).
  std::vector<double> tau_cap;
};

/// L-BFGS over (theta, t, tau) from (init_pose, tau = 0). Requires at least
/// 6 matches. Line-search failure reports converged = false with the best
/// parameters found.
JointSolution solve_joint(std::span<const Match> matches,
                          const CameraPose& init_pose,
                          std::span<const StretchPlane> planes,
                          const Intrinsics& k, const JointConfig& cfg = {});

struct JointEstimateConfig {
  RobustConfig robust;
  JointConfig joint;
  /// Re-initialize each subset from its own PnP solution instead of the
  /// retrieved view pose.
  bool pnp_reinit = false;

  JointEstimateConfig() { robust.subset_size = 6; }
};

/// Per-subset solve_joint candidates scored by silhouette overlap with the
/// candidate's own stretch applied; winner = minimal finite score.
HypothesisSet estimate_pose_and_shape(std::span<const Match> matches,
                                      const Intrinsics& k,
                                      const SurfaceSample& mesh_samples,
                                      const IndexedPoints& mask_points,
                                      const CameraPose& init_pose,
                                      std::span<const StretchPlane> planes,
                                      const JointEstimateConfig& cfg = {});

void to_json(nlohmann::json& j, const JointSolution& s);

}  // namespace stretchfit
