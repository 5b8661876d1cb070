/* SPDX-FileCopyrightText: 2026 The stretchfit Authors
 * SPDX-License-Identifier: Apache-2.0 */

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "stretchfit/mesh.hpp"
#include "stretchfit/pnp.hpp"
#include "stretchfit/silhouette.hpp"

namespace stretchfit {

/// One scored pose (or pose+stretch) hypothesis from a match subset.
struct Candidate {
  std::vector<int> subset;        // indices into the match list
  CameraPose pose;
  std::vector<double> tau;        // empty for pose-only candidates
  double rms_reprojection = 0.0;  // px, over the full match list
  double objective = 0.0;         // joint objective at the solution (px^2)
  int iterations = 0;
  bool converged = false;
  SilhouetteScore score;
};

struct HypothesisSet {
  std::vector<Candidate> candidates;
  int selected = -1;  // -1 when every candidate scored infinite

  bool failed() const { return selected < 0; }
  const Candidate& winner() const;
};

struct RobustConfig {
  int subset_size = 4;
  double q = 0.2;
  ChamferPooling pooling = ChamferPooling::kPooled;
  int subset_cap = 2000;
  std::uint64_t seed = 0;
  int jobs = 1;
};

/// All C(n, k) index subsets in lexicographic order, or `cap` distinct
/// subsets sampled uniformly (deterministic per seed) when the full count
/// exceeds the cap.
std::vector<std::vector<int>> enumerate_subsets(int n, int k, int cap,
                                                std::uint64_t seed);

/// Per-subset pose candidates scored by silhouette overlap; the winner is
/// the minimal finite score (ties to the earlier candidate). Throws when no
/// subset yields any pose at all.
HypothesisSet estimate_pose(std::span<const Match> matches,
                            const Intrinsics& k,
                            const SurfaceSample& mesh_samples,
                            const IndexedPoints& mask_points,
                            const RobustConfig& cfg = {});

/// Baseline selection: index of the candidate with minimal reprojection RMS
/// over the full match list (ties to the lowest index).
int select_by_min_reprojection(std::span<const Candidate> candidates);

/// Winner index by minimal finite silhouette score, -1 if none.
int select_by_silhouette(std::span<const Candidate> candidates);

void to_json(nlohmann::json& j, const Candidate& c);
void to_json(nlohmann::json& j, const HypothesisSet& h);

}  // namespace stretchfit
