/* SPDX-FileCopyrightText: 2026 The stretchfit Authors
 * SPDX-License-Identifier: Apache-2.0 */

#include "stretchfit/robust.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "stretchfit/parallel.hpp"
#include "stretchfit/rng.hpp"

namespace stretchfit {

const Candidate& HypothesisSet::winner() const {
  if (failed()) throw std::runtime_error("hypothesis set has no winner");
  return candidates[static_cast<std::size_t>(selected)];
}

namespace {

/// C(n, k) saturated at `limit + 1` to keep the arithmetic overflow-free.
long long binomial_capped(int n, int k, long long limit) {
  k = std::min(k, n - k);
  long long c = 1;
  for (int i = 1; i <= k; ++i) {
    // c * (n - k + i) / i stays integral at every step.
    if (c > (limit + 1) * i / std::max(1, n - k + i)) return limit + 1;
    c = c * (n - k + i) / i;
    if (c > limit) return limit + 1;
  }
  return c;
}

}  // namespace

std::vector<std::vector<int>> enumerate_subsets(int n, int k, int cap,
                                                std::uint64_t seed) {
  if (k > n) throw std::runtime_error("enumerate_subsets: k > n");
  if (k < 1) throw std::runtime_error("enumerate_subsets: k < 1");
  if (cap < 1) throw std::runtime_error("enumerate_subsets: cap < 1");

  const long long total = binomial_capped(n, k, cap);
  std::vector<std::vector<int>> subsets;
  if (total <= cap) {
    std::vector<int> idx(k);
    for (int i = 0; i < k; ++i) idx[i] = i;
    while (true) {
      subsets.push_back(idx);
      int pos = k - 1;
      while (pos >= 0 && idx[pos] == n - k + pos) --pos;
      if (pos < 0) break;
      ++idx[pos];
      for (int i = pos + 1; i < k; ++i) idx[i] = idx[i - 1] + 1;
    }
    return subsets;
  }

  Rng rng(mix_seed(seed, 0x5eb5e75ULL));
  std::set<std::vector<int>> seen;
  std::vector<int> pool(n);
  while (static_cast<int>(subsets.size()) < cap) {
    for (int i = 0; i < n; ++i) pool[i] = i;
    std::vector<int> pick(k);
    for (int i = 0; i < k; ++i) {
      const std::size_t j = i + rng.index(n - i);
      std::swap(pool[i], pool[j]);
      pick[i] = pool[i];
    }
    std::sort(pick.begin(), pick.end());
    if (seen.insert(pick).second) subsets.push_back(std::move(pick));
  }
  return subsets;
}

HypothesisSet estimate_pose(std::span<const Match> matches,
                            const Intrinsics& k,
                            const SurfaceSample& mesh_samples,
                            const IndexedPoints& mask_points,
                            const RobustConfig& cfg) {
  if (static_cast<int>(matches.size()) < cfg.subset_size) {
    throw std::runtime_error("estimate_pose: fewer matches than subset size");
  }
  if (cfg.subset_size < 3) {
    throw std::runtime_error("estimate_pose: subset size must be >= 3");
  }
  const auto subsets = enumerate_subsets(static_cast<int>(matches.size()),
                                         cfg.subset_size, cfg.subset_cap,
                                         cfg.seed);

  std::vector<std::vector<Candidate>> slots(subsets.size());
  const StretchSpec no_stretch;
  parallel_for(subsets.size(), cfg.jobs, [&](std::size_t si) {
    std::vector<Match> sub;
    sub.reserve(subsets[si].size());
    for (int idx : subsets[si]) sub.push_back(matches[idx]);
    std::vector<PnpSolution> sols;
    try {
      sols = cfg.subset_size == 3 ? solve_p3p(sub, k) : solve_pnp_all(sub, k);
    } catch (const std::exception&) {
      return;  // degenerate subset, no candidates
    }
    for (const PnpSolution& sol : sols) {
      Candidate c;
      c.subset = subsets[si];
      c.pose = sol.pose;
      c.converged = sol.converged;
      c.rms_reprojection = reprojection_rms(matches, sol.pose, k);
      c.score = score_pose(mesh_samples, no_stretch, sol.pose, k, mask_points,
                           cfg.q, cfg.pooling);
      slots[si].push_back(std::move(c));
    }
  });

  HypothesisSet out;
  for (auto& slot : slots) {
    for (auto& c : slot) out.candidates.push_back(std::move(c));
  }
  if (out.candidates.empty()) {
    throw std::runtime_error("estimate_pose: all candidate subsets degenerate");
  }
  out.selected = select_by_silhouette(out.candidates);
  return out;
}

int select_by_min_reprojection(std::span<const Candidate> candidates) {
  if (candidates.empty()) {
    throw std::runtime_error("select_by_min_reprojection: no candidates");
  }
  int best = 0;
  for (int i = 1; i < static_cast<int>(candidates.size()); ++i) {
    if (candidates[i].rms_reprojection < candidates[best].rms_reprojection) {
      best = i;
    }
  }
  return best;
}

int select_by_silhouette(std::span<const Candidate> candidates) {
  int best = -1;
  for (int i = 0; i < static_cast<int>(candidates.size()); ++i) {
    if (!candidates[i].score.valid()) continue;
    if (best < 0 || candidates[i].score.value < candidates[best].score.value) {
      best = i;
    }
  }
  return best;
}

void to_json(nlohmann::json& j, const Candidate& c) {
  j = nlohmann::json{{"subset", c.subset},
                     {"pose", c.pose},
                     {"rms_reprojection", c.rms_reprojection},
                     {"converged", c.converged},
                     {"score", c.score.valid() ? nlohmann::json(c.score.value)
                                               : nlohmann::json()}};
  if (!c.tau.empty()) {
    j["tau"] = c.tau;
    j["objective"] = c.objective;
    j["iterations"] = c.iterations;
  }
}

void to_json(nlohmann::json& j, const HypothesisSet& h) {
  j = nlohmann::json{{"candidates", h.candidates}, {"selected", h.selected}};
}

}  // namespace stretchfit
