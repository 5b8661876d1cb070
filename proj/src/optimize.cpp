/* SPDX-FileCopyrightText: 2026 The stretchfit Authors
 * SPDX-License-Identifier: Apache-2.0 */

#include "stretchfit/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "stretchfit/parallel.hpp"

namespace stretchfit {

double joint_objective(const VecX& params, std::span<const Match> matches,
                       std::span<const StretchPlane> planes,
                       const Intrinsics& k, VecX* gradient) {
  const int n_tau = static_cast<int>(planes.size());
  if (params.size() != 6 + n_tau) {
    throw std::invalid_argument("joint_objective: expected 6 + n_planes parameters");
  }
  const Vec3 theta = params.segment<3>(0);
  const Vec3 t = params.segment<3>(3);
  const Mat3 r = euler_to_rotation(theta);
  const std::array<Mat3, 3> dr = euler_rotation_jacobian(theta);
  if (gradient != nullptr) gradient->setZero(6 + n_tau);

  double f = 0.0;
  std::array<int, 3> side{};
  for (const Match& m : matches) {
    Vec3 xs = m.x;
    for (int i = 0; i < n_tau; ++i) {
      side[i] = stretch_side(m.x, planes[i]);
      xs += side[i] * (params[6 + i] / 2.0) * planes[i].normal;
    }
    const Vec3 pc = r * xs + t;

    if (pc.z() <= kMinDepth) {
      // Out-of-view points get a quadratic pull back toward positive depth
      // plus a constant offset that dominates any in-view residual.
      const double dz = kMinDepth - pc.z();
      f += m.weight * (kBehindPenaltyScale * dz * dz + kBehindPenaltyOffset);
      if (gradient != nullptr) {
        const double dfdz = -2.0 * m.weight * kBehindPenaltyScale * dz;
        for (int a = 0; a < 3; ++a) (*gradient)[a] += dfdz * (dr[a] * xs).z();
        (*gradient)[5] += dfdz;
        for (int i = 0; i < n_tau; ++i) {
          (*gradient)[6 + i] +=
              dfdz * side[i] * 0.5 * r.row(2).dot(planes[i].normal);
        }
      }
      continue;
    }

    const double inv_z = 1.0 / pc.z();
    const Vec2 uv(k.fx * pc.x() * inv_z + k.cx, k.fy * pc.y() * inv_z + k.cy);
    const Vec2 e = uv - m.u;
    f += m.weight * e.squaredNorm();
    if (gradient == nullptr) continue;

    Eigen::Matrix<double, 2, 3> dproj;
    dproj << k.fx * inv_z, 0.0, -k.fx * pc.x() * inv_z * inv_z,  //
        0.0, k.fy * inv_z, -k.fy * pc.y() * inv_z * inv_z;
    const Vec2 coeff = 2.0 * m.weight * e;
    for (int a = 0; a < 3; ++a) {
      (*gradient)[a] += coeff.dot(dproj * (dr[a] * xs));
      (*gradient)[3 + a] += coeff.dot(dproj.col(a));
    }
    for (int i = 0; i < n_tau; ++i) {
      (*gradient)[6 + i] +=
          coeff.dot(dproj * (r * (side[i] * 0.5 * planes[i].normal)));
    }
  }
  return f;
}

namespace {

std::vector<double> default_tau_cap(std::span<const Match> matches,
                                    std::span<const StretchPlane> planes) {
  std::vector<double> cap(planes.size());
  for (std::size_t i = 0; i < planes.size(); ++i) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const Match& m : matches) {
      const double v = m.x.dot(planes[i].normal);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    cap[i] = kStretchCapFraction * std::max(hi - lo, 0.0);
  }
  return cap;
}

}  // namespace

JointSolution solve_joint(std::span<const Match> matches,
                          const CameraPose& init_pose,
                          std::span<const StretchPlane> planes,
                          const Intrinsics& k, const JointConfig& cfg) {
  if (matches.size() < 6) {
    throw std::invalid_argument("solve_joint: need at least 6 matches");
  }
  validate_intrinsics(k);
  const int n_tau = static_cast<int>(planes.size());
  StretchSpec probe;
  probe.planes.assign(planes.begin(), planes.end());
  probe.tau.assign(static_cast<std::size_t>(n_tau), 0.0);
  validate_spec(probe);

  std::vector<double> cap = cfg.tau_cap;
  if (cap.empty()) {
    cap = default_tau_cap(matches, planes);
  } else if (static_cast<int>(cap.size()) != n_tau) {
    throw std::invalid_argument("solve_joint: tau_cap size mismatch");
  }

  VecX x0(6 + n_tau);
  x0.segment<3>(0) = init_pose.theta;
  x0.segment<3>(3) = init_pose.t;
  x0.tail(n_tau).setZero();

  const LbfgsObjective obj = [&](const VecX& x, VecX& grad) {
    return joint_objective(x, matches, planes, k, &grad);
  };
  LbfgsProjection proj;
  if (n_tau > 0) {
    proj = [cap, n_tau](VecX& x) {
      for (int i = 0; i < n_tau; ++i) {
        x[6 + i] = std::clamp(x[6 + i], -cap[static_cast<std::size_t>(i)],
                              cap[static_cast<std::size_t>(i)]);
      }
    };
  }
  const LbfgsResult r = minimize_lbfgs(obj, x0, cfg.lbfgs, proj);

  JointSolution out;
  out.pose.theta = r.x.segment<3>(0);
  out.pose.t = r.x.segment<3>(3);
  out.tau.assign(r.x.data() + 6, r.x.data() + 6 + n_tau);
  out.objective = r.f;
  out.iterations = r.iterations;
  out.converged = r.converged;
  return out;
}

HypothesisSet estimate_pose_and_shape(std::span<const Match> matches,
                                      const Intrinsics& k,
                                      const SurfaceSample& mesh_samples,
                                      const IndexedPoints& mask_points,
                                      const CameraPose& init_pose,
                                      std::span<const StretchPlane> planes,
                                      const JointEstimateConfig& cfg) {
  const int n = static_cast<int>(matches.size());
  const int subset_size = cfg.robust.subset_size;
  if (subset_size < 6) {
    throw std::invalid_argument(
        "estimate_pose_and_shape: subset size must be at least 6");
  }
  if (n < subset_size) {
    throw std::invalid_argument(
        "estimate_pose_and_shape: fewer matches than the subset size");
  }

  const std::vector<std::vector<int>> subsets =
      enumerate_subsets(n, subset_size, cfg.robust.subset_cap, cfg.robust.seed);
  std::vector<Candidate> slot(subsets.size());
  std::vector<char> filled(subsets.size(), 0);

  parallel_for(subsets.size(), cfg.robust.jobs, [&](std::size_t si) {
    std::vector<Match> sub;
    sub.reserve(subsets[si].size());
    for (int idx : subsets[si]) sub.push_back(matches[static_cast<std::size_t>(idx)]);

    CameraPose start = init_pose;
    if (cfg.pnp_reinit) {
      try {
        if (const auto sol = solve_pnp(sub, k)) start = sol->pose;
      } catch (const std::exception&) {
        // fall back to the shared init pose
      }
    }

    JointSolution js;
    try {
      js = solve_joint(sub, start, planes, k, cfg.joint);
    } catch (const std::exception&) {
      return;  // degenerate subset
    }

    StretchSpec spec;
    spec.planes.assign(planes.begin(), planes.end());
    spec.tau = js.tau;

    Candidate c;
    c.subset = subsets[si];
    c.pose = js.pose;
    c.tau = js.tau;
    c.objective = js.objective;
    c.iterations = js.iterations;
    c.converged = js.converged;
    std::vector<Match> stretched(matches.begin(), matches.end());
    for (Match& m : stretched) m.x = stretch_point(m.x, spec);
    c.rms_reprojection = reprojection_rms(stretched, c.pose, k);
    c.score = score_pose(mesh_samples, spec, c.pose, k, mask_points,
                         cfg.robust.q, cfg.robust.pooling);
    slot[si] = std::move(c);
    filled[si] = 1;
  });

  HypothesisSet out;
  for (std::size_t i = 0; i < slot.size(); ++i) {
    if (filled[i]) out.candidates.push_back(std::move(slot[i]));
  }
  if (out.candidates.empty()) {
    throw std::runtime_error(
        "estimate_pose_and_shape: all candidate subsets degenerate");
  }
  out.selected = select_by_silhouette(out.candidates);
  return out;
}

void to_json(nlohmann::json& j, const JointSolution& s) {
  j = nlohmann::json{{"theta", {s.pose.theta.x(), s.pose.theta.y(), s.pose.theta.z()}},
                     {"t", {s.pose.t.x(), s.pose.t.y(), s.pose.t.z()}},
                     {"tau", s.tau},
                     {"objective", s.objective},
                     {"iterations", s.iterations},
                     {"converged", s.converged}};
}

}  // namespace stretchfit
