/* SPDX-FileCopyrightText: 2026 The stretchfit Authors
 * SPDX-License-Identifier: Apache-2.0 */

#include "stretchfit/pnp.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>
#include <Eigen/SVD>

namespace stretchfit {

namespace {

constexpr double kGradTol = 1e-10;
constexpr double kStepTol = 1e-12;
constexpr int kMaxLmIterations = 100;

struct PointShape {
  Vec3 centroid = Vec3::Zero();
  Mat3 axes = Mat3::Identity();  // columns, descending extent
  Vec3 extents = Vec3::Zero();   // singular values of the centered set
};

PointShape analyze_points(std::span<const Match> matches) {
  PointShape shape;
  for (const Match& m : matches) shape.centroid += m.x;
  shape.centroid /= static_cast<double>(matches.size());
  MatX centered(3, matches.size());
  for (std::size_t i = 0; i < matches.size(); ++i) {
    centered.col(i) = matches[i].x - shape.centroid;
  }
  Eigen::JacobiSVD<MatX> svd(centered, Eigen::ComputeFullU);
  shape.axes = svd.matrixU();
  shape.extents = Vec3::Zero();
  for (int i = 0; i < std::min<int>(3, svd.singularValues().size()); ++i) {
    shape.extents[i] = svd.singularValues()[i];
  }
  return shape;
}

bool all_in_front(std::span<const Match> matches, const CameraPose& pose) {
  const Mat3 r = pose.rotation();
  for (const Match& m : matches) {
    if ((r * m.x + pose.t).z() <= kMinDepth) return false;
  }
  return true;
}

PnpSolution make_solution(std::span<const Match> matches, const Intrinsics& k,
                          const CameraPose& pose, bool converged) {
  PnpSolution sol;
  sol.pose = pose;
  sol.rms_reprojection = reprojection_rms(matches, pose, k);
  sol.converged = converged;
  return sol;
}

/// Rigid world-to-camera alignment of paired points (Kabsch).
CameraPose align_rigid(const MatX& world, const MatX& cam) {
  const Eigen::Matrix4d T = Eigen::umeyama(world, cam, false);
  CameraPose pose;
  pose.theta = rotation_to_euler(T.block<3, 3>(0, 0));
  pose.t = T.block<3, 1>(0, 3);
  return pose;
}

// --- EPnP-style linear initialization -------------------------------------

struct EpnpContext {
  std::array<Vec3, 4> control_world;
  MatX alphas;  // n x 4 barycentric coordinates
  MatX m;       // 2n x 12
  Eigen::Matrix<double, 12, 4> kernel;  // 4 smallest eigenvectors of M^T M
  std::array<double, 6> rho;            // squared control-point distances
};

constexpr int kPairsI[6] = {0, 0, 0, 1, 1, 2};
constexpr int kPairsJ[6] = {1, 2, 3, 2, 3, 3};

EpnpContext build_epnp(std::span<const Match> matches, const Intrinsics& k,
                       const PointShape& shape) {
  EpnpContext ctx;
  ctx.control_world[0] = shape.centroid;
  const double n_inv = 1.0 / static_cast<double>(matches.size());
  for (int a = 0; a < 3; ++a) {
    ctx.control_world[a + 1] =
        shape.centroid +
        shape.axes.col(a) * (shape.extents[a] * std::sqrt(n_inv));
  }

  Mat3 basis;
  for (int a = 0; a < 3; ++a) {
    basis.col(a) = ctx.control_world[a + 1] - ctx.control_world[0];
  }
  const Mat3 basis_inv = basis.inverse();

  const int n = static_cast<int>(matches.size());
  ctx.alphas.resize(n, 4);
  ctx.m.setZero(2 * n, 12);
  for (int i = 0; i < n; ++i) {
    const Vec3 local = basis_inv * (matches[i].x - ctx.control_world[0]);
    ctx.alphas(i, 1) = local[0];
    ctx.alphas(i, 2) = local[1];
    ctx.alphas(i, 3) = local[2];
    ctx.alphas(i, 0) = 1.0 - local.sum();
    for (int j = 0; j < 4; ++j) {
      const double a = ctx.alphas(i, j);
      ctx.m(2 * i, 3 * j) = a * k.fx;
      ctx.m(2 * i, 3 * j + 2) = a * (k.cx - matches[i].u.x());
      ctx.m(2 * i + 1, 3 * j + 1) = a * k.fy;
      ctx.m(2 * i + 1, 3 * j + 2) = a * (k.cy - matches[i].u.y());
    }
  }

  const Eigen::Matrix<double, 12, 12> mtm = ctx.m.transpose() * ctx.m;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 12, 12>> eig(mtm);
  ctx.kernel = eig.eigenvectors().leftCols<4>();

  for (int p = 0; p < 6; ++p) {
    ctx.rho[p] = (ctx.control_world[kPairsI[p]] - ctx.control_world[kPairsJ[p]])
                     .squaredNorm();
  }
  return ctx;
}

Vec3 kernel_control(const Eigen::Matrix<double, 12, 4>& kernel, int vec,
                    int control) {
  return kernel.block<3, 1>(3 * control, vec);
}

/// Camera-frame control points for the kernel combination beta.
std::array<Vec3, 4> control_cam_from_betas(const EpnpContext& ctx,
                                           const VecX& betas) {
  std::array<Vec3, 4> cc;
  for (int j = 0; j < 4; ++j) {
    cc[j] = Vec3::Zero();
    for (int v = 0; v < betas.size(); ++v) {
      cc[j] += betas[v] * kernel_control(ctx.kernel, v, j);
    }
  }
  return cc;
}

/// Residuals of the control-point distance constraints for Gauss-Newton.
void beta_residuals(const EpnpContext& ctx, const VecX& betas, VecX& r,
                    MatX& jac) {
  const auto cc = control_cam_from_betas(ctx, betas);
  r.resize(6);
  jac.resize(6, betas.size());
  for (int p = 0; p < 6; ++p) {
    const Vec3 d = cc[kPairsI[p]] - cc[kPairsJ[p]];
    r[p] = d.squaredNorm() - ctx.rho[p];
    for (int v = 0; v < betas.size(); ++v) {
      const Vec3 dv = kernel_control(ctx.kernel, v, kPairsI[p]) -
                      kernel_control(ctx.kernel, v, kPairsJ[p]);
      jac(p, v) = 2.0 * d.dot(dv);
    }
  }
}

void refine_betas(const EpnpContext& ctx, VecX& betas) {
  VecX r;
  MatX jac;
  for (int it = 0; it < 10; ++it) {
    beta_residuals(ctx, betas, r, jac);
    const MatX jtj = jac.transpose() * jac;
    const VecX step = jtj.ldlt().solve(-jac.transpose() * r);
    if (!step.allFinite()) break;
    betas += step;
    if (step.norm() < 1e-14) break;
  }
}

/// Squared distance between control points i and j under kernel vector v.
double kernel_pair_dot(const EpnpContext& ctx, int va, int vb, int pair) {
  const Vec3 da = kernel_control(ctx.kernel, va, kPairsI[pair]) -
                  kernel_control(ctx.kernel, va, kPairsJ[pair]);
  const Vec3 db = kernel_control(ctx.kernel, vb, kPairsI[pair]) -
                  kernel_control(ctx.kernel, vb, kPairsJ[pair]);
  return da.dot(db);
}

VecX initial_betas(const EpnpContext& ctx, int num) {
  VecX betas = VecX::Zero(num);
  if (num == 1) {
    double num_sum = 0.0, den_sum = 0.0;
    for (int p = 0; p < 6; ++p) {
      const double dv = kernel_pair_dot(ctx, 0, 0, p);
      num_sum += std::sqrt(std::max(dv, 0.0) * ctx.rho[p]);
      den_sum += dv;
    }
    betas[0] = den_sum > 0.0 ? num_sum / den_sum : 0.0;
    return betas;
  }
  if (num == 2) {
    MatX l(6, 3);
    VecX rho(6);
    for (int p = 0; p < 6; ++p) {
      l(p, 0) = kernel_pair_dot(ctx, 0, 0, p);
      l(p, 1) = 2.0 * kernel_pair_dot(ctx, 0, 1, p);
      l(p, 2) = kernel_pair_dot(ctx, 1, 1, p);
      rho[p] = ctx.rho[p];
    }
    const VecX b = l.colPivHouseholderQr().solve(rho);
    betas[0] = std::sqrt(std::abs(b[0]));
    betas[1] = betas[0] > 1e-15 ? b[1] / betas[0] : 0.0;
    return betas;
  }
  MatX l(6, 6);
  VecX rho(6);
  for (int p = 0; p < 6; ++p) {
    l(p, 0) = kernel_pair_dot(ctx, 0, 0, p);
    l(p, 1) = 2.0 * kernel_pair_dot(ctx, 0, 1, p);
    l(p, 2) = 2.0 * kernel_pair_dot(ctx, 0, 2, p);
    l(p, 3) = kernel_pair_dot(ctx, 1, 1, p);
    l(p, 4) = 2.0 * kernel_pair_dot(ctx, 1, 2, p);
    l(p, 5) = kernel_pair_dot(ctx, 2, 2, p);
    rho[p] = ctx.rho[p];
  }
  const VecX b = l.colPivHouseholderQr().solve(rho);
  betas[0] = std::sqrt(std::abs(b[0]));
  if (betas[0] > 1e-15) {
    betas[1] = b[1] / betas[0];
    betas[2] = b[2] / betas[0];
  }
  return betas;
}

std::optional<CameraPose> epnp_pose_for_betas(std::span<const Match> matches,
                                              const EpnpContext& ctx,
                                              const VecX& betas) {
  auto cc = control_cam_from_betas(ctx, betas);
  const int n = static_cast<int>(matches.size());
  MatX cam(3, n), world(3, n);
  double depth_sum = 0.0;
  for (int i = 0; i < n; ++i) {
    Vec3 x = Vec3::Zero();
    for (int j = 0; j < 4; ++j) x += ctx.alphas(i, j) * cc[j];
    cam.col(i) = x;
    world.col(i) = matches[i].x;
    depth_sum += x.z();
  }
  if (depth_sum < 0.0) cam = -cam;  // kernel vectors carry an arbitrary sign
  if (!cam.allFinite()) return std::nullopt;
  return align_rigid(world, cam);
}

std::optional<CameraPose> epnp_init(std::span<const Match> matches,
                                    const Intrinsics& k,
                                    const PointShape& shape) {
  const EpnpContext ctx = build_epnp(matches, k, shape);
  std::optional<CameraPose> best;
  double best_rms = std::numeric_limits<double>::infinity();
  for (int num = 1; num <= 3; ++num) {
    VecX betas = initial_betas(ctx, num);
    refine_betas(ctx, betas);
    const auto pose = epnp_pose_for_betas(matches, ctx, betas);
    if (!pose) continue;
    const double rms = reprojection_rms(matches, *pose, k);
    if (rms < best_rms) {
      best_rms = rms;
      best = pose;
    }
  }
  return best;
}

// --- planar homography initialization -------------------------------------

struct Normalization {
  Mat3 transform = Mat3::Identity();
};

Normalization normalize_for_dlt(std::vector<Vec2>& pts) {
  Vec2 mean = Vec2::Zero();
  for (const Vec2& p : pts) mean += p;
  mean /= static_cast<double>(pts.size());
  double scale = 0.0;
  for (const Vec2& p : pts) scale += (p - mean).norm();
  scale = pts.size() * std::sqrt(2.0) / std::max(scale, 1e-12);
  for (Vec2& p : pts) p = (p - mean) * scale;
  Normalization norm;
  norm.transform << scale, 0, -scale * mean.x(), 0, scale, -scale * mean.y(),
      0, 0, 1;
  return norm;
}

std::optional<Mat3> fit_homography(std::vector<Vec2> src,
                                   std::vector<Vec2> dst) {
  const Normalization ns = normalize_for_dlt(src);
  const Normalization nd = normalize_for_dlt(dst);
  const int n = static_cast<int>(src.size());
  MatX a = MatX::Zero(2 * n, 9);
  for (int i = 0; i < n; ++i) {
    const double x = src[i].x(), y = src[i].y();
    const double u = dst[i].x(), v = dst[i].y();
    a.row(2 * i) << -x, -y, -1, 0, 0, 0, u * x, u * y, u;
    a.row(2 * i + 1) << 0, 0, 0, -x, -y, -1, v * x, v * y, v;
  }
  Eigen::JacobiSVD<MatX> svd(a, Eigen::ComputeFullV);
  const VecX h = svd.matrixV().col(8);
  Mat3 hn;
  hn << h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8];
  if (!hn.allFinite()) return std::nullopt;
  const Mat3 hm = nd.transform.inverse() * hn * ns.transform;
  if (std::abs(hm(2, 2)) < 1e-15) return std::nullopt;
  return Mat3(hm / hm(2, 2));
}

std::vector<CameraPose> planar_inits(std::span<const Match> matches,
                                     const Intrinsics& k,
                                     const PointShape& shape) {
  // 2D coordinates of the points inside their common plane.
  std::vector<Vec2> plane_pts, pixels;
  for (const Match& m : matches) {
    const Vec3 d = m.x - shape.centroid;
    plane_pts.emplace_back(shape.axes.col(0).dot(d), shape.axes.col(1).dot(d));
    pixels.push_back(m.u);
  }
  const auto h = fit_homography(plane_pts, pixels);
  if (!h) return {};

  Mat3 kmat;
  kmat << k.fx, 0, k.cx, 0, k.fy, k.cy, 0, 0, 1;
  Mat3 a = kmat.inverse() * (*h);
  const double lambda = 2.0 / (a.col(0).norm() + a.col(1).norm());
  a *= lambda;
  Vec3 r1 = a.col(0), r2 = a.col(1), t = a.col(2);
  if (t.z() < 0.0) {
    r1 = -r1;
    r2 = -r2;
    t = -t;
  }
  Mat3 rp;
  rp.col(0) = r1;
  rp.col(1) = r2;
  rp.col(2) = r1.cross(r2);
  Eigen::JacobiSVD<Mat3> svd(rp, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 rot = svd.matrixU() * svd.matrixV().transpose();
  if (rot.determinant() < 0.0) {
    Mat3 flip = Mat3::Identity();
    flip(2, 2) = -1.0;
    rot = svd.matrixU() * flip * svd.matrixV().transpose();
  }

  // Plane frame -> world: rows are the principal axes.
  Mat3 world_to_plane;
  world_to_plane.row(0) = shape.axes.col(0).transpose();
  world_to_plane.row(1) = shape.axes.col(1).transpose();
  world_to_plane.row(2) = shape.axes.col(2).transpose();
  if (world_to_plane.determinant() < 0.0) {
    world_to_plane.row(2) = -world_to_plane.row(2);
  }

  auto to_world_pose = [&](const Mat3& rplane, const Vec3& tplane) {
    CameraPose pose;
    const Mat3 rw = rplane * world_to_plane;
    pose.theta = rotation_to_euler(rw);
    pose.t = tplane - rw * shape.centroid;
    return pose;
  };

  std::vector<CameraPose> inits;
  inits.push_back(to_world_pose(rot, t));

  // Second basin of the planar ambiguity: the plane normal reflected about
  // the viewing direction.
  const Vec3 normal_cam = rot.col(2);
  const Vec3 view = t.normalized();
  Vec3 axis = normal_cam.cross(view);
  const double axis_norm = axis.norm();
  if (axis_norm > 1e-9) {
    axis /= axis_norm;
    const double angle =
        std::acos(std::clamp(normal_cam.dot(view), -1.0, 1.0));
    const Mat3 flip(Eigen::AngleAxisd(2.0 * angle, axis));
    inits.push_back(to_world_pose(flip * rot, t));
  }
  return inits;
}

// --- Levenberg-Marquardt refinement ----------------------------------------

/// Pose initializations from the minimal solver, used for 4- and 5-point
/// sets. Tries triples in decreasing triangle area until one yields roots.
std::vector<CameraPose> minimal_inits(std::span<const Match> matches,
                                      const Intrinsics& k) {
  struct Triple {
    double area;
    std::array<int, 3> idx;
  };
  std::vector<Triple> triples;
  const int n = static_cast<int>(matches.size());
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      for (int l = j + 1; l < n; ++l) {
        const double area = (matches[j].x - matches[i].x)
                                .cross(matches[l].x - matches[i].x)
                                .norm();
        triples.push_back({area, {i, j, l}});
      }
    }
  }
  std::sort(triples.begin(), triples.end(),
            [](const Triple& a, const Triple& b) { return a.area > b.area; });
  for (const Triple& t : triples) {
    if (t.area < 1e-12) break;
    const std::array<Match, 3> sub = {matches[t.idx[0]], matches[t.idx[1]],
                                      matches[t.idx[2]]};
    const auto roots = solve_p3p(sub, k);
    if (roots.empty()) continue;
    std::vector<CameraPose> inits;
    inits.reserve(roots.size());
    for (const PnpSolution& r : roots) inits.push_back(r.pose);
    return inits;
  }
  return {};
}

double weighted_cost(std::span<const Match> matches, const CameraPose& pose,
                     const Intrinsics& k) {
  const Mat3 r = pose.rotation();
  double cost = 0.0;
  for (const Match& m : matches) {
    const Vec3 pc = r * m.x + pose.t;
    if (pc.z() <= kMinDepth) return std::numeric_limits<double>::infinity();
    const Vec2 uv(k.fx * pc.x() / pc.z() + k.cx,
                  k.fy * pc.y() / pc.z() + k.cy);
    cost += m.weight * (uv - m.u).squaredNorm();
  }
  return cost;
}

}  // namespace

double reprojection_rms(std::span<const Match> matches, const CameraPose& pose,
                        const Intrinsics& k) {
  if (matches.empty()) return 0.0;
  const Mat3 r = pose.rotation();
  double sum = 0.0;
  for (const Match& m : matches) {
    const Vec3 pc = r * m.x + pose.t;
    if (pc.z() <= kMinDepth) {
      sum += kBehindSentinelPx * kBehindSentinelPx;
      continue;
    }
    const Vec2 uv(k.fx * pc.x() / pc.z() + k.cx,
                  k.fy * pc.y() / pc.z() + k.cy);
    sum += (uv - m.u).squaredNorm();
  }
  return std::sqrt(sum / static_cast<double>(matches.size()));
}

PnpSolution refine_pose(std::span<const Match> matches, const Intrinsics& k,
                        const CameraPose& init) {
  CameraPose pose = init;
  double cost = weighted_cost(matches, pose, k);
  bool converged = false;
  if (!std::isfinite(cost)) return make_solution(matches, k, pose, false);

  const int n = static_cast<int>(matches.size());
  MatX jac(2 * n, 6);
  VecX residual(2 * n);
  double lambda = 1e-3;

  for (int it = 0; it < kMaxLmIterations; ++it) {
    const Mat3 r = pose.rotation();
    const auto dr = euler_rotation_jacobian(pose.theta);
    for (int i = 0; i < n; ++i) {
      const Match& m = matches[i];
      const Vec3 pc = r * m.x + pose.t;
      const double z_inv = 1.0 / pc.z();
      const double w = std::sqrt(m.weight);
      const Vec2 uv(k.fx * pc.x() * z_inv + k.cx,
                    k.fy * pc.y() * z_inv + k.cy);
      residual.segment<2>(2 * i) = w * (uv - m.u);
      Eigen::Matrix<double, 2, 3> dproj;
      dproj << k.fx * z_inv, 0.0, -k.fx * pc.x() * z_inv * z_inv,  //
          0.0, k.fy * z_inv, -k.fy * pc.y() * z_inv * z_inv;
      for (int a = 0; a < 3; ++a) {
        jac.block<2, 1>(2 * i, a) = w * dproj * (dr[a] * m.x);
        jac.block<2, 1>(2 * i, 3 + a) = w * dproj.col(a);
      }
    }
    const VecX grad = jac.transpose() * residual;
    if (grad.cwiseAbs().maxCoeff() < kGradTol) {
      converged = true;
      break;
    }
    const MatX jtj = jac.transpose() * jac;

    bool stepped = false;
    while (lambda < 1e12) {
      MatX damped = jtj;
      for (int d = 0; d < 6; ++d) {
        damped(d, d) += lambda * std::max(jtj(d, d), 1e-12);
      }
      const VecX step = damped.ldlt().solve(-grad);
      CameraPose trial = pose;
      trial.theta += step.head<3>();
      trial.t += step.tail<3>();
      const double trial_cost = weighted_cost(matches, trial, k);
      if (std::isfinite(trial_cost) && trial_cost <= cost) {
        pose = trial;
        cost = trial_cost;
        lambda = std::max(lambda / 3.0, 1e-12);
        stepped = true;
        if (step.norm() < kStepTol) converged = true;
        break;
      }
      lambda *= 10.0;
    }
    if (!stepped || converged) break;
  }
  return make_solution(matches, k, pose, converged);
}

std::vector<PnpSolution> solve_pnp_all(std::span<const Match> matches,
                                       const Intrinsics& k) {
  if (matches.size() < 4) {
    throw std::runtime_error("solve_pnp needs at least 4 matches");
  }
  validate_intrinsics(k);
  for (const Match& m : matches) {
    if (!m.x.allFinite() || !m.u.allFinite()) {
      throw std::runtime_error("solve_pnp: non-finite match");
    }
  }

  const PointShape shape = analyze_points(matches);
  if (shape.extents[1] <= kCollinearTol * std::max(shape.extents[0], 1.0)) {
    return {};  // collinear points: pose is not observable
  }

  std::vector<CameraPose> inits;
  if (shape.extents[2] < kPlanarTol * shape.extents[0]) {
    inits = planar_inits(matches, k, shape);
  } else if (matches.size() <= 5) {
    // With fewer than 6 points the control-point system is rank-deficient
    // (null space wider than the scale direction), so initialize from the
    // minimal solver on the widest triple; the remaining matches
    // disambiguate its roots through the reprojection sort below.
    inits = minimal_inits(matches, k);
    if (inits.empty()) {
      if (const auto init = epnp_init(matches, k, shape)) {
        inits.push_back(*init);
      }
    }
  } else if (const auto init = epnp_init(matches, k, shape)) {
    inits.push_back(*init);
  }

  std::vector<PnpSolution> out;
  for (const CameraPose& init : inits) {
    if (!all_in_front(matches, init)) continue;
    PnpSolution sol = refine_pose(matches, k, init);
    if (!all_in_front(matches, sol.pose)) continue;
    bool duplicate = false;
    for (const PnpSolution& have : out) {
      const double rot_gap =
          (have.pose.rotation() - sol.pose.rotation()).norm();
      if (rot_gap < 1e-6 && (have.pose.t - sol.pose.t).norm() < 1e-6) {
        duplicate = true;
        break;
      }
    }
    if (!duplicate) out.push_back(std::move(sol));
  }
  std::sort(out.begin(), out.end(),
            [](const PnpSolution& a, const PnpSolution& b) {
              return a.rms_reprojection < b.rms_reprojection;
            });
  return out;
}

std::optional<PnpSolution> solve_pnp(std::span<const Match> matches,
                                     const Intrinsics& k) {
  auto all = solve_pnp_all(matches, k);
  if (all.empty()) return std::nullopt;
  return all.front();
}

namespace {

std::vector<double> poly_mul(std::span<const double> a,
                             std::span<const double> b) {
  std::vector<double> out(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      out[i + j] += a[i] * b[j];
    }
  }
  return out;
}

/// Real roots of a polynomial with ascending coefficients, via the
/// companion-matrix eigenvalues.
std::vector<double> real_roots(std::vector<double> coeffs) {
  double max_c = 0.0;
  for (double c : coeffs) max_c = std::max(max_c, std::abs(c));
  if (max_c == 0.0) return {};
  while (coeffs.size() > 1 && std::abs(coeffs.back()) < 1e-13 * max_c) {
    coeffs.pop_back();
  }
  const int deg = static_cast<int>(coeffs.size()) - 1;
  if (deg < 1) return {};
  if (deg == 1) return {-coeffs[0] / coeffs[1]};
  MatX companion = MatX::Zero(deg, deg);
  for (int i = 0; i < deg; ++i) {
    companion(i, deg - 1) = -coeffs[i] / coeffs[deg];
    if (i > 0) companion(i, i - 1) = 1.0;
  }
  Eigen::EigenSolver<MatX> eig(companion);
  std::vector<double> roots;
  for (int i = 0; i < deg; ++i) {
    const auto r = eig.eigenvalues()[i];
    if (std::abs(r.imag()) < 1e-8 * (1.0 + std::abs(r.real()))) {
      roots.push_back(r.real());
    }
  }
  return roots;
}

}  // namespace

std::vector<PnpSolution> solve_p3p(std::span<const Match> matches,
                                   const Intrinsics& k) {
  if (matches.size() != 3) {
    throw std::runtime_error("solve_p3p needs exactly 3 matches");
  }
  validate_intrinsics(k);

  std::array<Vec3, 3> f;
  for (int i = 0; i < 3; ++i) {
    f[i] = Vec3((matches[i].u.x() - k.cx) / k.fx,
                (matches[i].u.y() - k.cy) / k.fy, 1.0)
               .normalized();
  }
  const double a2 = (matches[1].x - matches[2].x).squaredNorm();
  const double b2 = (matches[0].x - matches[2].x).squaredNorm();
  const double c2 = (matches[0].x - matches[1].x).squaredNorm();
  if (a2 < 1e-18 || b2 < 1e-18 || c2 < 1e-18) return {};
  const double cos_a = f[1].dot(f[2]);
  const double cos_b = f[0].dot(f[2]);
  const double cos_c = f[0].dot(f[1]);

  // Distances s2 = u s1, s3 = v s1 reduce the three law-of-cosines
  // equations to a quartic in v; u follows linearly from v.
  const double kr = (a2 - c2) / b2;
  const double er = c2 / b2;
  const std::vector<double> nv = {kr + 1.0, -2.0 * kr * cos_b, kr - 1.0};
  const std::vector<double> dv = {2.0 * cos_c, -2.0 * cos_a};
  const std::vector<double> qv = {1.0, -2.0 * cos_b, 1.0};

  std::vector<double> poly = poly_mul(nv, nv);
  const std::vector<double> nd = poly_mul(nv, dv);
  const std::vector<double> dd = poly_mul(dv, dv);
  const std::vector<double> qdd = poly_mul(qv, dd);
  poly.resize(5, 0.0);
  for (std::size_t i = 0; i < nd.size(); ++i) poly[i] -= 2.0 * cos_c * nd[i];
  for (std::size_t i = 0; i < dd.size(); ++i) poly[i] += dd[i];
  for (std::size_t i = 0; i < qdd.size(); ++i) poly[i] -= er * qdd[i];

  MatX world(3, 3);
  for (int i = 0; i < 3; ++i) world.col(i) = matches[i].x;

  std::vector<PnpSolution> out;
  for (double v : real_roots(poly)) {
    if (!(v > 0.0)) continue;
    const double denom = dv[0] + dv[1] * v;
    if (std::abs(denom) < 1e-12) continue;
    const double u = (nv[0] + nv[1] * v + nv[2] * v * v) / denom;
    if (!(u > 0.0)) continue;
    const double q = qv[0] + qv[1] * v + qv[2] * v * v;
    if (!(q > 0.0)) continue;
    const double s1 = std::sqrt(b2 / q);
    MatX cam(3, 3);
    cam.col(0) = s1 * f[0];
    cam.col(1) = (u * s1) * f[1];
    cam.col(2) = (v * s1) * f[2];
    const CameraPose pose = align_rigid(world, cam);
    if (!all_in_front(matches, pose)) continue;
    bool duplicate = false;
    for (const PnpSolution& have : out) {
      if ((have.pose.rotation() - pose.rotation()).norm() < 1e-6 &&
          (have.pose.t - pose.t).norm() < 1e-6) {
        duplicate = true;
        break;
      }
    }
    if (!duplicate) out.push_back(make_solution(matches, k, pose, true));
  }
  std::sort(out.begin(), out.end(),
            [](const PnpSolution& a, const PnpSolution& b) {
              return a.rms_reprojection < b.rms_reprojection;
            });
  return out;
}

std::vector<Match> load_matches_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::vector<Match> matches;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (line_no == 1 && line.find_first_not_of(
                            "0123456789+-.eE, \t\r") != std::string::npos) {
      continue;  // header row
    }
    std::istringstream ss(line);
    Match m;
    double vals[5];
    char comma;
    for (int i = 0; i < 5; ++i) {
      if (!(ss >> vals[i])) {
        throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                 ": malformed match row");
      }
      if (i < 4 && !(ss >> comma)) {
        throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                 ": expected 5 comma-separated values");
      }
    }
    m.u = Vec2(vals[0], vals[1]);
    m.x = Vec3(vals[2], vals[3], vals[4]);
    matches.push_back(m);
  }
  return matches;
}

void save_matches_csv(std::span<const Match> matches,
                      const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "u_px,v_px,x,y,z\n";
  char buf[200];
  for (const Match& m : matches) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  m.u.x(), m.u.y(), m.x.x(), m.x.y(), m.x.z());
    out << buf;
  }
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

}  // namespace stretchfit
