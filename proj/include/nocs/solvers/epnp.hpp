#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "nocs/solvers/correspondences.hpp"
#include "nocs/solvers/umeyama.hpp"

namespace nocs {

namespace epnp_detail {

using MatX = Eigen::MatrixXd;
using VecX = Eigen::VectorXd;

struct ControlFrame {
  int count = 0;                  // 4 in general position, 3 for planar input
  std::vector<Vec3> world;        // control points in the object frame
  MatX alphas;                    // N x count barycentric coordinates
};

inline ControlFrame choose_control_points(const std::vector<Vec3>& pts) {
  const auto n = static_cast<double>(pts.size());
  Vec3 c0 = Vec3::Zero();
  for (const auto& p : pts) c0 += p;
  c0 /= n;
  Mat3 cov = Mat3::Zero();
  for (const auto& p : pts) cov += (p - c0) * (p - c0).transpose();
  cov /= n;
  const Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
  const Vec3 ev = eig.eigenvalues().cwiseMax(0.0);  // ascending
  if (!(ev(2) > 0.0) || ev(1) <= 1e-12 * ev(2))
    fail(ErrorCode::DegenerateConfiguration, "object points are collinear");

  ControlFrame cf;
  cf.count = ev(0) <= 1e-10 * ev(2) ? 3 : 4;
  cf.world.push_back(c0);
  for (int k = 2; k >= 4 - cf.count; --k)
    cf.world.push_back(c0 + std::sqrt(ev(k)) * eig.eigenvectors().col(k));

  const int m = cf.count - 1;
  MatX basis(3, m);
  for (int j = 0; j < m; ++j) basis.col(j) = cf.world[j + 1] - c0;
  const auto qr = basis.colPivHouseholderQr();
  cf.alphas.resize(static_cast<Eigen::Index>(pts.size()), cf.count);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const VecX a = qr.solve(pts[i] - c0);
    cf.alphas(static_cast<Eigen::Index>(i), 0) = 1.0 - a.sum();
    for (int j = 0; j < m; ++j) cf.alphas(static_cast<Eigen::Index>(i), j + 1) = a(j);
  }
  return cf;
}

struct Candidate {
  RigidPose pose;
  double rms = std::numeric_limits<double>::infinity();
};

// Camera-frame control points from kernel vectors and betas; fixes the global
// sign so the reconstructed points lie in front of the camera, then aligns.
inline Candidate pose_from_betas(const std::vector<VecX>& kernel, const VecX& betas, const ControlFrame& cf,
                                 const Correspondences2D3D& corr, const CameraIntrinsics& k) {
  VecX ctl = VecX::Zero(3 * cf.count);
  for (Eigen::Index m = 0; m < betas.size(); ++m) ctl += betas(m) * kernel[static_cast<std::size_t>(m)];
  Correspondences3D3D pairs;
  pairs.source = corr.points3d;
  pairs.target.resize(corr.size());
  double zsum = 0.0;
  for (std::size_t i = 0; i < corr.size(); ++i) {
    Vec3 pc = Vec3::Zero();
    for (int j = 0; j < cf.count; ++j) pc += cf.alphas(static_cast<Eigen::Index>(i), j) * ctl.segment<3>(3 * j);
    pairs.target[i] = pc;
    zsum += pc.z();
  }
  if (zsum < 0.0)
    for (auto& p : pairs.target) p = -p;
  Candidate cand;
  try {
    cand.pose = solve_umeyama(pairs, false).pose;
  } catch (const Error&) {
    return cand;
  }
  cand.rms = reprojection_rms(corr, cand.pose, k);
  return cand;
}

// Betas for a kernel of dimension `dim` from the inter-control-point distance
// constraints: linearize in the products beta_m beta_n, then Gauss-Newton.
inline bool solve_betas(const std::vector<VecX>& kernel, int dim, const ControlFrame& cf, VecX& betas) {
  std::vector<std::pair<int, int>> pairs;
  for (int a = 0; a < cf.count; ++a)
    for (int b = a + 1; b < cf.count; ++b) pairs.emplace_back(a, b);
  const int unknowns = dim * (dim + 1) / 2;
  if (unknowns > static_cast<int>(pairs.size())) return false;

  const auto np = static_cast<Eigen::Index>(pairs.size());
  std::vector<std::vector<Vec3>> dv(pairs.size(), std::vector<Vec3>(static_cast<std::size_t>(dim)));
  VecX rho(np);
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto [a, b] = pairs[p];
    for (int m = 0; m < dim; ++m)
      dv[p][static_cast<std::size_t>(m)] = kernel[static_cast<std::size_t>(m)].segment<3>(3 * a) -
                                           kernel[static_cast<std::size_t>(m)].segment<3>(3 * b);
    rho(static_cast<Eigen::Index>(p)) = (cf.world[static_cast<std::size_t>(a)] - cf.world[static_cast<std::size_t>(b)]).squaredNorm();
  }

  MatX l(np, unknowns);
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    int col = 0;
    for (int m = 0; m < dim; ++m)
      for (int q = m; q < dim; ++q) {
        const double v = dv[p][static_cast<std::size_t>(m)].dot(dv[p][static_cast<std::size_t>(q)]);
        l(static_cast<Eigen::Index>(p), col++) = m == q ? v : 2.0 * v;
      }
  }
  const VecX prod = l.colPivHouseholderQr().solve(rho);
  if (!prod.allFinite()) return false;
  betas = VecX::Zero(dim);
  const double b11 = prod(0);
  betas(0) = std::sqrt(std::abs(b11));
  if (betas(0) <= 0.0) return false;
  for (int m = 1; m < dim; ++m) betas(m) = prod(m) / betas(0) * (b11 < 0.0 ? -1.0 : 1.0);

  for (int iter = 0; iter < 10; ++iter) {
    MatX jac(np, dim);
    VecX res(np);
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      Vec3 diff = Vec3::Zero();
      for (int m = 0; m < dim; ++m) diff += betas(m) * dv[p][static_cast<std::size_t>(m)];
      res(static_cast<Eigen::Index>(p)) = diff.squaredNorm() - rho(static_cast<Eigen::Index>(p));
      for (int m = 0; m < dim; ++m)
        jac(static_cast<Eigen::Index>(p), m) = 2.0 * diff.dot(dv[p][static_cast<std::size_t>(m)]);
    }
    const VecX step = jac.colPivHouseholderQr().solve(-res);
    if (!step.allFinite()) break;
    betas += step;
    if (step.norm() <= 1e-15 * std::max(1.0, betas.norm())) break;
  }
  return betas.allFinite();
}

}  // namespace epnp_detail

/// Levenberg-Marquardt refinement of (R, t) over squared pixel reprojection
/// error. Steps are only accepted when they lower the cost, so the returned
/// RMS never exceeds the initial one.
inline RigidPose refine_pose_lm(const Correspondences2D3D& corr, const RigidPose& init, const CameraIntrinsics& k,
                                int max_iterations = 50) {
  using Vec6 = Eigen::Matrix<double, 6, 1>;
  using Mat6 = Eigen::Matrix<double, 6, 6>;
  auto cost_of = [&](const RigidPose& pose) {
    double c = 0.0;
    for (std::size_t i = 0; i < corr.size(); ++i) {
      const double e = reprojection_error(corr.points3d[i], corr.pixels[i], pose, k);
      c += e * e;
    }
    return c;
  };

  RigidPose pose = init;
  double cost = cost_of(pose);
  if (!std::isfinite(cost)) return pose;
  double mu = 1e-3;
  for (int iter = 0; iter < max_iterations && cost > 0.0; ++iter) {
    Mat6 h = Mat6::Zero();
    Vec6 g = Vec6::Zero();
    for (std::size_t i = 0; i < corr.size(); ++i) {
      const Vec3 rx = pose.rotation * corr.points3d[i];
      const Vec3 p = rx + pose.translation;
      const double iz = 1.0 / p.z();
      const Vec2 r = Vec2(k.fx * p.x() * iz + k.cx, k.fy * p.y() * iz + k.cy) - corr.pixels[i];
      Eigen::Matrix<double, 2, 3> dproj;
      dproj << k.fx * iz, 0.0, -k.fx * p.x() * iz * iz, 0.0, k.fy * iz, -k.fy * p.y() * iz * iz;
      Eigen::Matrix<double, 3, 6> dp;
      dp.leftCols<3>() = -skew(rx);
      dp.rightCols<3>() = Mat3::Identity();
      const Eigen::Matrix<double, 2, 6> j = dproj * dp;
      h += j.transpose() * j;
      g += j.transpose() * r;
    }
    bool improved = false;
    for (int attempt = 0; attempt < 10 && !improved; ++attempt) {
      Mat6 damped = h;
      damped.diagonal() += mu * h.diagonal().cwiseMax(1e-12);
      const Vec6 delta = damped.ldlt().solve(-g);
      if (!delta.allFinite()) {
        mu *= 10.0;
        continue;
      }
      RigidPose trial;
      trial.rotation = rotation_about(delta.head<3>().norm() > 0.0 ? Vec3(delta.head<3>()) : Vec3::UnitZ(),
                                      delta.head<3>().norm()) *
                       pose.rotation;
      trial.translation = pose.translation + delta.tail<3>();
      const double trial_cost = cost_of(trial);
      if (trial_cost < cost) {
        const double rel = (cost - trial_cost) / cost;
        pose = trial;
        cost = trial_cost;
        mu = std::max(mu / 10.0, 1e-12);
        improved = true;
        if (rel < 1e-14) return pose;
      } else {
        mu *= 10.0;
      }
    }
    if (!improved) break;
  }
  return pose;
}

/// EPnP: points expressed in barycentric coordinates of 4 control points (3
/// for planar input); the camera-frame control points live in the null space
/// of a 2N x 3c system and are fixed by the control-point distances. The
/// kernel dimension with the lowest reprojection error wins. When `refine` is
/// set the result is polished with refine_pose_lm.
inline SolveReport solve_epnp(const Correspondences2D3D& corr, const CameraIntrinsics& k, bool refine = true) {
  using namespace epnp_detail;
  corr.validate();
  if (corr.size() < 4) fail(ErrorCode::Underdetermined, "EPnP needs at least 4 correspondences");

  const ControlFrame cf = choose_control_points(corr.points3d);
  const int cols = 3 * cf.count;
  MatX mtm = MatX::Zero(cols, cols);
  for (std::size_t i = 0; i < corr.size(); ++i) {
    Eigen::RowVectorXd ru = Eigen::RowVectorXd::Zero(cols);
    Eigen::RowVectorXd rv = Eigen::RowVectorXd::Zero(cols);
    const double u = corr.pixels[i].x();
    const double v = corr.pixels[i].y();
    for (int j = 0; j < cf.count; ++j) {
      const double a = cf.alphas(static_cast<Eigen::Index>(i), j);
      ru(3 * j) = a * k.fx;
      ru(3 * j + 2) = a * (k.cx - u);
      rv(3 * j + 1) = a * k.fy;
      rv(3 * j + 2) = a * (k.cy - v);
    }
    mtm += ru.transpose() * ru + rv.transpose() * rv;
  }
  const Eigen::SelfAdjointEigenSolver<MatX> eig(mtm);
  std::vector<VecX> kernel;
  for (int m = 0; m < std::min(cols, 4); ++m) kernel.push_back(eig.eigenvectors().col(m));

  Candidate best;
  for (int dim = 1; dim <= 3; ++dim) {
    VecX betas;
    if (!solve_betas(kernel, dim, cf, betas)) continue;
    Candidate cand = pose_from_betas(kernel, betas, cf, corr, k);
    if (cand.rms < best.rms) best = cand;
  }
  if (!std::isfinite(best.rms)) fail(ErrorCode::DegenerateConfiguration, "no EPnP hypothesis reprojects in front of the camera");

  SolveReport report;
  report.pose = best.pose;
  report.method = SolveMethod::EPnP;
  if (refine) {
    report.pose = refine_pose_lm(corr, best.pose, k);
    report.method = SolveMethod::EPnPLM;
  }
  report.rms_reprojection_px = reprojection_rms(corr, report.pose, k);
  report.inlier_count = static_cast<int>(corr.size());
  return report;
}

}  // namespace nocs
