#pragma once

#include <cmath>

#include <Eigen/SVD>

#include "nocs/solvers/correspondences.hpp"

namespace nocs {

struct SimilarityResult {
  double scale = 1.0;
  RigidPose pose;
  double rms_residual = 0.0;
};

/// Closed-form least-squares similarity (or rigid, when !with_scale) taking
/// source onto target: target ~ scale * R * source + t.
inline SimilarityResult solve_umeyama(const Correspondences3D3D& corr, bool with_scale) {
  const std::size_t n = corr.size();
  if (corr.target.size() != n) fail(ErrorCode::DimensionMismatch, "source and target counts differ");
  if (n < 3) fail(ErrorCode::DegenerateConfiguration, "need at least 3 point pairs");

  Vec3 mu_src = Vec3::Zero();
  Vec3 mu_dst = Vec3::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    mu_src += corr.source[i];
    mu_dst += corr.target[i];
  }
  mu_src /= static_cast<double>(n);
  mu_dst /= static_cast<double>(n);

  Mat3 cov = Mat3::Zero();
  Mat3 src_scatter = Mat3::Zero();
  double src_var = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 s = corr.source[i] - mu_src;
    const Vec3 t = corr.target[i] - mu_dst;
    cov += t * s.transpose();
    src_scatter += s * s.transpose();
    src_var += s.squaredNorm();
  }
  cov /= static_cast<double>(n);
  src_var /= static_cast<double>(n);

  // Source must span at least a plane.
  const Eigen::JacobiSVD<Mat3> src_svd(src_scatter);
  const Vec3 src_sv = src_svd.singularValues();
  if (!(src_sv(0) > 0.0) || src_sv(1) <= 1e-12 * src_sv(0))
    fail(ErrorCode::DegenerateConfiguration, "source points are collinear");

  const Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 sv = svd.singularValues();
  if (sv(1) <= 1e-12 * std::max(sv(0), 1e-300))
    fail(ErrorCode::DegenerateConfiguration, "cross-covariance is rank deficient");
  Vec3 sign = Vec3::Ones();
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) sign(2) = -1.0;

  SimilarityResult out;
  out.pose.rotation = svd.matrixU() * sign.asDiagonal() * svd.matrixV().transpose();
  out.scale = with_scale ? sv.dot(sign) / src_var : 1.0;
  out.pose.translation = mu_dst - out.scale * out.pose.rotation * mu_src;

  double sq = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    sq += (out.scale * out.pose.rotation * corr.source[i] + out.pose.translation - corr.target[i]).squaredNorm();
  out.rms_residual = std::sqrt(sq / static_cast<double>(n));
  return out;
}

}  // namespace nocs
