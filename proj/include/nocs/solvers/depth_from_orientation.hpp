#pragma once

#include "nocs/solvers/correspondences.hpp"

namespace nocs {

/// Recovers the distance along a known centroid ray given a known rotation.
///
/// With t = lambda * d and (X, Y, Z) = R x_obj, each projection equation
///   u (Z + lambda d_z) = fx (X + lambda d_x) + cx (Z + lambda d_z)
/// (and its v analogue) is linear in lambda, so lambda is the 1-D least
/// squares solution over all 2N equations, then polished on pixel error.
inline SolveReport solve_depth_given_orientation(const Correspondences2D3D& corr, const Mat3& rotation,
                                                 const UnitRay& ray, const CameraIntrinsics& k) {
  corr.validate();
  if (corr.size() == 0) fail(ErrorCode::Underdetermined, "no correspondences");
  const Vec3& d = ray.direction();
  if (!(d.z() > 0.0)) fail(ErrorCode::DegenerateInput, "centroid ray must point in front of the camera");

  double aa = 0.0;
  double ab = 0.0;
  for (std::size_t i = 0; i < corr.size(); ++i) {
    const Vec3 p = rotation * corr.points3d[i];
    const double u = corr.pixels[i].x();
    const double v = corr.pixels[i].y();
    const double a_u = u * d.z() - k.fx * d.x() - k.cx * d.z();
    const double b_u = k.fx * p.x() + k.cx * p.z() - u * p.z();
    const double a_v = v * d.z() - k.fy * d.y() - k.cy * d.z();
    const double b_v = k.fy * p.y() + k.cy * p.z() - v * p.z();
    aa += a_u * a_u + a_v * a_v;
    ab += a_u * b_u + a_v * b_v;
  }
  // A point on the ray itself (e.g. only the object origin) leaves lambda unobservable.
  if (!(aa > 1e-18 * static_cast<double>(corr.size()) * (k.fx * k.fx + k.fy * k.fy)))
    fail(ErrorCode::DegenerateConfiguration, "depth is unobservable from these correspondences");
  double lambda = ab / aa;
  if (!(lambda > 0.0)) fail(ErrorCode::NegativeDepthSolution, "solved depth " + std::to_string(lambda) + " <= 0");

  // The cross-multiplied equations carry pixel noise in their coefficients,
  // which biases lambda toward zero. A few 1-D Gauss-Newton steps on the
  // actual reprojection error remove that bias.
  for (int iter = 0; iter < 20; ++iter) {
    double jj = 0.0;
    double jr = 0.0;
    bool in_front = true;
    for (std::size_t i = 0; i < corr.size() && in_front; ++i) {
      const Vec3 p = rotation * corr.points3d[i] + lambda * d;
      if (!(p.z() > 0.0)) {
        in_front = false;
        break;
      }
      const double iz = 1.0 / p.z();
      const double ru = k.fx * p.x() * iz + k.cx - corr.pixels[i].x();
      const double rv = k.fy * p.y() * iz + k.cy - corr.pixels[i].y();
      const double ju = k.fx * (d.x() * iz - p.x() * d.z() * iz * iz);
      const double jv = k.fy * (d.y() * iz - p.y() * d.z() * iz * iz);
      jj += ju * ju + jv * jv;
      jr += ju * ru + jv * rv;
    }
    if (!in_front || !(jj > 0.0)) break;
    const double step = -jr / jj;
    if (!(lambda + step > 0.0)) break;
    lambda += step;
    if (std::abs(step) <= 1e-15 * lambda) break;
  }

  SolveReport report;
  report.pose = {rotation, lambda * d};
  report.method = SolveMethod::DepthFromOrientation;
  report.inlier_count = static_cast<int>(corr.size());
  report.rms_reprojection_px = reprojection_rms(corr, report.pose, k);
  return report;
}

}  // namespace nocs
