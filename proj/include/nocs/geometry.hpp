#pragma once

#include <array>
#include <cmath>
#include <string>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "nocs/error.hpp"

namespace nocs {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Pinhole camera. Convention: +Z forward, +X right, +Y down, pixel origin at
/// the top-left, pixel (col, row) has image coordinate (u, v) = (col, row).
struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;

  void validate() const {
    if (!(fx > 0.0) || !(fy > 0.0)) fail(ErrorCode::DegenerateInput, "focal lengths must be positive");
    if (width <= 0 || height <= 0) fail(ErrorCode::DegenerateInput, "image size must be positive");
    if (!(cx >= 0.0 && cx < width && cy >= 0.0 && cy < height))
      fail(ErrorCode::DegenerateInput, "principal point outside the image");
  }

  Mat3 matrix() const {
    Mat3 k;
    k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
    return k;
  }

  bool operator==(const CameraIntrinsics&) const = default;
};

inline bool is_rotation(const Mat3& r, double tol = 1e-9) {
  return (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() <= tol &&
         std::abs(r.determinant() - 1.0) <= tol;
}

struct RigidPose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& x) const { return rotation * x + translation; }

  RigidPose inverse() const { return {rotation.transpose(), -(rotation.transpose() * translation)}; }

  RigidPose compose(const RigidPose& rhs) const {
    return {rotation * rhs.rotation, rotation * rhs.translation + translation};
  }
};

/// Oriented box in the camera frame. `rotation` is camera-from-object and
/// `size` holds the full extents along the object x, y, z axes.
struct OrientedBox3D {
  Vec3 center = Vec3::Zero();
  Vec3 size = Vec3::Ones();
  Mat3 rotation = Mat3::Identity();

  double diagonal() const { return size.norm(); }

  RigidPose pose() const { return {rotation, center}; }

  void validate() const {
    if (!(size.minCoeff() > 0.0) || !size.allFinite()) fail(ErrorCode::InvalidBox, "box size components must be positive");
    if (!center.allFinite()) fail(ErrorCode::InvalidBox, "box center is not finite");
    if (!is_rotation(rotation, 1e-6)) fail(ErrorCode::InvalidBox, "box rotation is not in SO(3)");
  }

  bool operator==(const OrientedBox3D& o) const {
    return center == o.center && size == o.size && rotation == o.rotation;
  }
};

/// First two columns of a rotation matrix, before orthonormalization.
struct Rotation6D {
  Vec3 a1 = Vec3::UnitX();
  Vec3 a2 = Vec3::UnitY();
};

/// Unit direction in the camera frame.
class UnitRay {
 public:
  UnitRay() = default;

  static UnitRay from(const Vec3& v) {
    const double n = v.norm();
    if (!(n > 1e-12) || !v.allFinite()) fail(ErrorCode::DegenerateInput, "ray direction has zero length");
    UnitRay ray;
    ray.dir_ = v / n;
    return ray;
  }

  const Vec3& direction() const { return dir_; }

 private:
  Vec3 dir_ = Vec3::UnitZ();
};

inline Vec2 project(const Vec3& point, const CameraIntrinsics& k) {
  if (!(point.z() > 0.0)) fail(ErrorCode::NonPositiveDepth, "cannot project a point with z <= 0");
  return {k.fx * point.x() / point.z() + k.cx, k.fy * point.y() / point.z() + k.cy};
}

inline Vec3 backproject(const Vec2& pixel, double depth, const CameraIntrinsics& k) {
  if (!(depth > 0.0)) fail(ErrorCode::NonPositiveDepth, "backprojection depth must be positive");
  return {(pixel.x() - k.cx) / k.fx * depth, (pixel.y() - k.cy) / k.fy * depth, depth};
}

/// Viewing ray through a pixel, K^-1 [u v 1]^T normalized.
inline UnitRay pixel_ray(const Vec2& pixel, const CameraIntrinsics& k) {
  return UnitRay::from(Vec3((pixel.x() - k.cx) / k.fx, (pixel.y() - k.cy) / k.fy, 1.0));
}

inline Mat3 rot6d_decode(const Rotation6D& r) {
  const double n1 = r.a1.norm();
  if (!(n1 >= 1e-12)) fail(ErrorCode::DegenerateInput, "first 6D column has zero length");
  const Vec3 c1 = r.a1 / n1;
  const Vec3 resid = r.a2 - c1.dot(r.a2) * c1;
  const double n2 = resid.norm();
  if (!(n2 >= 1e-12 * std::max(1.0, r.a2.norm()))) fail(ErrorCode::DegenerateInput, "6D columns are parallel");
  const Vec3 c2 = resid / n2;
  Mat3 out;
  out.col(0) = c1;
  out.col(1) = c2;
  out.col(2) = c1.cross(c2);
  return out;
}

inline Rotation6D rot6d_encode(const Mat3& r) { return {r.col(0), r.col(1)}; }

inline Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return m;
}

/// Minimal rotation taking the optical axis (0,0,1) onto `ray`.
inline Mat3 view_rotation(const UnitRay& ray) {
  const Vec3& d = ray.direction();
  if ((d + Vec3::UnitZ()).norm() < 1e-9) fail(ErrorCode::DegenerateInput, "ray is antiparallel to the optical axis");
  const Vec3 v = Vec3::UnitZ().cross(d);
  const double c = d.z();
  const Mat3 k = skew(v);
  return Mat3::Identity() + k + k * k / (1.0 + c);
}

inline Mat3 allocentric_to_egocentric(const Mat3& r_alloc, const UnitRay& ray) { return view_rotation(ray) * r_alloc; }

inline Mat3 egocentric_to_allocentric(const Mat3& r_ego, const UnitRay& ray) {
  return view_rotation(ray).transpose() * r_ego;
}

/// Corner order: bit 0 selects the x sign, bit 1 y, bit 2 z (0 = negative).
inline std::array<Vec3, 8> box_corners(const OrientedBox3D& box) {
  std::array<Vec3, 8> corners;
  const Vec3 half = box.size / 2.0;
  for (int i = 0; i < 8; ++i) {
    const Vec3 local((i & 1) ? half.x() : -half.x(), (i & 2) ? half.y() : -half.y(), (i & 4) ? half.z() : -half.z());
    corners[i] = box.center + box.rotation * local;
  }
  return corners;
}

/// Angle between two directions, robust near 0 and pi.
inline double angle_between(const Vec3& a, const Vec3& b) { return std::atan2(a.cross(b).norm(), a.dot(b)); }

/// Geodesic distance on SO(3).
inline double rotation_distance(const Mat3& a, const Mat3& b) {
  return Eigen::AngleAxisd(a.transpose() * b).angle();
}

inline Mat3 rotation_about(const Vec3& axis, double angle) {
  return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

}  // namespace nocs
