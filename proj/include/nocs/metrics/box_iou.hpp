#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "nocs/geometry.hpp"

namespace nocs {

/// World up in camera coordinates (+Y points down in the image).
inline const Vec3 kCameraUp{0.0, -1.0, 0.0};

/// Orthonormal ground-plane axes (e1, e2) for a given up vector.
struct GroundFrame {
  Vec3 up;
  Vec3 e1;
  Vec3 e2;

  explicit GroundFrame(const Vec3& up_dir = kCameraUp) : up(up_dir.normalized()) {
    Vec3 seed = Vec3::UnitX() - Vec3::UnitX().dot(up) * up;
    if (seed.norm() < 1e-6) seed = Vec3::UnitZ() - Vec3::UnitZ().dot(up) * up;
    e1 = seed.normalized();
    e2 = up.cross(e1);
  }

  Vec2 flatten(const Vec3& v) const { return {v.dot(e1), v.dot(e2)}; }
  double height(const Vec3& v) const { return v.dot(up); }
};

/// Heading angle of the object X axis in the ground plane. Falls back to the
/// Y axis (rotated back by 90 degrees) when X is close to vertical.
inline double yaw_of(const Mat3& rotation, const GroundFrame& g = GroundFrame()) {
  const Vec2 x = g.flatten(rotation.col(0));
  if (x.norm() > 1e-6) return std::atan2(x.y(), x.x());
  const Vec2 y = g.flatten(rotation.col(1));
  return std::atan2(y.y(), y.x()) - M_PI / 2;
}

/// Rotation whose Z axis is up and whose X axis has heading `yaw`.
inline Mat3 yaw_rotation(double yaw, const GroundFrame& g = GroundFrame()) {
  Mat3 r;
  r.col(0) = std::cos(yaw) * g.e1 + std::sin(yaw) * g.e2;
  r.col(2) = g.up;
  r.col(1) = r.col(2).cross(r.col(0));
  return r;
}

/// Same box with its rotation replaced by the pure yaw about the up axis.
inline OrientedBox3D yaw_only_box(const OrientedBox3D& box, const GroundFrame& g = GroundFrame()) {
  return {box.center, box.size, yaw_rotation(yaw_of(box.rotation, g), g)};
}

/// Absolute heading difference wrapped to [0, pi].
inline double wrapped_angle_difference(double a, double b) {
  double d = std::fmod(std::abs(a - b), 2.0 * M_PI);
  return d > M_PI ? 2.0 * M_PI - d : d;
}

namespace iou_detail {

using Polygon2 = std::vector<Vec2>;
using Polygon3 = std::vector<Vec3>;

inline double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

inline double polygon_area(const Polygon2& p) {
  double a = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) a += cross2(p[i], p[(i + 1) % p.size()]);
  return 0.5 * std::abs(a);
}

/// Makes a polygon counter-clockwise.
inline Polygon2 ccw(Polygon2 p) {
  double a = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) a += cross2(p[i], p[(i + 1) % p.size()]);
  if (a < 0.0) std::reverse(p.begin(), p.end());
  return p;
}

/// Intersection of two convex counter-clockwise polygons.
inline Polygon2 clip_convex(Polygon2 subject, const Polygon2& clip) {
  for (std::size_t e = 0; e < clip.size() && !subject.empty(); ++e) {
    const Vec2 a = clip[e];
    const Vec2 b = clip[(e + 1) % clip.size()];
    const auto side = [&](const Vec2& p) { return cross2(b - a, p - a); };
    Polygon2 out;
    for (std::size_t i = 0; i < subject.size(); ++i) {
      const Vec2& p = subject[i];
      const Vec2& q = subject[(i + 1) % subject.size()];
      const double sp = side(p);
      const double sq = side(q);
      if (sp >= 0.0) out.push_back(p);
      if ((sp >= 0.0) != (sq >= 0.0)) out.push_back(p + (q - p) * (sp / (sp - sq)));
    }
    subject = std::move(out);
  }
  return subject;
}

/// Convex polyhedron as a list of planar faces.
struct Polyhedron {
  std::vector<Polygon3> faces;
};

inline Polyhedron box_polyhedron(const OrientedBox3D& box) {
  const auto c = box_corners(box);
  // Corner index bits: 1 = +x, 2 = +y, 4 = +z.
  static constexpr int kFaces[6][4] = {{0, 2, 6, 4}, {1, 5, 7, 3}, {0, 4, 5, 1}, {2, 3, 7, 6}, {0, 1, 3, 2}, {4, 6, 7, 5}};
  Polyhedron p;
  for (const auto& f : kFaces) p.faces.push_back({c[f[0]], c[f[1]], c[f[2]], c[f[3]]});
  return p;
}

/// Keeps the part of `poly` with n.x <= d.
inline Polyhedron clip_halfspace(const Polyhedron& poly, const Vec3& n, double d, double eps) {
  bool any_outside = false;
  for (const auto& f : poly.faces)
    for (const auto& v : f) any_outside = any_outside || n.dot(v) - d > eps;
  if (!any_outside) return poly;

  Polyhedron out;
  Polygon3 cap;
  for (const auto& face : poly.faces) {
    Polygon3 kept;
    for (std::size_t i = 0; i < face.size(); ++i) {
      const Vec3& p = face[i];
      const Vec3& q = face[(i + 1) % face.size()];
      const double dp = n.dot(p) - d;
      const double dq = n.dot(q) - d;
      if (dp <= eps) {
        kept.push_back(p);
        if (dp >= -eps) cap.push_back(p);
      }
      if ((dp > eps && dq < -eps) || (dp < -eps && dq > eps)) {
        const Vec3 x = p + (q - p) * (dp / (dp - dq));
        kept.push_back(x);
        cap.push_back(x);
      }
    }
    if (kept.size() >= 3) out.faces.push_back(std::move(kept));
  }

  Polygon3 unique;
  for (const auto& v : cap)
    if (std::none_of(unique.begin(), unique.end(), [&](const Vec3& u) { return (u - v).norm() <= eps; }))
      unique.push_back(v);
  if (unique.size() >= 3) {
    Vec3 centroid = Vec3::Zero();
    for (const auto& v : unique) centroid += v;
    centroid /= static_cast<double>(unique.size());
    const Vec3 u = (unique[0] - centroid).normalized();
    const Vec3 w = n.normalized().cross(u);
    std::sort(unique.begin(), unique.end(), [&](const Vec3& a, const Vec3& b) {
      return std::atan2((a - centroid).dot(w), (a - centroid).dot(u)) <
             std::atan2((b - centroid).dot(w), (b - centroid).dot(u));
    });
    out.faces.push_back(std::move(unique));
  }
  return out;
}

/// Volume as a fan of tetrahedra from the vertex centroid (interior for a
/// convex body).
inline double volume(const Polyhedron& poly) {
  Vec3 centroid = Vec3::Zero();
  std::size_t n = 0;
  for (const auto& f : poly.faces)
    for (const auto& v : f) {
      centroid += v;
      ++n;
    }
  if (n == 0) return 0.0;
  centroid /= static_cast<double>(n);
  double vol = 0.0;
  for (const auto& f : poly.faces)
    for (std::size_t i = 1; i + 1 < f.size(); ++i)
      vol += std::abs((f[0] - centroid).dot((f[i] - centroid).cross(f[i + 1] - centroid))) / 6.0;
  return vol;
}

inline double intersection_volume_3d(const OrientedBox3D& a, const OrientedBox3D& b) {
  Polyhedron p = box_polyhedron(a);
  const double eps = 1e-12 * std::max(1.0, std::max(a.diagonal(), b.diagonal()) + a.center.norm() + b.center.norm());
  for (int axis = 0; axis < 3 && !p.faces.empty(); ++axis) {
    const Vec3 n = b.rotation.col(axis);
    const double c = n.dot(b.center);
    const double h = 0.5 * b.size[axis];
    p = clip_halfspace(p, n, c + h, eps);
    p = clip_halfspace(p, -n, -(c - h), eps);
  }
  return volume(p);
}

inline Polygon2 footprint(const OrientedBox3D& box, const GroundFrame& g) {
  const double yaw = yaw_of(box.rotation, g);
  const Vec2 c = g.flatten(box.center);
  const Vec2 x(std::cos(yaw), std::sin(yaw));
  const Vec2 y(-x.y(), x.x());
  const double hx = 0.5 * box.size.x();
  const double hy = 0.5 * box.size.y();
  return ccw({c + hx * x + hy * y, c - hx * x + hy * y, c - hx * x - hy * y, c + hx * x - hy * y});
}

inline double intersection_volume_yaw(const OrientedBox3D& a, const OrientedBox3D& b, const GroundFrame& g) {
  const double ha = g.height(a.center);
  const double hb = g.height(b.center);
  const double lo = std::max(ha - 0.5 * a.size.z(), hb - 0.5 * b.size.z());
  const double hi = std::min(ha + 0.5 * a.size.z(), hb + 0.5 * b.size.z());
  if (hi <= lo) return 0.0;
  return polygon_area(clip_convex(footprint(a, g), footprint(b, g))) * (hi - lo);
}

}  // namespace iou_detail

/// Volume of the intersection of two oriented boxes. With `yaw_only`, both
/// rotations are first reduced to their heading about the up axis.
inline double box3d_intersection(const OrientedBox3D& a, const OrientedBox3D& b, bool yaw_only,
                                 const GroundFrame& g = GroundFrame()) {
  return yaw_only ? iou_detail::intersection_volume_yaw(a, b, g) : iou_detail::intersection_volume_3d(a, b);
}

inline double box3d_iou(const OrientedBox3D& a, const OrientedBox3D& b, bool yaw_only = false,
                        const GroundFrame& g = GroundFrame()) {
  if (a.center == b.center && a.size == b.size && a.rotation == b.rotation) return 1.0;
  const double va = a.size.prod();
  const double vb = b.size.prod();
  const double inter = std::clamp(box3d_intersection(a, b, yaw_only, g), 0.0, std::min(va, vb));
  const double uni = va + vb - inter;
  return uni > 0.0 ? std::clamp(inter / uni, 0.0, 1.0) : 0.0;
}

}  // namespace nocs
