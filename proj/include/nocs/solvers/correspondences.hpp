#pragma once

#include <cmath>
#include <limits>
#include <string_view>
#include <vector>

#include "nocs/geometry.hpp"

namespace nocs {

/// Object-frame metric points paired with the pixels they project to.
struct Correspondences2D3D {
  std::vector<Vec3> points3d;
  std::vector<Vec2> pixels;

  std::size_t size() const { return points3d.size(); }

  void validate() const {
    if (points3d.size() != pixels.size()) fail(ErrorCode::DimensionMismatch, "3D and 2D point counts differ");
    for (std::size_t i = 0; i < size(); ++i)
      if (!points3d[i].allFinite() || !pixels[i].allFinite())
        fail(ErrorCode::DegenerateInput, "non-finite correspondence at index " + std::to_string(i));
  }

  Correspondences2D3D subset(const std::vector<std::size_t>& idx) const {
    Correspondences2D3D out;
    out.points3d.reserve(idx.size());
    out.pixels.reserve(idx.size());
    for (auto i : idx) {
      out.points3d.push_back(points3d[i]);
      out.pixels.push_back(pixels[i]);
    }
    return out;
  }
};

struct Correspondences3D3D {
  std::vector<Vec3> source;
  std::vector<Vec3> target;

  std::size_t size() const { return source.size(); }
};

enum class SolveMethod { DepthFromOrientation, EPnP, EPnPLM, Umeyama, RansacEPnP };

constexpr std::string_view to_string(SolveMethod m) {
  switch (m) {
    case SolveMethod::DepthFromOrientation: return "depth-from-orientation";
    case SolveMethod::EPnP: return "epnp";
    case SolveMethod::EPnPLM: return "epnp-lm";
    case SolveMethod::Umeyama: return "umeyama";
    case SolveMethod::RansacEPnP: return "ransac-epnp";
  }
  return "unknown";
}

inline SolveMethod parse_solve_method(std::string_view s) {
  for (auto m : {SolveMethod::DepthFromOrientation, SolveMethod::EPnP, SolveMethod::EPnPLM, SolveMethod::Umeyama,
                 SolveMethod::RansacEPnP})
    if (to_string(m) == s) return m;
  fail(ErrorCode::DegenerateInput, "unknown solve method '" + std::string(s) + "'");
}

struct SolveReport {
  RigidPose pose;
  int inlier_count = 0;
  double rms_reprojection_px = 0.0;
  SolveMethod method = SolveMethod::EPnPLM;
};

/// Reprojection error of one correspondence; +inf when the point is behind the camera.
inline double reprojection_error(const Vec3& x_obj, const Vec2& pixel, const RigidPose& pose,
                                 const CameraIntrinsics& k) {
  const Vec3 x = pose.apply(x_obj);
  if (!(x.z() > 0.0)) return std::numeric_limits<double>::infinity();
  return (project(x, k) - pixel).norm();
}

inline double reprojection_rms(const Correspondences2D3D& corr, const RigidPose& pose, const CameraIntrinsics& k) {
  if (corr.size() == 0) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < corr.size(); ++i) {
    const double e = reprojection_error(corr.points3d[i], corr.pixels[i], pose, k);
    sum += e * e;
  }
  return std::sqrt(sum / static_cast<double>(corr.size()));
}

}  // namespace nocs
