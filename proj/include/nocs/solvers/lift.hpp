#pragma once

#include <optional>
#include <string>
#include <vector>

#include "nocs/nocs_map.hpp"
#include "nocs/parallel.hpp"
#include "nocs/solvers/depth_from_orientation.hpp"
#include "nocs/solvers/epnp.hpp"
#include "nocs/solvers/ransac.hpp"
#include "nocs/solvers/umeyama.hpp"

namespace nocs {

/// Outputs of a learned pose head: allocentric rotation and the pixel the 3D
/// centroid projects to.
struct PoseHead {
  Mat3 rotation_allocentric = Mat3::Identity();
  Vec2 centroid_px = Vec2::Zero();
};

/// Head outputs a perfect predictor would emit for `box`.
inline PoseHead ground_truth_head(const OrientedBox3D& box, const CameraIntrinsics& k) {
  const UnitRay ray = UnitRay::from(box.center);
  return {egocentric_to_allocentric(box.rotation, ray), project(box.center, k)};
}

struct LiftOptions {
  RansacOptions ransac;
  /// Needed by the Umeyama path only.
  const DepthMap* depth = nullptr;
};

struct LiftResult {
  OrientedBox3D box;
  SolveReport report;
};

/// Correspondences (unnormalized NOCS, pixel) over valid NOCS inside the mask.
inline Correspondences2D3D gather_correspondences(const NocsMap& nocs, const InstanceMask& mask, const Vec3& size) {
  require_same_shape(nocs.coords, mask.mask, "nocs vs mask");
  Correspondences2D3D corr;
  for (int r = 0; r < nocs.height(); ++r)
    for (int c = 0; c < nocs.width(); ++c)
      if (nocs.is_valid(r, c) && mask(r, c)) {
        corr.points3d.push_back(unnormalize(nocs.coords(r, c), size));
        corr.pixels.emplace_back(c, r);
      }
  return corr;
}

/// Lifts a NOCS map to a metric oriented box. The object origin is the box
/// center, so the solved translation is the box center.
inline LiftResult lift_to_box(const NocsMap& nocs, const InstanceMask& mask, const Vec3& size,
                              const CameraIntrinsics& k, const std::optional<PoseHead>& head, SolveMethod method,
                              const LiftOptions& opt = {}) {
  if (!(size.minCoeff() > 0.0)) fail(ErrorCode::InvalidSize, "size components must be positive");
  const Correspondences2D3D corr = gather_correspondences(nocs, mask, size);
  const auto need = [&](std::size_t n) {
    if (corr.size() < n)
      fail(ErrorCode::InsufficientCorrespondences,
           std::to_string(corr.size()) + " valid pixels, " + std::to_string(n) + " required");
  };

  SolveReport report;
  switch (method) {
    case SolveMethod::DepthFromOrientation: {
      if (!head) fail(ErrorCode::DegenerateInput, "depth-from-orientation requires pose head outputs");
      need(1);
      const UnitRay ray = pixel_ray(head->centroid_px, k);
      const Mat3 r_ego = allocentric_to_egocentric(head->rotation_allocentric, ray);
      report = solve_depth_given_orientation(corr, r_ego, ray, k);
      break;
    }
    case SolveMethod::EPnP:
    case SolveMethod::EPnPLM:
      need(4);
      report = solve_epnp(corr, k, method == SolveMethod::EPnPLM);
      break;
    case SolveMethod::RansacEPnP:
      need(4);
      report = solve_epnp_ransac(corr, k, opt.ransac);
      break;
    case SolveMethod::Umeyama: {
      if (!opt.depth) fail(ErrorCode::DegenerateInput, "3D-3D alignment requires a depth map");
      require_same_shape(nocs.coords, opt.depth->depth, "nocs vs depth");
      Correspondences3D3D pairs;
      for (std::size_t i = 0; i < corr.size(); ++i) {
        const int c = static_cast<int>(corr.pixels[i].x());
        const int r = static_cast<int>(corr.pixels[i].y());
        if (!opt.depth->is_valid(r, c)) continue;
        pairs.source.push_back(corr.points3d[i]);
        pairs.target.push_back(backproject(corr.pixels[i], opt.depth->depth(r, c), k));
      }
      if (pairs.size() < 3)
        fail(ErrorCode::InsufficientCorrespondences, std::to_string(pairs.size()) + " pixels with depth, 3 required");
      const SimilarityResult sim = solve_umeyama(pairs, false);
      report.pose = sim.pose;
      report.method = SolveMethod::Umeyama;
      report.inlier_count = static_cast<int>(pairs.size());
      report.rms_reprojection_px = reprojection_rms(corr, sim.pose, k);
      break;
    }
  }

  LiftResult out;
  out.report = report;
  out.box.center = report.pose.translation;
  out.box.size = size;
  out.box.rotation = report.pose.rotation;
  return out;
}

struct LiftInput {
  const NocsMap* nocs = nullptr;
  const InstanceMask* mask = nullptr;
  Vec3 size = Vec3::Ones();
  CameraIntrinsics camera;
  std::optional<PoseHead> head;
  LiftOptions options;
};

struct LiftOutcome {
  std::optional<LiftResult> result;
  std::optional<ErrorCode> error;
  std::string message;
};

/// Lifts many instances on a worker pool; outcomes are in input order and
/// solver errors are captured per instance.
inline std::vector<LiftOutcome> lift_batch(const std::vector<LiftInput>& inputs, SolveMethod method, int jobs) {
  std::vector<LiftOutcome> out(inputs.size());
  parallel_for(inputs.size(), jobs, [&](std::size_t i) {
    const LiftInput& in = inputs[i];
    try {
      out[i].result = lift_to_box(*in.nocs, *in.mask, in.size, in.camera, in.head, method, in.options);
    } catch (const Error& e) {
      out[i].error = e.code();
      out[i].message = e.what();
    }
  });
  return out;
}

}  // namespace nocs
