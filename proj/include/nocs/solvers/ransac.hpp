#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "nocs/solvers/epnp.hpp"

namespace nocs {

struct RansacOptions {
  int max_iterations = 256;
  double inlier_px = 2.0;
  std::uint64_t seed = 0x5eed5eed5eed5eedULL;
};

/// RANSAC over EPnP hypotheses from 6-point samples (4 or 5 when fewer
/// points exist; 6 keeps the EPnP kernel at most 2-dimensional for exact
/// data). The largest consensus set is refit with EPnP + LM.
inline SolveReport solve_epnp_ransac(const Correspondences2D3D& corr, const CameraIntrinsics& k,
                                     const RansacOptions& opt = {}) {
  corr.validate();
  const std::size_t n = corr.size();
  if (n < 4) fail(ErrorCode::Underdetermined, "RANSAC-EPnP needs at least 4 correspondences");
  const std::size_t sample_size = std::min<std::size_t>(6, n);

  std::mt19937_64 rng(opt.seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  std::vector<std::size_t> best_inliers;
  double best_error = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> inliers;
  for (int iter = 0; iter < opt.max_iterations; ++iter) {
    // Partial Fisher-Yates draw of a distinct sample.
    for (std::size_t i = 0; i < sample_size; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, n - 1);
      std::swap(order[i], order[pick(rng)]);
    }
    std::vector<std::size_t> sample(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(sample_size));
    std::sort(sample.begin(), sample.end());
    RigidPose hypothesis;
    try {
      hypothesis = solve_epnp(corr.subset(sample), k, false).pose;
    } catch (const Error&) {
      continue;
    }
    inliers.clear();
    double err_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double e = reprojection_error(corr.points3d[i], corr.pixels[i], hypothesis, k);
      if (e < opt.inlier_px) {
        inliers.push_back(i);
        err_sum += e;
      }
    }
    if (inliers.size() > best_inliers.size() || (inliers.size() == best_inliers.size() && err_sum < best_error)) {
      best_inliers = inliers;
      best_error = err_sum;
      if (best_inliers.size() == n) break;
    }
  }
  if (best_inliers.size() < 4)
    fail(ErrorCode::NoConsensus, "best consensus set has " + std::to_string(best_inliers.size()) + " points");

  SolveReport report = solve_epnp(corr.subset(best_inliers), k, true);
  report.method = SolveMethod::RansacEPnP;
  int count = 0;
  for (std::size_t i = 0; i < n; ++i)
    count += reprojection_error(corr.points3d[i], corr.pixels[i], report.pose, k) < opt.inlier_px;
  report.inlier_count = count;
  return report;
}

}  // namespace nocs
