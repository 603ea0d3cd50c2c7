#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "nocs/geometry.hpp"
#include "nocs/png_io.hpp"
#include "nocs/raster.hpp"

namespace nocs {

/// Fraction of the box diagonal by which a point may lie outside the box and
/// still be accepted as an object point.
inline constexpr double kInsideBoxTolerance = 0.01;

/// Normalized object coordinates of a camera-frame point: R^T (x - c) / ||size||.
inline Vec3 camera_to_nocs(const Vec3& x_cam, const OrientedBox3D& box) {
  return box.rotation.transpose() * (x_cam - box.center) / box.diagonal();
}

/// Per-pixel NOCS for one instance from a depth map. A pixel is valid when it
/// is in the mask, has valid depth, and its point lies inside the box (up to
/// kInsideBoxTolerance of the diagonal).
inline NocsMap compute_nocs_map(const DepthMap& depth, const CameraIntrinsics& k, const OrientedBox3D& box,
                                const InstanceMask& mask) {
  require_same_shape(depth.depth, mask.mask, "depth vs mask");
  require_same_shape(depth.depth, depth.valid, "depth vs depth validity");
  box.validate();
  const double diag = box.diagonal();
  const double eps = kInsideBoxTolerance * diag;
  const Vec3 half = box.size / 2.0;
  const Mat3 rt = box.rotation.transpose();

  NocsMap out(depth.width(), depth.height());
  for (int r = 0; r < depth.height(); ++r) {
    for (int c = 0; c < depth.width(); ++c) {
      if (!mask(r, c) || !depth.is_valid(r, c)) continue;
      const Vec3 x_cam = backproject(Vec2(c, r), depth.depth(r, c), k);
      const Vec3 x_obj = rt * (x_cam - box.center);
      if ((x_obj.cwiseAbs() - half).maxCoeff() > eps) continue;
      out.coords(r, c) = x_obj / diag;
      out.valid(r, c) = 1;
    }
  }
  return out;
}

/// Metric object-frame coordinates from NOCS: uniform scale by the diagonal.
inline Vec3 unnormalize(const Vec3& nocs, const Vec3& size) {
  if (!(size.minCoeff() > 0.0) || !size.allFinite()) fail(ErrorCode::InvalidSize, "size components must be positive");
  return size.norm() * nocs;
}

namespace detail {
inline std::uint16_t quantize_nocs(double v) {
  return static_cast<std::uint16_t>(std::lround((v + 0.5) * 65535.0));
}
inline double dequantize_nocs(std::uint16_t q) { return static_cast<double>(q) / 65535.0 - 0.5; }
}  // namespace detail

/// 16-bit RGBA PNG: channels (X, Y, Z, validity), value v stored as
/// round((v + 0.5) * 65535); validity 65535 = valid, 0 = invalid.
inline std::vector<std::uint8_t> encode_png16(const NocsMap& nocs) {
  require_same_shape(nocs.coords, nocs.valid, "nocs coords vs validity");
  png::RawImage img;
  img.width = nocs.width();
  img.height = nocs.height();
  img.channels = 4;
  img.bit_depth = 16;
  img.samples.assign(nocs.coords.size() * 4, 0);
  for (std::size_t i = 0; i < nocs.coords.size(); ++i) {
    if (!nocs.valid[i]) continue;
    const Vec3& v = nocs.coords[i];
    for (int ch = 0; ch < 3; ++ch) {
      if (!(v[ch] >= -0.5 && v[ch] <= 0.5))
        fail(ErrorCode::RangeViolation, "nocs value " + std::to_string(v[ch]) + " outside [-0.5, 0.5]");
      img.samples[4 * i + ch] = detail::quantize_nocs(v[ch]);
    }
    img.samples[4 * i + 3] = 65535;
  }
  return png::encode(img);
}

inline NocsMap decode_png16(const std::vector<std::uint8_t>& bytes) {
  const png::RawImage img = png::decode(bytes);
  if (img.channels != 4 || img.bit_depth != 16) fail(ErrorCode::CorruptStream, "nocs raster must be 16-bit RGBA");
  NocsMap out(img.width, img.height);
  for (std::size_t i = 0; i < out.coords.size(); ++i) {
    const std::uint16_t validity = img.samples[4 * i + 3];
    if (validity == 0) continue;
    if (validity != 65535) fail(ErrorCode::CorruptStream, "validity channel must be 0 or 65535");
    out.coords[i] = Vec3(detail::dequantize_nocs(img.samples[4 * i]), detail::dequantize_nocs(img.samples[4 * i + 1]),
                         detail::dequantize_nocs(img.samples[4 * i + 2]));
    out.valid[i] = 1;
  }
  return out;
}

/// 8-bit single-channel PNG, 255 = inside.
inline std::vector<std::uint8_t> encode_mask_png(const InstanceMask& mask) {
  png::RawImage img;
  img.width = mask.width();
  img.height = mask.height();
  img.channels = 1;
  img.bit_depth = 8;
  img.samples.resize(mask.mask.size());
  for (std::size_t i = 0; i < mask.mask.size(); ++i) img.samples[i] = mask.mask[i] ? 255 : 0;
  return png::encode(img);
}

inline InstanceMask decode_mask_png(const std::vector<std::uint8_t>& bytes) {
  const png::RawImage img = png::decode(bytes);
  if (img.channels != 1 || img.bit_depth != 8) fail(ErrorCode::CorruptStream, "mask raster must be 8-bit gray");
  InstanceMask out(img.width, img.height);
  for (std::size_t i = 0; i < out.mask.size(); ++i) out.mask[i] = img.samples[i] >= 128 ? 1 : 0;
  return out;
}

}  // namespace nocs
