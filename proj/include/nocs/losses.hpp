#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "nocs/geometry.hpp"
#include "nocs/raster.hpp"

namespace nocs {

/// Number of non-overlapping classification bins per predicted scalar.
inline constexpr int kNumBins = 50;

using BinVector = Eigen::Matrix<double, kNumBins, 1>;
/// One row of bin logits per axis / NOCS channel.
using BinLogits3 = Eigen::Matrix<double, 3, kNumBins, Eigen::RowMajor>;

/// Uniform bins over [lo, hi], either in linear or in log space. Centers are
/// the midpoints of the bin edges in both cases, so a one-hot decode is
/// always within half a bin width of any value in that bin.
class BinLayout {
 public:
  static BinLayout uniform(double lo, double hi) { return BinLayout(lo, hi, false); }
  static BinLayout log_uniform(double lo, double hi) { return BinLayout(lo, hi, true); }

  double lo() const { return lo_; }
  double hi() const { return hi_; }
  const BinVector& centers() const { return centers_; }
  double edge(int i) const { return edges_[static_cast<std::size_t>(i)]; }
  double width(int bin) const { return edge(bin + 1) - edge(bin); }
  bool contains(double v) const { return v >= lo_ && v <= hi_; }

  /// Index of the bin containing v; values outside the range clamp to the end bins.
  int bin_of(double v) const {
    const double t = log_ ? (std::log(v) - std::log(lo_)) / (std::log(hi_) - std::log(lo_)) : (v - lo_) / (hi_ - lo_);
    if (!(t > 0.0)) return 0;
    return std::min(kNumBins - 1, static_cast<int>(std::floor(t * kNumBins)));
  }

 private:
  BinLayout(double lo, double hi, bool log_space) : lo_(lo), hi_(hi), log_(log_space) {
    for (int i = 0; i <= kNumBins; ++i) {
      const double t = static_cast<double>(i) / kNumBins;
      edges_[static_cast<std::size_t>(i)] =
          log_ ? std::exp(std::log(lo) + t * (std::log(hi) - std::log(lo))) : lo + t * (hi - lo);
    }
    edges_.front() = lo;
    edges_.back() = hi;
    for (int i = 0; i < kNumBins; ++i) centers_(i) = 0.5 * (edge(i) + edge(i + 1));
  }

  double lo_;
  double hi_;
  bool log_;
  std::array<double, kNumBins + 1> edges_{};
  BinVector centers_;
};

/// NOCS coordinates: uniform over the full [-0.5, 0.5] range.
inline const BinLayout& nocs_bins() {
  static const BinLayout layout = BinLayout::uniform(-0.5, 0.5);
  return layout;
}

/// Metric object sizes: log-uniform over [0.01 m, 30 m].
inline const BinLayout& size_bins() {
  static const BinLayout layout = BinLayout::log_uniform(0.01, 30.0);
  return layout;
}

inline BinVector softmax(const BinVector& logits) {
  const BinVector e = (logits.array() - logits.maxCoeff()).exp();
  return e / e.sum();
}

inline double log_sum_exp(const BinVector& logits) {
  const double m = logits.maxCoeff();
  return m + std::log((logits.array() - m).exp().sum());
}

/// Logits over one scalar's bins, decoded as the softmax-weighted bin center.
struct BinnedDistribution {
  const BinLayout* layout = &nocs_bins();
  BinVector logits = BinVector::Zero();

  double decode() const { return softmax(logits).dot(layout->centers()); }
};

/// Decoded value plus the pieces of its derivative wrt the logits:
/// d decode / d logit_k = p_k (center_k - decoded).
struct SoftDecode {
  double value;
  BinVector probs;
};

inline SoftDecode soft_decode(const BinVector& logits, const BinLayout& layout) {
  SoftDecode out{0.0, softmax(logits)};
  out.value = out.probs.dot(layout.centers());
  return out;
}

inline double sign_of(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

// --- mask ------------------------------------------------------------------

struct MaskLoss {
  double value = 0.0;
  Grid<double> grad;
};

/// L2 norm of (pred - gt) over the grid.
inline MaskLoss loss_mask(const Grid<double>& pred, const BoolGrid& gt) {
  require_same_shape(pred, gt, "mask prediction vs ground truth");
  MaskLoss out;
  out.grad = Grid<double>(pred.width(), pred.height(), 0.0);
  double sq = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - (gt[i] ? 1.0 : 0.0);
    sq += d * d;
  }
  out.value = std::sqrt(sq);
  if (out.value > 0.0)
    for (std::size_t i = 0; i < pred.size(); ++i) out.grad[i] = (pred[i] - (gt[i] ? 1.0 : 0.0)) / out.value;
  return out;
}

// --- NOCS ------------------------------------------------------------------

struct NocsLoss {
  double value = 0.0;
  double cross_entropy = 0.0;  ///< mean CE per valid (pixel, channel)
  double l1 = 0.0;             ///< mean |n - n_gt| per valid (pixel, channel)
  std::size_t support = 0;     ///< number of contributing pixels
  Grid<BinLogits3> grad;
};

/// Cross-entropy against the one-hot bin of the ground truth plus L1 between
/// the soft-decoded value and the ground truth, averaged over the pixels that
/// are valid in both `valid` and `gt` and over the 3 channels.
inline NocsLoss loss_nocs(const Grid<BinLogits3>& logits, const NocsMap& gt, const BoolGrid& valid) {
  require_same_shape(logits, gt.coords, "nocs logits vs ground truth");
  require_same_shape(logits, valid, "nocs logits vs valid grid");
  const BinLayout& bins = nocs_bins();
  NocsLoss out;
  out.grad = Grid<BinLogits3>(logits.width(), logits.height(), BinLogits3::Zero());
  for (std::size_t i = 0; i < logits.size(); ++i) out.support += valid[i] && gt.valid[i];
  if (out.support == 0) return out;
  const double norm = 1.0 / (3.0 * static_cast<double>(out.support));

  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (!valid[i] || !gt.valid[i]) continue;
    for (int ch = 0; ch < 3; ++ch) {
      const BinVector l = logits[i].row(ch).transpose();
      const double target = gt.coords[i][ch];
      const int bin = bins.bin_of(target);
      const SoftDecode dec = soft_decode(l, bins);
      const double ce = log_sum_exp(l) - l(bin);
      const double diff = dec.value - target;
      out.cross_entropy += ce * norm;
      out.l1 += std::abs(diff) * norm;

      BinVector g = dec.probs;
      g(bin) -= 1.0;
      g += sign_of(diff) * dec.probs.cwiseProduct(bins.centers() - BinVector::Constant(dec.value));
      out.grad[i].row(ch) = (g * norm).transpose();
    }
  }
  out.value = out.cross_entropy + out.l1;
  return out;
}

// --- size ------------------------------------------------------------------

struct SizeLoss {
  double value = 0.0;
  double cross_entropy = 0.0;
  double relative_l1 = 0.0;
  BinLogits3 grad_logits = BinLogits3::Zero();
  Vec3 grad_decoded = Vec3::Zero();
};

/// Decodes three size-bin logit rows into a metric size.
inline Vec3 decode_size(const BinLogits3& logits) {
  Vec3 out;
  for (int a = 0; a < 3; ++a) out[a] = soft_decode(logits.row(a).transpose(), size_bins()).value;
  return out;
}

/// CE over the size bins plus |s - s_gt| / s_gt, both summed over the 3 axes.
inline SizeLoss loss_size(const BinLogits3& logits, const Vec3& decoded, const Vec3& gt) {
  const BinLayout& bins = size_bins();
  for (int a = 0; a < 3; ++a) {
    if (!(gt[a] > 0.0)) fail(ErrorCode::InvalidGroundTruth, "ground-truth size must be positive");
    if (!bins.contains(gt[a]))
      fail(ErrorCode::OutOfRange, "ground-truth size " + std::to_string(gt[a]) + " outside the size bin range");
  }
  SizeLoss out;
  for (int a = 0; a < 3; ++a) {
    const BinVector l = logits.row(a).transpose();
    const int bin = bins.bin_of(gt[a]);
    out.cross_entropy += log_sum_exp(l) - l(bin);
    BinVector g = softmax(l);
    g(bin) -= 1.0;
    out.grad_logits.row(a) = g.transpose();
    out.relative_l1 += std::abs(decoded[a] - gt[a]) / gt[a];
    out.grad_decoded[a] = sign_of(decoded[a] - gt[a]) / gt[a];
  }
  out.value = out.cross_entropy + out.relative_l1;
  return out;
}

// --- learned PnP head ------------------------------------------------------

struct RotationLoss {
  double value = 0.0;
  Mat3 grad = Mat3::Zero();
};

/// Entrywise L1 norm of the difference.
inline RotationLoss loss_rot(const Mat3& pred, const Mat3& gt) {
  const Mat3 d = pred - gt;
  return {d.cwiseAbs().sum(), d.unaryExpr([](double v) { return sign_of(v); })};
}

struct CentroidLoss {
  double value = 0.0;
  Vec2 grad = Vec2::Zero();
};

inline CentroidLoss loss_centroid(const Vec2& pred, const Vec2& gt) {
  const Vec2 d = pred - gt;
  const double n = d.norm();
  return {n, n > 0.0 ? Vec2(d / n) : Vec2::Zero()};
}

inline double loss_pnp(const Mat3& r_pred, const Mat3& r_gt, const Vec2& c_pred, const Vec2& c_gt) {
  return loss_rot(r_pred, r_gt).value + loss_centroid(c_pred, c_gt).value;
}

// --- self-supervised reprojection ------------------------------------------

struct ReprojectionLoss {
  double value = 0.0;
  std::size_t contributing = 0;
  std::size_t skipped_behind_camera = 0;
  /// d value / d NOCS per pixel. The mask receives no gradient.
  Grid<Vec3> grad;
};

/// Mean pixel distance between each masked pixel and the projection of its
/// NOCS point placed with the ground-truth pose and size. Points that land
/// behind the camera are counted and skipped.
inline ReprojectionLoss loss_reprojection_ss(const NocsMap& nocs, const BoolGrid& mask_pred, const RigidPose& pose_gt,
                                             const Vec3& size_gt, const CameraIntrinsics& k) {
  require_same_shape(nocs.coords, mask_pred, "nocs vs predicted mask");
  if (!(size_gt.minCoeff() > 0.0)) fail(ErrorCode::InvalidSize, "ground-truth size must be positive");
  const double scale = size_gt.norm();
  ReprojectionLoss out;
  out.grad = Grid<Vec3>(nocs.width(), nocs.height(), Vec3::Zero());

  double sum = 0.0;
  for (int r = 0; r < nocs.height(); ++r) {
    for (int c = 0; c < nocs.width(); ++c) {
      if (!mask_pred(r, c) || !nocs.is_valid(r, c)) continue;
      const Vec3 x = pose_gt.apply(scale * nocs.coords(r, c));
      if (!(x.z() > 0.0)) {
        ++out.skipped_behind_camera;
        continue;
      }
      const double iz = 1.0 / x.z();
      const Vec2 e(k.fx * x.x() * iz + k.cx - c, k.fy * x.y() * iz + k.cy - r);
      const double n = e.norm();
      sum += n;
      ++out.contributing;
      if (n > 0.0) {
        Eigen::Matrix<double, 2, 3> dproj;
        dproj << k.fx * iz, 0.0, -k.fx * x.x() * iz * iz, 0.0, k.fy * iz, -k.fy * x.y() * iz * iz;
        out.grad(r, c) = scale * (pose_gt.rotation.transpose() * (dproj.transpose() * (e / n)));
      }
    }
  }
  if (out.contributing == 0) return out;
  out.value = sum / static_cast<double>(out.contributing);
  const double inv = 1.0 / static_cast<double>(out.contributing);
  for (auto& g : out.grad.data()) g *= inv;
  return out;
}

// --- total -----------------------------------------------------------------

struct LossWeights {
  double size = 1.0;
  double mask = 1.0;
  double nocs = 1.0;
  double ss = 1.0;
  double pnp = 1.0;
};

struct LossComponents {
  double size = 0.0;
  double mask = 0.0;
  double nocs = 0.0;
  double ss = 0.0;
  double pnp = 0.0;
};

inline double loss_total(const LossComponents& c, const LossWeights& w = {}) {
  for (double v : {c.size, c.mask, c.nocs, c.ss, c.pnp})
    if (!std::isfinite(v)) fail(ErrorCode::NonFinite, "loss component is not finite");
  for (double v : {w.size, w.mask, w.nocs, w.ss, w.pnp})
    if (!(v >= 0.0) || !std::isfinite(v)) fail(ErrorCode::NonFinite, "loss weights must be finite and non-negative");
  return w.size * c.size + w.mask * c.mask + w.nocs * c.nocs + w.ss * c.ss + w.pnp * c.pnp;
}

}  // namespace nocs
