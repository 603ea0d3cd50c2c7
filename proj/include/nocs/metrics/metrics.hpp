#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "nocs/metrics/box_iou.hpp"
#include "nocs/raster.hpp"

namespace nocs {

/// Running per-category means, aggregated as the mean of category means.
class CategoryMeans {
 public:
  void add(const std::string& category, double value) {
    auto& [sum, n] = cells_[category];
    sum += value;
    ++n;
  }
  void touch(const std::string& category) { cells_[category]; }

  std::optional<double> mean(const std::string& category) const {
    const auto it = cells_.find(category);
    if (it == cells_.end() || it->second.second == 0) return std::nullopt;
    return it->second.first / static_cast<double>(it->second.second);
  }
  std::size_t count(const std::string& category) const {
    const auto it = cells_.find(category);
    return it == cells_.end() ? 0 : it->second.second;
  }
  std::optional<double> mean_of_means() const {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& [cat, cell] : cells_)
      if (cell.second > 0) {
        sum += cell.first / static_cast<double>(cell.second);
        ++n;
      }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
  }
  std::vector<std::string> categories() const {
    std::vector<std::string> out;
    for (const auto& [cat, cell] : cells_) out.push_back(cat);
    return out;
  }

 private:
  std::map<std::string, std::pair<double, std::size_t>> cells_;
};

// --- NOCS quality ----------------------------------------------------------

inline constexpr double kPsnrCap = 99.0;

struct NocsQuality {
  std::optional<double> mae;   ///< absent when the support is empty
  std::optional<double> psnr;  ///< dB, peak 1.0, capped
  std::size_t support = 0;
};

/// Error over pixels inside both masks where both maps are valid.
inline NocsQuality nocs_mae_psnr(const NocsMap& pred, const BoolGrid& pred_mask, const NocsMap& gt,
                                 const BoolGrid& gt_mask) {
  require_same_shape(pred.coords, gt.coords, "predicted vs ground-truth NOCS");
  require_same_shape(pred.coords, pred_mask, "predicted NOCS vs predicted mask");
  require_same_shape(pred.coords, gt_mask, "predicted NOCS vs ground-truth mask");
  NocsQuality q;
  double abs_sum = 0.0;
  double sq_sum = 0.0;
  for (std::size_t i = 0; i < pred.coords.size(); ++i) {
    if (!pred_mask[i] || !gt_mask[i] || !pred.valid[i] || !gt.valid[i]) continue;
    const Vec3 d = pred.coords[i] - gt.coords[i];
    abs_sum += d.cwiseAbs().sum();
    sq_sum += d.squaredNorm();
    ++q.support;
  }
  if (q.support == 0) return q;
  const double n = 3.0 * static_cast<double>(q.support);
  q.mae = abs_sum / n;
  const double mse = sq_sum / n;
  q.psnr = mse > 0.0 ? std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse)) : kPsnrCap;
  return q;
}

inline double mask_iou(const BoolGrid& pred, const BoolGrid& gt) {
  require_same_shape(pred, gt, "mask iou");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    inter += pred[i] && gt[i];
    uni += pred[i] || gt[i];
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

struct NocsInstanceEval {
  std::string category;
  NocsQuality quality;
  double mask_iou = 0.0;
};

struct NocsCategoryStats {
  std::optional<double> mae;
  std::optional<double> psnr;
  double mask_iou = 0.0;
  std::size_t count = 0;   ///< instances
  std::size_t scored = 0;  ///< instances with a non-empty NOCS support
};

struct NocsEvalResult {
  std::optional<double> mae;
  std::optional<double> psnr;
  double mask_iou = 0.0;
  std::size_t count = 0;
  std::size_t absent = 0;
  std::map<std::string, NocsCategoryStats> per_category;
};

inline NocsEvalResult aggregate_nocs(const std::vector<NocsInstanceEval>& items) {
  if (items.empty()) fail(ErrorCode::EmptyInput, "no NOCS evaluation items");
  CategoryMeans mae, psnr, iou;
  NocsEvalResult out;
  for (const auto& it : items) {
    iou.add(it.category, it.mask_iou);
    auto& cat = out.per_category[it.category];
    ++cat.count;
    if (it.quality.mae) {
      mae.add(it.category, *it.quality.mae);
      psnr.add(it.category, *it.quality.psnr);
      ++cat.scored;
    } else {
      ++out.absent;
    }
  }
  for (auto& [name, cat] : out.per_category) {
    cat.mae = mae.mean(name);
    cat.psnr = psnr.mean(name);
    cat.mask_iou = *iou.mean(name);
  }
  out.mae = mae.mean_of_means();
  out.psnr = psnr.mean_of_means();
  out.mask_iou = *iou.mean_of_means();
  out.count = items.size();
  return out;
}

// --- localization ----------------------------------------------------------

struct BoxPair {
  OrientedBox3D pred;
  OrientedBox3D gt;
  std::string category;
  std::optional<double> score;
};

struct LocalizationStats {
  double ate = 0.0;
  double aoe = 0.0;
  double ase = 0.0;
  double iou = 0.0;
  std::size_t count = 0;
};

struct LocalizationEvalResult {
  double mATE = 0.0;
  double mAOE = 0.0;
  double mASE = 0.0;
  double mIoU3D = 0.0;
  std::size_t count = 0;
  std::map<std::string, LocalizationStats> per_category;
};

struct LocalizationOptions {
  bool full_3d_ate = false;
  GroundFrame ground{};
};

/// 1 - IoU of two boxes sharing center and orientation.
inline double aligned_scale_error(const Vec3& a, const Vec3& b) {
  const double inter = a.cwiseMin(b).prod();
  return 1.0 - inter / (a.prod() + b.prod() - inter);
}

inline LocalizationEvalResult localization_metrics(const std::vector<BoxPair>& pairs,
                                                   const LocalizationOptions& opt = {}) {
  if (pairs.empty()) fail(ErrorCode::EmptyInput, "no box pairs");
  CategoryMeans ate, aoe, ase, iou;
  for (const auto& p : pairs) {
    const Vec3 d = p.pred.center - p.gt.center;
    ate.add(p.category, opt.full_3d_ate ? d.norm() : opt.ground.flatten(d).norm());
    aoe.add(p.category, wrapped_angle_difference(yaw_of(p.pred.rotation, opt.ground), yaw_of(p.gt.rotation, opt.ground)));
    ase.add(p.category, aligned_scale_error(p.pred.size, p.gt.size));
    iou.add(p.category, box3d_iou(p.pred, p.gt, true, opt.ground));
  }
  LocalizationEvalResult out;
  for (const auto& name : ate.categories())
    out.per_category[name] = {*ate.mean(name), *aoe.mean(name), *ase.mean(name), *iou.mean(name), ate.count(name)};
  out.mATE = *ate.mean_of_means();
  out.mAOE = *aoe.mean_of_means();
  out.mASE = *ase.mean_of_means();
  out.mIoU3D = *iou.mean_of_means();
  out.count = pairs.size();
  return out;
}

// --- orientation accuracy --------------------------------------------------

struct OrientationThresholds {
  std::vector<double> gravity_deg{1.0, 5.0, 90.0};
  std::vector<double> heading_deg{5.0, 10.0, 90.0};
};

struct OrientationAccuracy {
  std::vector<double> gravity;  ///< fraction per gravity threshold
  std::vector<double> heading;  ///< fraction per heading threshold
  std::size_t count = 0;
};

struct OrientationEvalResult {
  OrientationThresholds thresholds;
  OrientationAccuracy overall;
  std::map<std::string, OrientationAccuracy> per_category;
};

/// Angle between predicted and true object Z (gravity) and X (heading) axes.
inline std::pair<double, double> axis_errors(const Mat3& pred, const Mat3& gt) {
  return {angle_between(pred.col(2), gt.col(2)), angle_between(pred.col(0), gt.col(0))};
}

inline OrientationEvalResult orientation_accuracy(const std::vector<BoxPair>& pairs,
                                                  const OrientationThresholds& th = {}) {
  if (pairs.empty()) fail(ErrorCode::EmptyInput, "no box pairs");
  const double deg = M_PI / 180.0;
  std::vector<CategoryMeans> grav(th.gravity_deg.size()), head(th.heading_deg.size());
  for (const auto& p : pairs) {
    const auto [eg, eh] = axis_errors(p.pred.rotation, p.gt.rotation);
    for (std::size_t i = 0; i < grav.size(); ++i) grav[i].add(p.category, eg < th.gravity_deg[i] * deg ? 1.0 : 0.0);
    for (std::size_t i = 0; i < head.size(); ++i) head[i].add(p.category, eh < th.heading_deg[i] * deg ? 1.0 : 0.0);
  }
  OrientationEvalResult out;
  out.thresholds = th;
  out.overall.count = pairs.size();
  const auto categories = (grav.empty() ? head : grav).front().categories();
  for (const auto& name : categories) {
    OrientationAccuracy& acc = out.per_category[name];
    for (const auto& g : grav) acc.gravity.push_back(*g.mean(name));
    for (const auto& h : head) acc.heading.push_back(*h.mean(name));
    acc.count = (grav.empty() ? head : grav).front().count(name);
  }
  for (const auto& g : grav) out.overall.gravity.push_back(*g.mean_of_means());
  for (const auto& h : head) out.overall.heading.push_back(*h.mean_of_means());
  return out;
}

// --- mAP -------------------------------------------------------------------

struct MapResult {
  std::vector<double> thresholds;
  std::vector<double> map;  ///< percent, per threshold
  std::map<std::string, std::vector<double>> per_category;
  bool scored = false;
  std::size_t missed = 0;  ///< ground truths without any prediction
};

namespace map_detail {

/// All-point interpolated area under the precision/recall curve.
inline double average_precision(const std::vector<bool>& tp_in_rank_order, std::size_t num_gt) {
  if (num_gt == 0) return 0.0;
  std::vector<double> precision, recall;
  std::size_t tp = 0;
  for (std::size_t i = 0; i < tp_in_rank_order.size(); ++i) {
    tp += tp_in_rank_order[i];
    precision.push_back(static_cast<double>(tp) / static_cast<double>(i + 1));
    recall.push_back(static_cast<double>(tp) / static_cast<double>(num_gt));
  }
  for (std::size_t i = precision.size(); i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);
  double ap = 0.0, prev_recall = 0.0;
  for (std::size_t i = 0; i < precision.size(); ++i) {
    ap += (recall[i] - prev_recall) * precision[i];
    prev_recall = recall[i];
  }
  return ap;
}

inline auto box_key(const OrientedBox3D& b) {
  return std::make_tuple(b.center.x(), b.center.y(), b.center.z(), b.size.x(), b.size.y(), b.size.z(),
                         b.rotation(0, 0), b.rotation(1, 0), b.rotation(2, 0), b.rotation(0, 1), b.rotation(1, 1));
}

/// Score-ranked greedy matching of predictions to ground truths of one category.
inline double scored_ap(std::vector<const BoxPair*> items, double tau, bool yaw_only, std::size_t missed) {
  std::sort(items.begin(), items.end(), [](const BoxPair* a, const BoxPair* b) {
    if (*a->score != *b->score) return *a->score > *b->score;
    return box_key(a->pred) < box_key(b->pred);
  });
  std::vector<bool> taken(items.size(), false);
  std::vector<bool> tp;
  for (const BoxPair* p : items) {
    double best = -1.0;
    std::size_t best_j = items.size();
    for (std::size_t j = 0; j < items.size(); ++j) {
      if (taken[j]) continue;
      const double iou = box3d_iou(p->pred, items[j]->gt, yaw_only);
      if (iou > best || (iou == best && box_key(items[j]->gt) < box_key(items[best_j]->gt))) {
        best = iou;
        best_j = j;
      }
    }
    const bool hit = best_j < items.size() && best >= tau;
    if (hit) taken[best_j] = true;
    tp.push_back(hit);
  }
  return average_precision(tp, items.size() + missed);
}

}  // namespace map_detail

/// Mean over categories of per-category AP, in percent. Without scores every
/// prediction is paired with its ground truth and AP is the fraction of pairs
/// reaching the IoU threshold. With scores on every pair, predictions are
/// ranked and greedily matched and AP is the precision/recall area.
/// `missed` counts ground truths per category that have no prediction.
inline MapResult map_at_iou(const std::vector<BoxPair>& pairs, std::vector<double> thresholds = {0.25, 0.5},
                            bool yaw_only = false, const std::map<std::string, std::size_t>& missed = {}) {
  std::size_t total_missed = 0;
  for (const auto& [cat, n] : missed) total_missed += n;
  if (pairs.empty() && total_missed == 0) fail(ErrorCode::EmptyInput, "no box pairs");
  MapResult out;
  out.thresholds = thresholds;
  out.scored = !pairs.empty() &&
               std::all_of(pairs.begin(), pairs.end(), [](const BoxPair& p) { return p.score.has_value(); });
  out.missed = total_missed;

  std::map<std::string, std::vector<const BoxPair*>> by_cat;
  for (const auto& p : pairs) by_cat[p.category].push_back(&p);
  for (const auto& [cat, n] : missed)
    if (n > 0) by_cat[cat];
  const auto missed_in = [&](const std::string& cat) {
    const auto it = missed.find(cat);
    return it == missed.end() ? std::size_t{0} : it->second;
  };

  std::map<std::string, std::vector<double>> ious;
  if (!out.scored)
    for (const auto& [cat, items] : by_cat)
      for (const BoxPair* p : items) ious[cat].push_back(box3d_iou(p->pred, p->gt, yaw_only));

  for (double tau : thresholds) {
    double sum = 0.0;
    for (const auto& [cat, items] : by_cat) {
      double ap;
      if (out.scored) {
        ap = map_detail::scored_ap(items, tau, yaw_only, missed_in(cat));
      } else {
        const auto& v = ious[cat];
        ap = static_cast<double>(std::count_if(v.begin(), v.end(), [&](double x) { return x >= tau; })) /
             static_cast<double>(v.size() + missed_in(cat));
      }
      out.per_category[cat].push_back(100.0 * ap);
      sum += 100.0 * ap;
    }
    out.map.push_back(sum / static_cast<double>(by_cat.size()));
  }
  return out;
}

}  // namespace nocs
