#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "nocs/dataset/shard.hpp"
#include "nocs/metrics/box_iou.hpp"

namespace nocs {

struct Violation {
  std::string instance_id;  ///< empty for shard-level problems
  std::string kind;         ///< schema | io | dimension | nocs_bound | projection
  std::string detail;
};

struct CategoryOrientationStats {
  std::size_t count = 0;
  /// 1 - |mean unit ground-plane heading|: 0 when every instance faces the
  /// same way, near 1 when headings cancel out.
  double heading_spread = 0.0;
};

struct ValidationReport {
  std::size_t records = 0;
  std::vector<Violation> violations;
  std::map<std::string, CategoryOrientationStats> categories;

  bool ok() const { return violations.empty(); }

  std::string to_text() const {
    json v = json::array();
    for (const auto& x : violations) v.push_back({{"instance_id", x.instance_id}, {"kind", x.kind}, {"detail", x.detail}});
    json c = json::array();
    for (const auto& [name, s] : categories)
      c.push_back({{"category", name}, {"count", s.count}, {"heading_spread", s.heading_spread}});
    return json{{"records", records}, {"violation_count", violations.size()}, {"violations", v}, {"categories", c}}.dump(2) +
           "\n";
  }
};

/// Largest accepted NOCS norm: half the unit diagonal plus the inside-box tolerance on every axis.
inline double nocs_norm_bound() { return 0.5 + std::sqrt(3.0) * kInsideBoxTolerance + 1e-4; }

inline constexpr double kMinProjectionEnclosure = 0.95;

namespace validate_detail {

using Polygon2 = std::vector<Vec2>;

inline Polygon2 convex_hull(std::vector<Vec2> pts) {
  std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) { return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y()); });
  if (pts.size() < 3) return pts;
  const auto cross = [](const Vec2& o, const Vec2& a, const Vec2& b) {
    return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
  };
  Polygon2 hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

/// Counter-clockwise convex polygon containment with a small slack in pixels.
inline bool inside(const Polygon2& hull, const Vec2& p, double slack = 1e-6) {
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const Vec2 a = hull[i];
    const Vec2 e = hull[(i + 1) % hull.size()] - a;
    const Vec2 d = p - a;
    if (e.x() * d.y() - e.y() * d.x() < -slack * e.norm()) return false;
  }
  return true;
}

}  // namespace validate_detail

inline void validate_instance(const ShardInstance& inst, std::vector<Violation>& out) {
  const InstanceRecord& r = inst.record;
  const auto report = [&](const std::string& kind, const std::string& detail) { out.push_back({r.instance_id, kind, detail}); };

  if (!inst.mask.mask.same_shape(inst.nocs.coords) || !inst.nocs.coords.same_shape(r.camera.width, r.camera.height)) {
    report("dimension", "mask " + std::to_string(inst.mask.width()) + "x" + std::to_string(inst.mask.height()) + ", nocs " +
                            std::to_string(inst.nocs.width()) + "x" + std::to_string(inst.nocs.height()) + ", camera " +
                            std::to_string(r.camera.width) + "x" + std::to_string(r.camera.height));
    return;
  }

  std::size_t beyond = 0, valid = 0;
  double worst = 0.0;
  for (std::size_t i = 0; i < inst.nocs.coords.size(); ++i) {
    if (!inst.nocs.valid[i]) continue;
    ++valid;
    const double n = inst.nocs.coords[i].norm();
    worst = std::max(worst, n);
    beyond += n > nocs_norm_bound();
  }
  if (beyond > 0)
    report("nocs_bound", std::to_string(beyond) + " pixels beyond the unit-diagonal bound (max norm " + std::to_string(worst) + ")");

  if (valid == 0) return;
  const auto corners = box_corners(r.box3d);
  std::vector<Vec2> projected;
  for (const auto& c : corners) {
    if (!(c.z() > 0.0)) return;  // box straddles the camera plane; enclosure is not defined
    projected.push_back(project(c, r.camera));
  }
  const auto hull = validate_detail::convex_hull(projected);
  std::size_t enclosed = 0;
  for (int row = 0; row < inst.nocs.height(); ++row)
    for (int col = 0; col < inst.nocs.width(); ++col)
      if (inst.nocs.is_valid(row, col)) enclosed += validate_detail::inside(hull, Vec2(col, row));
  const double frac = static_cast<double>(enclosed) / static_cast<double>(valid);
  if (frac < kMinProjectionEnclosure)
    report("projection", "projected box encloses " + std::to_string(100.0 * frac) + "% of valid NOCS pixels");
}

inline std::map<std::string, CategoryOrientationStats> heading_statistics(const std::vector<InstanceRecord>& records,
                                                                          const GroundFrame& g = GroundFrame()) {
  std::map<std::string, std::pair<Vec2, std::size_t>> sums;
  std::map<std::string, CategoryOrientationStats> out;
  for (const auto& r : records) {
    ++out[r.category].count;
    const Vec2 h = g.flatten(r.box3d.rotation.col(0));
    if (h.norm() < 1e-6) continue;
    auto& [sum, n] = sums[r.category];
    if (n == 0) sum = Vec2::Zero();
    sum += h.normalized();
    ++n;
  }
  for (auto& [name, stats] : out) {
    const auto it = sums.find(name);
    stats.heading_spread = it == sums.end() ? 1.0 : 1.0 - it->second.first.norm() / static_cast<double>(it->second.second);
  }
  return out;
}

inline ValidationReport validate_shard(const Shard& shard) {
  ValidationReport rep;
  rep.records = shard.instances.size();
  std::vector<InstanceRecord> records;
  for (const auto& inst : shard.instances) {
    validate_instance(inst, rep.violations);
    records.push_back(inst.record);
  }
  rep.categories = heading_statistics(records);
  return rep;
}

/// Reads and checks a shard on disk. Problems are reported, not thrown.
inline ValidationReport validate_dataset(const fs::path& dir, const Taxonomy& taxonomy = bundled_taxonomy()) {
  ValidationReport rep;
  std::vector<InstanceRecord> records;
  try {
    records = read_records(dir, taxonomy);
  } catch (const Error& e) {
    rep.violations.push_back({"", e.code() == ErrorCode::IoFailure ? "io" : "schema", e.what()});
    return rep;
  }
  rep.records = records.size();
  for (const auto& r : records) {
    ShardInstance inst{r, {}, {}};
    try {
      inst.mask = decode_mask_png(read_bytes(dir / r.mask_path));
      inst.nocs = decode_png16(read_bytes(dir / r.nocs_path));
    } catch (const Error& e) {
      rep.violations.push_back({r.instance_id, e.code() == ErrorCode::IoFailure ? "io" : "schema", e.what()});
      continue;
    }
    validate_instance(inst, rep.violations);
  }
  rep.categories = heading_statistics(records);
  return rep;
}

}  // namespace nocs
