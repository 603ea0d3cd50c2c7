#pragma once

#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "nocs/dataset/shard.hpp"

namespace nocs {

/// Snaps a near signed-permutation matrix to exact entries. Throws
/// InvalidOffset unless it is one of the 24 cube rotations.
inline Mat3 cube_rotation(const Mat3& m, double tol = 1e-6) {
  Mat3 out = Mat3::Zero();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) {
      const double v = m(r, c);
      if (std::abs(v) <= tol) continue;
      if (std::abs(std::abs(v) - 1.0) > tol) fail(ErrorCode::InvalidOffset, "offset entries must be 0 or +-1");
      out(r, c) = v > 0 ? 1.0 : -1.0;
    }
  const Mat3 id = out * out.transpose();
  if (!id.isIdentity(0.0) || out.determinant() < 0.0)
    fail(ErrorCode::InvalidOffset, "offset is not a proper 90-degree rotation");
  return out;
}

/// All 24 proper rotations that map coordinate axes to coordinate axes.
inline std::vector<Mat3> cube_group() {
  std::vector<Mat3> out;
  const std::array<std::array<int, 3>, 6> perms{{{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};
  for (const auto& p : perms)
    for (int signs = 0; signs < 8; ++signs) {
      Mat3 m = Mat3::Zero();
      for (int r = 0; r < 3; ++r) m(r, p[r]) = (signs >> r) & 1 ? -1.0 : 1.0;
      if (m.determinant() > 0.0) out.push_back(m);
    }
  return out;
}

/// Re-expresses the box in rotated object axes: rotation * offset, with the
/// extents following their axes. The occupied volume is unchanged.
inline OrientedBox3D apply_canonicalization(const OrientedBox3D& box, const Mat3& offset) {
  const Mat3 o = cube_rotation(offset);
  return {box.center, o.transpose().cwiseAbs() * box.size, box.rotation * o};
}

/// NOCS of the same surface point after the object axes were rotated by `offset`.
inline Vec3 canonicalize_nocs(const Vec3& n, const Mat3& offset) { return offset.transpose() * n; }

inline ShardInstance apply_canonicalization(const ShardInstance& inst, const Mat3& offset) {
  const Mat3 o = cube_rotation(offset);
  ShardInstance out = inst;
  out.record.box3d = apply_canonicalization(inst.record.box3d, o);
  if (!o.isIdentity(0.0))
    for (std::size_t i = 0; i < out.nocs.coords.size(); ++i)
      if (out.nocs.valid[i]) out.nocs.coords[i] = canonicalize_nocs(out.nocs.coords[i], o);
  return out;
}

/// Offsets per (source_dataset, category) plus per-instance overrides.
struct CanonicalizationTable {
  std::map<std::pair<std::string, std::string>, Mat3> entries;
  std::map<std::string, Mat3> overrides;

  std::optional<Mat3> lookup(const InstanceRecord& r) const {
    if (const auto it = overrides.find(r.instance_id); it != overrides.end()) return it->second;
    if (const auto it = entries.find({r.source_dataset, r.category}); it != entries.end()) return it->second;
    return std::nullopt;
  }
};

namespace canon_detail {

inline Mat3 parse_offset(const SchemaReader& rd, const json& j) {
  if (!j.is_array() || j.size() != 3) rd.bad("offset", "a 3x3 array");
  Mat3 m;
  for (int r = 0; r < 3; ++r) m.row(r) = rd.vec3(j[r], "offset").transpose();
  return cube_rotation(m);
}

}  // namespace canon_detail

/// {"entries": [{"source_dataset", "category", "offset": 3x3}],
///  "overrides": [{"instance_id", "offset": 3x3}]}
inline CanonicalizationTable parse_canonicalization_table(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::SchemaViolation, std::string("canonicalization table: ") + e.what());
  }
  const SchemaReader top(j, "canonicalization table");
  CanonicalizationTable t;
  if (top.has("entries")) {
    if (!top.at("entries").is_array()) top.bad("entries", "an array");
    int i = 0;
    for (const auto& e : top.at("entries")) {
      const SchemaReader rd(e, "canonicalization table entry " + std::to_string(i++));
      t.entries[{rd.string("source_dataset"), rd.string("category")}] = canon_detail::parse_offset(rd, rd.at("offset"));
    }
  }
  if (top.has("overrides")) {
    if (!top.at("overrides").is_array()) top.bad("overrides", "an array");
    int i = 0;
    for (const auto& e : top.at("overrides")) {
      const SchemaReader rd(e, "canonicalization table override " + std::to_string(i++));
      t.overrides[rd.string("instance_id")] = canon_detail::parse_offset(rd, rd.at("offset"));
    }
  }
  return t;
}

inline std::string write_canonicalization_table(const CanonicalizationTable& t) {
  const auto mat = [](const Mat3& m) {
    json rows = json::array();
    for (int r = 0; r < 3; ++r) rows.push_back(json::array({m(r, 0), m(r, 1), m(r, 2)}));
    return rows;
  };
  json entries = json::array(), overrides = json::array();
  for (const auto& [key, m] : t.entries)
    entries.push_back({{"source_dataset", key.first}, {"category", key.second}, {"offset", mat(m)}});
  for (const auto& [id, m] : t.overrides) overrides.push_back({{"instance_id", id}, {"offset", mat(m)}});
  return json{{"entries", entries}, {"overrides", overrides}}.dump(2) + "\n";
}

struct CanonicalizationOutcome {
  Shard shard;
  std::vector<std::string> missing;          ///< "source/category" pairs present in the shard without an entry
  std::vector<std::string> unused_entries;   ///< table entries for categories absent from the shard
};

/// Applies the table to every instance. Instances without an entry are left
/// as they are and reported in `missing`.
inline CanonicalizationOutcome canonicalize_shard(const Shard& in, const CanonicalizationTable& table) {
  CanonicalizationOutcome out;
  out.shard.depths = in.depths;
  out.shard.meta = in.meta;
  std::map<std::pair<std::string, std::string>, bool> seen;
  for (const auto& inst : in.instances) {
    const auto key = std::make_pair(inst.record.source_dataset, inst.record.category);
    seen[key] = true;
    const auto offset = table.lookup(inst.record);
    if (!offset) {
      const std::string name = key.first + "/" + key.second;
      if (std::find(out.missing.begin(), out.missing.end(), name) == out.missing.end()) out.missing.push_back(name);
      out.shard.instances.push_back(inst);
      continue;
    }
    out.shard.instances.push_back(apply_canonicalization(inst, *offset));
  }
  for (const auto& [key, m] : table.entries)
    if (!seen.count(key)) out.unused_entries.push_back(key.first + "/" + key.second);
  return out;
}

// --- six-candidate enumeration ---------------------------------------------

inline constexpr double kGravityAlignmentDeg = 5.0;

struct OrientationCandidate {
  int index = 0;
  Mat3 offset = Mat3::Identity();  ///< cube rotation taking the input box to this candidate
  OrientedBox3D box;
};

/// The six ways of choosing the box's front face. Candidates 0-3 keep Z on
/// the up-most box axis and take each horizontal face normal (+a, +b, -a, -b)
/// as X. Candidates 4-5 take +up / -up as X with Z on the first horizontal
/// axis, for objects whose up direction is ambiguous.
inline std::array<OrientationCandidate, 6> enumerate_orientation_candidates(const OrientedBox3D& box,
                                                                           const UnitRay& up) {
  box.validate();
  const Vec3& u = up.direction();
  int k = 0;
  for (int i = 1; i < 3; ++i)
    if (std::abs(box.rotation.col(i).dot(u)) > std::abs(box.rotation.col(k).dot(u))) k = i;
  const double tilt = angle_between(box.rotation.col(k) * (box.rotation.col(k).dot(u) >= 0 ? 1.0 : -1.0), u);
  if (tilt > kGravityAlignmentDeg * M_PI / 180.0)
    fail(ErrorCode::NotGravityAligned,
         "no box axis within " + std::to_string(kGravityAlignmentDeg) + " deg of up (closest " +
             std::to_string(tilt * 180.0 / M_PI) + " deg)");

  const Vec3 z_up = box.rotation.col(k) * (box.rotation.col(k).dot(u) >= 0 ? 1.0 : -1.0);
  const Vec3 a = box.rotation.col((k + 1) % 3);
  const Vec3 b = box.rotation.col((k + 2) % 3);
  const std::array<std::pair<Vec3, Vec3>, 6> frames{{{a, z_up}, {b, z_up}, {-a, z_up}, {-b, z_up}, {z_up, a}, {-z_up, a}}};

  std::array<OrientationCandidate, 6> out;
  for (int i = 0; i < 6; ++i) {
    Mat3 r;
    r.col(0) = frames[i].first;
    r.col(2) = frames[i].second;
    r.col(1) = r.col(2).cross(r.col(0));
    out[i].index = i;
    out[i].offset = cube_rotation(box.rotation.transpose() * r);
    out[i].box = apply_canonicalization(box, out[i].offset);
  }
  return out;
}

}  // namespace nocs
