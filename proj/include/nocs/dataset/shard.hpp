#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <ctime>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "nocs/dataset/taxonomy.hpp"
#include "nocs/io.hpp"
#include "nocs/nocs_map.hpp"
#include "nocs/parallel.hpp"

namespace nocs {

using nlohmann::json;

struct Box2D {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;
  bool operator==(const Box2D&) const = default;
};

struct InstanceRecord {
  std::string instance_id;
  std::string category;
  std::string source_dataset;
  std::string image_id;
  Box2D box2d;
  OrientedBox3D box3d;
  std::string mask_path;
  std::string nocs_path;
  std::string depth_path;  ///< empty when the shard carries no depth
  CameraIntrinsics camera;
};

inline bool operator==(const InstanceRecord& a, const InstanceRecord& b) {
  return a.instance_id == b.instance_id && a.category == b.category && a.source_dataset == b.source_dataset &&
         a.image_id == b.image_id && a.box2d == b.box2d && a.box3d == b.box3d && a.mask_path == b.mask_path &&
         a.nocs_path == b.nocs_path && a.depth_path == b.depth_path && a.camera == b.camera;
}

/// Record plus its decoded rasters.
struct ShardInstance {
  InstanceRecord record;
  InstanceMask mask;
  NocsMap nocs;
};

struct Shard {
  std::vector<ShardInstance> instances;
  std::map<std::string, DepthMap> depths;  ///< by image_id
  json meta = json::object();

  const DepthMap* depth_for(const InstanceRecord& r) const {
    const auto it = depths.find(r.image_id);
    return it == depths.end() ? nullptr : &it->second;
  }
};

// --- JSON schema -----------------------------------------------------------

inline json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

inline json box_json(const OrientedBox3D& b) {
  json rot = json::array();
  for (int r = 0; r < 3; ++r) rot.push_back(json::array({b.rotation(r, 0), b.rotation(r, 1), b.rotation(r, 2)}));
  return {{"center", vec_json(b.center)}, {"size", vec_json(b.size)}, {"rotation", rot}};
}

inline json camera_json(const CameraIntrinsics& k) {
  return {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}, {"width", k.width}, {"height", k.height}};
}

inline json record_json(const InstanceRecord& r) {
  json j = {{"instance_id", r.instance_id},
            {"category", r.category},
            {"source_dataset", r.source_dataset},
            {"image_id", r.image_id},
            {"box2d", json::array({r.box2d.x_min, r.box2d.y_min, r.box2d.x_max, r.box2d.y_max})},
            {"box3d", box_json(r.box3d)},
            {"mask_path", r.mask_path},
            {"nocs_path", r.nocs_path},
            {"camera", camera_json(r.camera)}};
  if (!r.depth_path.empty()) j["depth_path"] = r.depth_path;
  return j;
}

/// Field access that reports the offending field and record location.
class SchemaReader {
 public:
  SchemaReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) fail(ErrorCode::SchemaViolation, where_ + ": record is not an object");
  }

  const json& at(const std::string& field) const {
    if (!j_.contains(field)) fail(ErrorCode::SchemaViolation, where_ + ": missing field '" + field + "'");
    return j_.at(field);
  }
  bool has(const std::string& field) const { return j_.contains(field); }

  std::string string(const std::string& field) const {
    const json& v = at(field);
    if (!v.is_string()) bad(field, "a string");
    return v.get<std::string>();
  }
  double number(const json& v, const std::string& field) const {
    if (!v.is_number()) bad(field, "a number");
    return v.get<double>();
  }
  std::vector<double> numbers(const json& v, const std::string& field, std::size_t n) const {
    if (!v.is_array() || v.size() != n) bad(field, "an array of " + std::to_string(n) + " numbers");
    std::vector<double> out;
    for (const auto& e : v) out.push_back(number(e, field));
    return out;
  }
  Vec3 vec3(const json& v, const std::string& field) const {
    const auto n = numbers(v, field, 3);
    return {n[0], n[1], n[2]};
  }
  [[noreturn]] void bad(const std::string& field, const std::string& expected) const {
    fail(ErrorCode::SchemaViolation, where_ + ": field '" + field + "' must be " + expected);
  }
  const std::string& where() const { return where_; }

 private:
  const json& j_;
  std::string where_;
};

inline OrientedBox3D parse_box(const SchemaReader& rd, const json& j, const std::string& field) {
  const SchemaReader b(j, rd.where() + " " + field);
  OrientedBox3D box;
  box.center = b.vec3(b.at("center"), field + ".center");
  box.size = b.vec3(b.at("size"), field + ".size");
  const json& rot = b.at("rotation");
  if (!rot.is_array() || rot.size() != 3) b.bad(field + ".rotation", "a 3x3 array");
  for (int r = 0; r < 3; ++r) box.rotation.row(r) = b.vec3(rot[r], field + ".rotation").transpose();
  return box;
}

inline CameraIntrinsics parse_camera(const SchemaReader& rd, const json& j) {
  const SchemaReader c(j, rd.where() + " camera");
  CameraIntrinsics k;
  k.fx = c.number(c.at("fx"), "camera.fx");
  k.fy = c.number(c.at("fy"), "camera.fy");
  k.cx = c.number(c.at("cx"), "camera.cx");
  k.cy = c.number(c.at("cy"), "camera.cy");
  if (!c.at("width").is_number_integer()) c.bad("camera.width", "an integer");
  if (!c.at("height").is_number_integer()) c.bad("camera.height", "an integer");
  k.width = c.at("width").get<int>();
  k.height = c.at("height").get<int>();
  return k;
}

inline InstanceRecord parse_record(const json& j, const std::string& where, const Taxonomy& taxonomy) {
  const SchemaReader rd(j, where);
  InstanceRecord r;
  r.instance_id = rd.string("instance_id");
  r.category = rd.string("category");
  r.source_dataset = rd.string("source_dataset");
  r.image_id = rd.string("image_id");
  const auto b = rd.numbers(rd.at("box2d"), "box2d", 4);
  r.box2d = {b[0], b[1], b[2], b[3]};
  r.box3d = parse_box(rd, rd.at("box3d"), "box3d");
  r.mask_path = rd.string("mask_path");
  r.nocs_path = rd.string("nocs_path");
  if (rd.has("depth_path")) r.depth_path = rd.string("depth_path");
  r.camera = parse_camera(rd, rd.at("camera"));

  if (r.instance_id.empty()) rd.bad("instance_id", "non-empty");
  if (!taxonomy.contains(r.category)) rd.bad("category", "a registered category (got '" + r.category + "')");
  try {
    r.camera.validate();
    r.box3d.validate();
  } catch (const Error& e) {
    fail(ErrorCode::SchemaViolation, where + ": " + e.what());
  }
  if (!(r.box2d.x_min >= 0.0 && r.box2d.y_min >= 0.0 && r.box2d.x_min <= r.box2d.x_max &&
        r.box2d.y_min <= r.box2d.y_max && r.box2d.x_max <= r.camera.width && r.box2d.y_max <= r.camera.height))
    rd.bad("box2d", "an ordered box inside the image");
  return r;
}

// --- shard IO --------------------------------------------------------------

inline constexpr const char* kRecordsFile = "records.jsonl";
inline constexpr const char* kMetaFile = "meta.json";

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Fills in default sidecar paths for records that lack them.
inline void assign_default_paths(ShardInstance& inst, bool has_depth) {
  InstanceRecord& r = inst.record;
  if (r.mask_path.empty()) r.mask_path = "masks/" + r.instance_id + ".png";
  if (r.nocs_path.empty()) r.nocs_path = "nocs/" + r.instance_id + ".png";
  if (has_depth && r.depth_path.empty()) r.depth_path = "images/" + r.image_id + ".pfm";
}

/// Writes records sorted by instance_id plus their raster sidecars. The
/// "created" timestamp in meta.json is the only time-dependent byte.
inline void write_shard(Shard shard, const fs::path& dir, int jobs = 1) {
  std::sort(shard.instances.begin(), shard.instances.end(),
            [](const ShardInstance& a, const ShardInstance& b) { return a.record.instance_id < b.record.instance_id; });
  for (std::size_t i = 1; i < shard.instances.size(); ++i)
    if (shard.instances[i].record.instance_id == shard.instances[i - 1].record.instance_id)
      fail(ErrorCode::SchemaViolation, "duplicate instance_id '" + shard.instances[i].record.instance_id + "'");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorCode::IoFailure, "cannot create " + dir.string() + ": " + ec.message());

  std::string index;
  for (auto& inst : shard.instances) {
    assign_default_paths(inst, shard.depths.count(inst.record.image_id) != 0);
    index += record_json(inst.record).dump() + "\n";
  }
  write_text(dir / kRecordsFile, index);
  parallel_for(shard.instances.size(), jobs, [&](std::size_t i) {
    const ShardInstance& inst = shard.instances[i];
    write_bytes(dir / inst.record.mask_path, encode_mask_png(inst.mask));
    write_bytes(dir / inst.record.nocs_path, encode_png16(inst.nocs));
  });
  for (const auto& [image_id, depth] : shard.depths) write_bytes(dir / "images" / (image_id + ".pfm"), encode_pfm(depth));

  json meta = shard.meta;
  meta["format"] = "nocs-shard";
  meta["version"] = 1;
  meta["count"] = shard.instances.size();
  meta["created"] = utc_timestamp();
  write_text(dir / kMetaFile, meta.dump(2) + "\n");
}

inline std::vector<InstanceRecord> read_records(const fs::path& dir, const Taxonomy& taxonomy = bundled_taxonomy()) {
  const std::string text = read_text(dir / kRecordsFile);
  std::vector<InstanceRecord> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = std::string(kRecordsFile) + ":" + std::to_string(lineno);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      fail(ErrorCode::SchemaViolation, where + ": " + e.what());
    }
    out.push_back(parse_record(j, where, taxonomy));
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const InstanceRecord& a, const InstanceRecord& b) { return a.instance_id < b.instance_id; });
  for (std::size_t i = 1; i < out.size(); ++i)
    if (out[i].instance_id == out[i - 1].instance_id)
      fail(ErrorCode::SchemaViolation, "duplicate instance_id '" + out[i].instance_id + "'");
  return out;
}

inline Shard read_shard(const fs::path& dir, const Taxonomy& taxonomy = bundled_taxonomy(), int jobs = 1) {
  if (!fs::is_directory(dir)) fail(ErrorCode::IoFailure, "shard directory " + dir.string() + " does not exist");
  Shard shard;
  for (auto& r : read_records(dir, taxonomy)) shard.instances.push_back({std::move(r), {}, {}});
  parallel_for(shard.instances.size(), jobs, [&](std::size_t i) {
    ShardInstance& inst = shard.instances[i];
    inst.mask = decode_mask_png(read_bytes(dir / inst.record.mask_path));
    inst.nocs = decode_png16(read_bytes(dir / inst.record.nocs_path));
  });
  for (const auto& inst : shard.instances) {
    const auto& r = inst.record;
    if (r.depth_path.empty() || shard.depths.count(r.image_id)) continue;
    shard.depths.emplace(r.image_id, decode_pfm(read_bytes(dir / r.depth_path)));
  }
  if (fs::exists(dir / kMetaFile)) {
    try {
      shard.meta = json::parse(read_text(dir / kMetaFile));
    } catch (const json::exception& e) {
      fail(ErrorCode::SchemaViolation, std::string(kMetaFile) + ": " + e.what());
    }
  }
  return shard;
}

/// Digest over every file except meta.json, keyed by relative path.
inline std::string shard_digest(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file() && fs::relative(e.path(), dir) != kMetaFile) files.push_back(fs::relative(e.path(), dir));
  std::sort(files.begin(), files.end());
  Fnv1a h;
  for (const auto& f : files) {
    h.update(f.generic_string());
    const auto bytes = read_bytes(dir / f);
    h.update(bytes.data(), bytes.size());
  }
  return h.hex();
}

}  // namespace nocs
