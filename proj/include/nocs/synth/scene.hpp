#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "nocs/dataset/shard.hpp"
#include "nocs/metrics/box_iou.hpp"
#include "nocs/nocs_map.hpp"
#include "nocs/synth/rng.hpp"

namespace nocs {

enum class ShapeKind { BoxSurface, Ellipsoid, Mesh };

inline std::string to_string(ShapeKind s) {
  switch (s) {
    case ShapeKind::BoxSurface: return "box_surface";
    case ShapeKind::Ellipsoid: return "ellipsoid";
    case ShapeKind::Mesh: return "mesh";
  }
  return "box_surface";
}

inline ShapeKind parse_shape(const std::string& s) {
  if (s == "box_surface") return ShapeKind::BoxSurface;
  if (s == "ellipsoid") return ShapeKind::Ellipsoid;
  if (s == "mesh") return ShapeKind::Mesh;
  fail(ErrorCode::SchemaViolation, "unknown shape '" + s + "'");
}

/// Triangle mesh in unit-box coordinates: vertices span [-0.5, 0.5] on every
/// axis and are scaled by the object's box size when rendered.
struct Mesh {
  std::string name;
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> faces;
};

inline Mesh builtin_mesh(const std::string& name) {
  if (name == "octahedron") {
    return {name,
            {{0.5, 0, 0}, {-0.5, 0, 0}, {0, 0.5, 0}, {0, -0.5, 0}, {0, 0, 0.5}, {0, 0, -0.5}},
            {{0, 2, 4}, {2, 1, 4}, {1, 3, 4}, {3, 0, 4}, {2, 0, 5}, {1, 2, 5}, {3, 1, 5}, {0, 3, 5}}};
  }
  if (name == "wedge") {
    // Triangular prism: a ramp rising toward +x.
    return {name,
            {{-0.5, -0.5, -0.5}, {0.5, -0.5, -0.5}, {0.5, -0.5, 0.5}, {-0.5, 0.5, -0.5}, {0.5, 0.5, -0.5}, {0.5, 0.5, 0.5}},
            {{0, 1, 2}, {3, 5, 4}, {0, 3, 4}, {0, 4, 1}, {1, 4, 5}, {1, 5, 2}, {0, 2, 5}, {0, 5, 3}}};
  }
  fail(ErrorCode::SchemaViolation, "unknown builtin mesh '" + name + "'");
}

struct SceneObject {
  std::string category = "box";
  OrientedBox3D box;
  ShapeKind shape = ShapeKind::BoxSurface;
  Mesh mesh;  ///< used when shape == Mesh
};

struct SceneSpec {
  CameraIntrinsics camera{500.0, 500.0, 320.0, 240.0, 640, 480};
  std::vector<SceneObject> objects;
  std::uint64_t seed = 0;
  std::string image_id = "scene";
  std::string source_dataset = "synth";
};

// --- serialization ---------------------------------------------------------

inline json scene_json(const SceneSpec& s) {
  json objs = json::array();
  for (const auto& o : s.objects) {
    json j = {{"category", o.category}, {"shape", to_string(o.shape)}, {"box", box_json(o.box)}};
    if (o.shape == ShapeKind::Mesh) {
      if (!o.mesh.name.empty()) {
        j["mesh"] = o.mesh.name;
      } else {
        json v = json::array(), f = json::array();
        for (const auto& p : o.mesh.vertices) v.push_back(vec_json(p));
        for (const auto& t : o.mesh.faces) f.push_back(json::array({t[0], t[1], t[2]}));
        j["mesh"] = {{"vertices", v}, {"faces", f}};
      }
    }
    objs.push_back(j);
  }
  return {{"camera", camera_json(s.camera)}, {"seed", s.seed},          {"image_id", s.image_id},
          {"source_dataset", s.source_dataset}, {"objects", objs}};
}

inline Mesh parse_mesh(const SchemaReader& rd, const json& j) {
  if (j.is_string()) return builtin_mesh(j.get<std::string>());
  const SchemaReader m(j, rd.where() + " mesh");
  Mesh mesh;
  if (!m.at("vertices").is_array()) m.bad("mesh.vertices", "an array");
  for (const auto& v : m.at("vertices")) mesh.vertices.push_back(m.vec3(v, "mesh.vertices"));
  if (!m.at("faces").is_array()) m.bad("mesh.faces", "an array");
  for (const auto& f : m.at("faces")) {
    const auto idx = m.numbers(f, "mesh.faces", 3);
    std::array<int, 3> t{};
    for (int i = 0; i < 3; ++i) {
      t[i] = static_cast<int>(idx[i]);
      if (t[i] < 0 || t[i] >= static_cast<int>(mesh.vertices.size()) || t[i] != idx[i])
        m.bad("mesh.faces", "vertex indices");
    }
    mesh.faces.push_back(t);
  }
  return mesh;
}

inline SceneSpec parse_scene(const json& j, const std::string& where = "scene") {
  const SchemaReader rd(j, where);
  SceneSpec s;
  if (rd.has("camera")) s.camera = parse_camera(rd, rd.at("camera"));
  if (rd.has("seed")) {
    if (!rd.at("seed").is_number_unsigned()) rd.bad("seed", "a non-negative integer");
    s.seed = rd.at("seed").get<std::uint64_t>();
  }
  if (rd.has("image_id")) s.image_id = rd.string("image_id");
  if (rd.has("source_dataset")) s.source_dataset = rd.string("source_dataset");
  if (!rd.at("objects").is_array()) rd.bad("objects", "an array");
  int i = 0;
  for (const auto& o : rd.at("objects")) {
    const SchemaReader od(o, where + " object " + std::to_string(i++));
    SceneObject obj;
    obj.category = od.string("category");
    if (od.has("shape")) obj.shape = parse_shape(od.string("shape"));
    obj.box = parse_box(od, od.at("box"), "box");
    if (obj.shape == ShapeKind::Mesh) obj.mesh = parse_mesh(od, od.at("mesh"));
    s.objects.push_back(std::move(obj));
  }
  return s;
}

// --- random scenes ---------------------------------------------------------

struct RandomSceneOptions {
  int min_objects = 1;
  int max_objects = 3;
  std::vector<ShapeKind> shapes{ShapeKind::BoxSurface, ShapeKind::Ellipsoid, ShapeKind::Mesh};
  std::vector<std::string> categories{"box", "car", "chair", "cup", "bottle", "monitor"};
  double min_depth = 3.0;
  double max_depth = 8.0;
  double min_extent = 0.4;
  double max_extent = 2.0;
  /// Maximum tilt away from gravity-aligned, in radians.
  double max_tilt = 0.0;
};

/// Objects placed inside the view frustum, resting below the camera so that
/// their tops are visible, and kept apart so their boxes never intersect.
inline SceneSpec random_scene(std::uint64_t seed, const CameraIntrinsics& camera, const RandomSceneOptions& opt = {}) {
  const CounterRng rng(seed, 1);
  std::uint64_t n = 0;
  SceneSpec s;
  s.camera = camera;
  s.seed = seed;
  const int count = opt.min_objects + static_cast<int>(rng.bits(n++) % static_cast<std::uint64_t>(opt.max_objects - opt.min_objects + 1));
  for (int attempt = 0; static_cast<int>(s.objects.size()) < count && attempt < 200; ++attempt) {
    SceneObject o;
    o.shape = opt.shapes[rng.bits(n++) % opt.shapes.size()];
    o.category = opt.categories[rng.bits(n++) % opt.categories.size()];
    if (o.shape == ShapeKind::Mesh) o.mesh = builtin_mesh(rng.bits(n++) % 2 ? "wedge" : "octahedron");
    o.box.size = Vec3(rng.uniform(n, opt.min_extent, opt.max_extent), rng.uniform(n + 1, opt.min_extent, opt.max_extent),
                      rng.uniform(n + 2, opt.min_extent, opt.max_extent));
    n += 3;
    const double z = rng.uniform(n++, opt.min_depth, opt.max_depth);
    // Keep the center well inside the image.
    const double u = rng.uniform(n++, 0.3, 0.7) * camera.width;
    const double v = rng.uniform(n++, 0.45, 0.75) * camera.height;
    o.box.center = backproject({u, v}, z, camera);
    Mat3 r = yaw_rotation(rng.uniform(n++, -M_PI, M_PI));
    if (opt.max_tilt > 0.0) {
      const Vec3 axis = Vec3(rng.uniform(n, -1, 1), rng.uniform(n + 1, -1, 1), rng.uniform(n + 2, -1, 1));
      n += 3;
      if (axis.norm() > 1e-6) r = rotation_about(axis.normalized(), rng.uniform(n++, 0.0, opt.max_tilt)) * r;
    }
    o.box.rotation = r;
    bool clear = true;
    for (const auto& other : s.objects)
      clear = clear && (other.box.center - o.box.center).norm() > 0.5 * (other.box.diagonal() + o.box.diagonal());
    if (clear) s.objects.push_back(std::move(o));
  }
  return s;
}

// --- rendering -------------------------------------------------------------

namespace render_detail {

inline constexpr double kNoHit = std::numeric_limits<double>::infinity();

/// Ray origin o and direction d in object coordinates; returns the nearest t > 0.
inline double hit_box(const Vec3& o, const Vec3& d, const Vec3& half) {
  double t0 = -kNoHit, t1 = kNoHit;
  for (int i = 0; i < 3; ++i) {
    if (std::abs(d[i]) < 1e-300) {
      if (std::abs(o[i]) > half[i]) return kNoHit;
      continue;
    }
    double a = (-half[i] - o[i]) / d[i];
    double b = (half[i] - o[i]) / d[i];
    if (a > b) std::swap(a, b);
    t0 = std::max(t0, a);
    t1 = std::min(t1, b);
  }
  if (t0 > t1) return kNoHit;
  if (t0 > 0.0) return t0;
  return t1 > 0.0 ? t1 : kNoHit;
}

inline double hit_ellipsoid(const Vec3& o, const Vec3& d, const Vec3& half) {
  const Vec3 os = o.cwiseQuotient(half);
  const Vec3 ds = d.cwiseQuotient(half);
  const double a = ds.squaredNorm();
  const double b = os.dot(ds);
  const double c = os.squaredNorm() - 1.0;
  const double disc = b * b - a * c;
  if (disc < 0.0) return kNoHit;
  const double sq = std::sqrt(disc);
  // Numerically stable roots.
  const double q = b > 0 ? -(b + sq) : -(b - sq);
  double t0 = q / a, t1 = c / q;
  if (t0 > t1) std::swap(t0, t1);
  if (t0 > 0.0) return t0;
  return t1 > 0.0 ? t1 : kNoHit;
}

inline double hit_mesh(const Vec3& o, const Vec3& d, const Mesh& mesh, const Vec3& size) {
  double best = kNoHit;
  for (const auto& f : mesh.faces) {
    const Vec3 v0 = mesh.vertices[f[0]].cwiseProduct(size);
    const Vec3 e1 = mesh.vertices[f[1]].cwiseProduct(size) - v0;
    const Vec3 e2 = mesh.vertices[f[2]].cwiseProduct(size) - v0;
    const Vec3 p = d.cross(e2);
    const double det = e1.dot(p);
    if (std::abs(det) < 1e-300) continue;
    const double inv = 1.0 / det;
    const Vec3 s = o - v0;
    const double u = s.dot(p) * inv;
    if (u < 0.0 || u > 1.0) continue;
    const Vec3 q = s.cross(e1);
    const double v = d.dot(q) * inv;
    if (v < 0.0 || u + v > 1.0) continue;
    const double t = e2.dot(q) * inv;
    if (t > 0.0 && t < best) best = t;
  }
  return best;
}

inline double hit(const SceneObject& obj, const Vec3& ray_cam) {
  const Mat3 rt = obj.box.rotation.transpose();
  const Vec3 o = rt * (-obj.box.center);
  const Vec3 d = rt * ray_cam;
  switch (obj.shape) {
    case ShapeKind::BoxSurface: return hit_box(o, d, 0.5 * obj.box.size);
    case ShapeKind::Ellipsoid: return hit_ellipsoid(o, d, 0.5 * obj.box.size);
    case ShapeKind::Mesh: return hit_mesh(o, d, obj.mesh, obj.box.size);
  }
  return kNoHit;
}

}  // namespace render_detail

struct RenderedInstance {
  std::string category;
  OrientedBox3D box;
  InstanceMask mask;
  NocsMap nocs;
  Box2D box2d;
};

struct RenderOutput {
  DepthMap depth;
  std::vector<RenderedInstance> instances;  ///< one per scene object, in order
};

/// Ray casts every pixel center against all objects and keeps the nearest
/// hit. NOCS come from the rendered depth through compute_nocs_map.
inline RenderOutput render_scene(const SceneSpec& spec, int jobs = 1) {
  spec.camera.validate();
  if (spec.objects.empty()) fail(ErrorCode::EmptyScene, "scene has no objects");
  for (const auto& o : spec.objects) {
    o.box.validate();
    if (!(o.box.center.z() > 0.0)) fail(ErrorCode::NonPositiveDepth, "object center behind the camera");
  }
  const CameraIntrinsics& k = spec.camera;
  RenderOutput out;
  out.depth = DepthMap(k.width, k.height);
  Grid<int> owner(k.width, k.height, -1);
  parallel_for(static_cast<std::size_t>(k.height), jobs, [&](std::size_t row) {
    const int r = static_cast<int>(row);
    for (int c = 0; c < k.width; ++c) {
      const Vec3 ray((c - k.cx) / k.fx, (r - k.cy) / k.fy, 1.0);
      double best = render_detail::kNoHit;
      int who = -1;
      for (std::size_t i = 0; i < spec.objects.size(); ++i) {
        const double t = render_detail::hit(spec.objects[i], ray);
        if (t < best) {
          best = t;
          who = static_cast<int>(i);
        }
      }
      if (who < 0) continue;
      out.depth.depth(r, c) = best;  // ray has unit z, so t is the depth
      out.depth.valid(r, c) = 1;
      owner(r, c) = who;
    }
  });

  bool any = false;
  for (std::size_t i = 0; i < spec.objects.size(); ++i) {
    RenderedInstance inst;
    inst.category = spec.objects[i].category;
    inst.box = spec.objects[i].box;
    inst.mask = InstanceMask(k.width, k.height);
    int x0 = k.width, y0 = k.height, x1 = -1, y1 = -1;
    for (int r = 0; r < k.height; ++r)
      for (int c = 0; c < k.width; ++c)
        if (owner(r, c) == static_cast<int>(i)) {
          inst.mask.mask(r, c) = 1;
          x0 = std::min(x0, c);
          y0 = std::min(y0, r);
          x1 = std::max(x1, c);
          y1 = std::max(y1, r);
        }
    if (x1 >= 0) {
      any = true;
      inst.box2d = {double(x0), double(y0), double(x1 + 1), double(y1 + 1)};
    }
    inst.nocs = compute_nocs_map(out.depth, k, inst.box, inst.mask);
    out.instances.push_back(std::move(inst));
  }
  if (!any) fail(ErrorCode::EmptyScene, "no object is visible");
  return out;
}

/// Shard instances for the objects of a rendered scene with at least
/// `min_pixels` visible pixels. Ids are "<image_id>_<object index>".
inline void append_to_shard(Shard& shard, const SceneSpec& spec, const RenderOutput& render, std::size_t min_pixels = 1) {
  for (std::size_t i = 0; i < render.instances.size(); ++i) {
    const RenderedInstance& ri = render.instances[i];
    if (ri.mask.area() < std::max<std::size_t>(min_pixels, 1)) continue;
    ShardInstance inst;
    char suffix[16];
    std::snprintf(suffix, sizeof suffix, "_%03zu", i);
    inst.record.instance_id = spec.image_id + suffix;
    inst.record.category = ri.category;
    inst.record.source_dataset = spec.source_dataset;
    inst.record.image_id = spec.image_id;
    inst.record.box2d = ri.box2d;
    inst.record.box3d = ri.box;
    inst.record.camera = spec.camera;
    inst.mask = ri.mask;
    inst.nocs = ri.nocs;
    shard.instances.push_back(std::move(inst));
  }
  shard.depths[spec.image_id] = render.depth;
}

// --- noise -----------------------------------------------------------------

struct NoiseSpec {
  double nocs_sigma = 0.0;
  double pixel_sigma = 0.0;
  int mask_erosion = 0;
  double outlier_fraction = 0.0;

  void validate() const {
    if (!(nocs_sigma >= 0.0) || !(pixel_sigma >= 0.0) || mask_erosion < 0 || !(outlier_fraction >= 0.0) ||
        !(outlier_fraction < 1.0))
      fail(ErrorCode::OutOfRange, "noise parameters must be non-negative with outlier_fraction < 1");
  }
  bool is_zero() const { return nocs_sigma == 0.0 && pixel_sigma == 0.0 && mask_erosion == 0 && outlier_fraction == 0.0; }
};

/// Per-instance network-like outputs.
struct Observation {
  NocsMap nocs;
  InstanceMask mask;
  std::optional<Vec2> centroid_px;
};

/// Removes every mask pixel within Chebyshev distance k of background or the image border.
inline InstanceMask erode(const InstanceMask& m, int k) {
  if (k <= 0) return m;
  InstanceMask out(m.width(), m.height());
  for (int r = 0; r < m.height(); ++r)
    for (int c = 0; c < m.width(); ++c) {
      if (!m(r, c)) continue;
      bool keep = r - k >= 0 && c - k >= 0 && r + k < m.height() && c + k < m.width();
      for (int dr = -k; dr <= k && keep; ++dr)
        for (int dc = -k; dc <= k && keep; ++dc) keep = m(r + dr, c + dc);
      out.mask(r, c) = keep;
    }
  return out;
}

/// Noisy copy of an observation; deterministic in (seed, stream).
inline Observation perturb(const Observation& in, const NoiseSpec& noise, std::uint64_t seed, std::uint64_t stream = 0) {
  noise.validate();
  if (noise.is_zero()) return in;
  const CounterRng rng = CounterRng(seed).substream(stream);
  Observation out = in;
  if (noise.nocs_sigma > 0.0) {
    const CounterRng g = rng.substream(1);
    for (std::size_t i = 0; i < out.nocs.coords.size(); ++i) {
      if (!out.nocs.valid[i]) continue;
      for (int ch = 0; ch < 3; ++ch)
        out.nocs.coords[i][ch] = std::clamp(out.nocs.coords[i][ch] + noise.nocs_sigma * g.normal(3 * i + ch), -0.5, 0.5);
    }
  }
  if (noise.outlier_fraction > 0.0) {
    const CounterRng g = rng.substream(2);
    std::vector<std::pair<std::uint64_t, std::size_t>> keyed;
    for (std::size_t i = 0; i < out.nocs.coords.size(); ++i)
      if (out.nocs.valid[i]) keyed.emplace_back(g.bits(i), i);
    const auto count = static_cast<std::size_t>(std::llround(noise.outlier_fraction * static_cast<double>(keyed.size())));
    std::partial_sort(keyed.begin(), keyed.begin() + static_cast<std::ptrdiff_t>(count), keyed.end());
    const CounterRng v = rng.substream(3);
    for (std::size_t j = 0; j < count; ++j) {
      const std::size_t i = keyed[j].second;
      out.nocs.coords[i] = Vec3(v.uniform(3 * i, -0.5, 0.5), v.uniform(3 * i + 1, -0.5, 0.5), v.uniform(3 * i + 2, -0.5, 0.5));
    }
  }
  if (noise.mask_erosion > 0) out.mask = erode(out.mask, noise.mask_erosion);
  if (noise.pixel_sigma > 0.0 && out.centroid_px) {
    const CounterRng g = rng.substream(4);
    *out.centroid_px += noise.pixel_sigma * Vec2(g.normal(0), g.normal(1));
  }
  return out;
}

}  // namespace nocs
