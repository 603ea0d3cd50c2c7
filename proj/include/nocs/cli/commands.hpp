#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "nocs/dataset/canonicalization.hpp"
#include "nocs/dataset/validate.hpp"
#include "nocs/metrics/report.hpp"
#include "nocs/solvers/lift.hpp"
#include "nocs/synth/scene.hpp"

namespace nocs::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitDegraded = 3;

/// Runs a command body, turning library and JSON errors into exit code 2.
template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << "\n";
  }
  return kExitInput;
}

inline json parse_json_file(const fs::path& path) {
  const std::string text = read_text(path);
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::SchemaViolation, path.string() + ": " + e.what());
  }
}

// --- synth -----------------------------------------------------------------

/// Objects with fewer visible pixels are left out of synthesized shards.
inline constexpr std::size_t kDefaultMinInstancePixels = 20;

struct SynthArgs {
  fs::path spec;
  fs::path out;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
};

inline RandomSceneOptions parse_random_options(const json& j) {
  const SchemaReader rd(j, "random");
  RandomSceneOptions o;
  const auto integer = [&](const char* f, int& v) {
    if (!rd.has(f)) return;
    if (!rd.at(f).is_number_integer()) rd.bad(f, "an integer");
    v = rd.at(f).get<int>();
  };
  const auto number = [&](const char* f, double& v) {
    if (rd.has(f)) v = rd.number(rd.at(f), f);
  };
  integer("min_objects", o.min_objects);
  integer("max_objects", o.max_objects);
  number("min_depth", o.min_depth);
  number("max_depth", o.max_depth);
  number("min_extent", o.min_extent);
  number("max_extent", o.max_extent);
  number("max_tilt", o.max_tilt);
  if (rd.has("categories")) {
    if (!rd.at("categories").is_array() || rd.at("categories").empty()) rd.bad("categories", "a non-empty array");
    o.categories.clear();
    for (const auto& c : rd.at("categories")) {
      if (!c.is_string()) rd.bad("categories", "an array of strings");
      o.categories.push_back(c.get<std::string>());
    }
  }
  if (rd.has("shapes")) {
    if (!rd.at("shapes").is_array() || rd.at("shapes").empty()) rd.bad("shapes", "a non-empty array");
    o.shapes.clear();
    for (const auto& s : rd.at("shapes")) {
      if (!s.is_string()) rd.bad("shapes", "an array of strings");
      o.shapes.push_back(parse_shape(s.get<std::string>()));
    }
  }
  if (o.min_objects < 1 || o.max_objects < o.min_objects) rd.bad("min_objects/max_objects", "1 <= min <= max");
  if (!(o.min_depth > 0.0) || o.max_depth < o.min_depth) rd.bad("min_depth/max_depth", "0 < min <= max");
  if (!(o.min_extent > 0.0) || o.max_extent < o.min_extent) rd.bad("min_extent/max_extent", "0 < min <= max");
  return o;
}

/// Scenes described by a synth spec: explicit "scenes", and/or "random"
/// with a scene "count" drawn from the seed.
inline std::vector<SceneSpec> scenes_from_spec(const json& j, std::optional<std::uint64_t> seed_flag) {
  const SchemaReader rd(j, "synth spec");
  std::uint64_t seed = 0;
  if (rd.has("seed")) {
    if (!rd.at("seed").is_number_unsigned()) rd.bad("seed", "a non-negative integer");
    seed = rd.at("seed").get<std::uint64_t>();
  }
  if (seed_flag) seed = *seed_flag;
  CameraIntrinsics camera = SceneSpec().camera;
  if (rd.has("camera")) camera = parse_camera(rd, rd.at("camera"));
  camera.validate();

  std::vector<SceneSpec> scenes;
  if (rd.has("scenes")) {
    if (!rd.at("scenes").is_array()) rd.bad("scenes", "an array");
    int i = 0;
    for (const auto& s : rd.at("scenes")) scenes.push_back(parse_scene(s, "scenes[" + std::to_string(i++) + "]"));
  }
  if (rd.has("random")) {
    const json& r = rd.at("random");
    const SchemaReader rr(r, "random");
    if (!rr.at("count").is_number_unsigned()) rr.bad("count", "a non-negative integer");
    const auto count = rr.at("count").get<std::uint64_t>();
    const RandomSceneOptions opt = parse_random_options(r);
    const CounterRng rng(seed, 11);
    for (std::uint64_t i = 0; i < count; ++i) {
      SceneSpec s = random_scene(rng.bits(i), camera, opt);
      char id[32];
      std::snprintf(id, sizeof id, "scene_%04llu", static_cast<unsigned long long>(i));
      s.image_id = id;
      scenes.push_back(std::move(s));
    }
  }
  if (scenes.empty()) fail(ErrorCode::EmptyInput, "synth spec describes no scenes");
  std::set<std::string> ids;
  for (const auto& s : scenes)
    if (!ids.insert(s.image_id).second) fail(ErrorCode::SchemaViolation, "duplicate image_id '" + s.image_id + "'");
  return scenes;
}

inline int cmd_synth(const SynthArgs& a, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const json spec = parse_json_file(a.spec);
    const std::vector<SceneSpec> scenes = scenes_from_spec(spec, a.seed);
    std::size_t min_pixels = kDefaultMinInstancePixels;
    if (spec.contains("min_instance_pixels")) {
      if (!spec["min_instance_pixels"].is_number_unsigned())
        fail(ErrorCode::SchemaViolation, "synth spec: field 'min_instance_pixels' must be a non-negative integer");
      min_pixels = spec["min_instance_pixels"].get<std::size_t>();
    }
    std::vector<RenderOutput> renders(scenes.size());
    parallel_for(scenes.size(), a.jobs, [&](std::size_t i) { renders[i] = render_scene(scenes[i]); });
    Shard shard;
    for (std::size_t i = 0; i < scenes.size(); ++i) append_to_shard(shard, scenes[i], renders[i], min_pixels);
    std::size_t objects = 0, pixels = 0;
    for (const auto& s : scenes) objects += s.objects.size();
    for (const auto& inst : shard.instances) pixels += inst.nocs.valid_count();
    shard.meta["scenes"] = scenes.size();
    const std::size_t instances = shard.instances.size();
    write_shard(std::move(shard), a.out, a.jobs);
    out << "synth: " << scenes.size() << " scenes, " << objects << " objects, " << instances << " instances, "
        << pixels << " NOCS pixels -> " << a.out.string() << "\n";
    return kExitOk;
  });
}

// --- lift ------------------------------------------------------------------

struct LiftArgs {
  fs::path shard;
  fs::path out;
  std::string method = "epnp-lm";
  NoiseSpec noise;
  std::uint64_t seed = 0;
  int jobs = 1;
};

/// Directory of per-instance predicted rasters that accompanies a results file.
inline fs::path maps_dir(const fs::path& results) { return fs::path(results.string() + ".maps"); }

/// Noise stream for an instance, stable under adding or removing other instances.
inline std::uint64_t instance_stream(const std::string& instance_id) {
  Fnv1a h;
  h.update(instance_id);
  return h.value();
}

inline json result_json(const InstanceRecord& r, SolveMethod method, const LiftOutcome& o) {
  json j = {{"instance_id", r.instance_id}, {"category", r.category}, {"image_id", r.image_id},
            {"method", std::string(to_string(method))}};
  if (o.result) {
    j["status"] = "ok";
    j["box"] = box_json(o.result->box);
    j["inlier_count"] = o.result->report.inlier_count;
    j["rms_reprojection_px"] = o.result->report.rms_reprojection_px;
  } else {
    j["status"] = "failed";
    j["error"] = std::string(to_string(*o.error));
    j["message"] = o.message;
  }
  return j;
}

/// Lifts every shard instance from its (optionally perturbed) ground-truth
/// observation. The learned-head stand-in is the ground-truth allocentric
/// rotation and centroid pixel; --pixel-sigma perturbs the centroid.
inline int cmd_lift(const LiftArgs& a, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const SolveMethod method = parse_solve_method(a.method);
    a.noise.validate();
    const Shard shard = read_shard(a.shard, bundled_taxonomy(), a.jobs);
    if (shard.instances.empty()) fail(ErrorCode::EmptyInput, "shard has no instances");
    const std::size_t n = shard.instances.size();

    std::vector<Observation> obs(n);
    std::vector<LiftInput> inputs(n);
    parallel_for(n, a.jobs, [&](std::size_t i) {
      const ShardInstance& inst = shard.instances[i];
      const InstanceRecord& r = inst.record;
      const PoseHead head = ground_truth_head(r.box3d, r.camera);
      obs[i] = perturb({inst.nocs, inst.mask, head.centroid_px}, a.noise, a.seed, instance_stream(r.instance_id));
      LiftInput& in = inputs[i];
      in.nocs = &obs[i].nocs;
      in.mask = &obs[i].mask;
      in.size = r.box3d.size;
      in.camera = r.camera;
      in.head = PoseHead{head.rotation_allocentric, *obs[i].centroid_px};
      in.options.depth = shard.depth_for(r);
      in.options.ransac.seed = CounterRng(a.seed, 13).bits(instance_stream(r.instance_id));
    });
    const std::vector<LiftOutcome> outcomes = lift_batch(inputs, method, a.jobs);

    std::string lines;
    std::size_t failed = 0;
    for (std::size_t i = 0; i < n; ++i) {
      lines += result_json(shard.instances[i].record, method, outcomes[i]).dump() + "\n";
      failed += !outcomes[i].result;
    }
    write_text(a.out, lines);
    const fs::path maps = maps_dir(a.out);
    std::error_code ec;
    fs::remove_all(maps, ec);
    parallel_for(n, a.jobs, [&](std::size_t i) {
      const std::string& id = shard.instances[i].record.instance_id;
      write_bytes(maps / (id + ".nocs.png"), encode_png16(obs[i].nocs));
      write_bytes(maps / (id + ".mask.png"), encode_mask_png(obs[i].mask));
    });

    out << "lift: " << n << " instances, " << n - failed << " solved, " << failed << " failed (method "
        << to_string(method) << ")\n";
    std::map<std::string, std::size_t> by_error;
    for (const auto& o : outcomes)
      if (o.error) ++by_error[std::string(to_string(*o.error))];
    for (const auto& [name, count] : by_error) out << "  " << name << ": " << count << "\n";
    if (2 * failed > n) {
      err << "error: more than half of the instances failed to solve\n";
      return kExitDegraded;
    }
    return kExitOk;
  });
}

// --- eval ------------------------------------------------------------------

struct EvalArgs {
  fs::path results;
  fs::path shard;
  fs::path out;
  bool full_3d_ate = false;
  int jobs = 1;
};

struct ResultEntry {
  std::optional<OrientedBox3D> box;
  std::optional<double> score;
};

inline std::map<std::string, ResultEntry> read_results(const fs::path& path) {
  std::map<std::string, ResultEntry> out;
  std::istringstream in(read_text(path));
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = path.filename().string() + ":" + std::to_string(lineno);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      fail(ErrorCode::SchemaViolation, where + ": " + e.what());
    }
    const SchemaReader rd(j, where);
    const std::string id = rd.string("instance_id");
    ResultEntry e;
    const std::string status = rd.string("status");
    if (status == "ok") {
      e.box = parse_box(rd, rd.at("box"), "box");
    } else if (status != "failed") {
      rd.bad("status", "\"ok\" or \"failed\"");
    }
    if (rd.has("score")) e.score = rd.number(rd.at("score"), "score");
    if (!out.emplace(id, e).second) fail(ErrorCode::SchemaViolation, where + ": duplicate instance_id '" + id + "'");
  }
  return out;
}

inline std::string first_ids(const std::vector<std::string>& ids) {
  std::string s;
  for (std::size_t i = 0; i < ids.size() && i < 3; ++i) s += (i ? ", " : "") + ids[i];
  if (ids.size() > 3) s += ", ...";
  return s;
}

/// Evaluates a results file against its shard. Failed lifts count as
/// unmatched ground truths for mAP and are left out of the error metrics.
inline int cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const std::map<std::string, ResultEntry> results = read_results(a.results);
    const Shard shard = read_shard(a.shard, bundled_taxonomy(), a.jobs);

    std::vector<std::string> missing, extra;
    std::set<std::string> shard_ids;
    for (const auto& inst : shard.instances) {
      shard_ids.insert(inst.record.instance_id);
      if (!results.count(inst.record.instance_id)) missing.push_back(inst.record.instance_id);
    }
    for (const auto& [id, e] : results)
      if (!shard_ids.count(id)) extra.push_back(id);
    if (!missing.empty() || !extra.empty()) {
      err << "error: results and shard do not align by instance_id";
      if (!missing.empty()) err << "; " << missing.size() << " without results (" << first_ids(missing) << ")";
      if (!extra.empty()) err << "; " << extra.size() << " not in shard (" << first_ids(extra) << ")";
      err << "\n";
      return kExitInput;
    }
    if (shard.instances.empty()) fail(ErrorCode::EmptyInput, "shard has no instances");

    EvalReport report;
    const fs::path maps = maps_dir(a.results);
    if (fs::is_directory(maps)) {
      std::vector<NocsInstanceEval> items(shard.instances.size());
      parallel_for(shard.instances.size(), a.jobs, [&](std::size_t i) {
        const ShardInstance& gt = shard.instances[i];
        const std::string& id = gt.record.instance_id;
        const NocsMap pred = decode_png16(read_bytes(maps / (id + ".nocs.png")));
        const InstanceMask pred_mask = decode_mask_png(read_bytes(maps / (id + ".mask.png")));
        items[i] = {gt.record.category, nocs_mae_psnr(pred, pred_mask.mask, gt.nocs, gt.mask.mask),
                    mask_iou(pred_mask.mask, gt.mask.mask)};
      });
      report.nocs = aggregate_nocs(items);
    }

    std::vector<BoxPair> pairs;
    std::map<std::string, std::size_t> missed;
    for (const auto& inst : shard.instances) {
      const ResultEntry& e = results.at(inst.record.instance_id);
      if (e.box)
        pairs.push_back({*e.box, inst.record.box3d, inst.record.category, e.score});
      else
        ++missed[inst.record.category];
    }
    if (!pairs.empty()) {
      LocalizationOptions lo;
      lo.full_3d_ate = a.full_3d_ate;
      report.localization = localization_metrics(pairs, lo);
      report.orientation = orientation_accuracy(pairs);
    }
    report.map = map_at_iou(pairs, {0.25, 0.5}, false, missed);

    write_text(a.out, write_report(report));
    out << "eval: " << shard.instances.size() << " instances, " << pairs.size() << " solved";
    if (report.nocs && report.nocs->mae) out << ", mae " << *report.nocs->mae;
    if (report.localization) out << ", mATE " << report.localization->mATE;
    out << ", mAP@0.25 " << report.map->map[0] << " -> " << a.out.string() << "\n";
    return kExitOk;
  });
}

// --- canonicalize / validate / inspect -------------------------------------

struct CanonicalizeArgs {
  fs::path shard;
  fs::path table;
  fs::path out;
  int jobs = 1;
};

inline int cmd_canonicalize(const CanonicalizeArgs& a, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const CanonicalizationTable table = parse_canonicalization_table(read_text(a.table));
    const Shard shard = read_shard(a.shard, bundled_taxonomy(), a.jobs);
    CanonicalizationOutcome result = canonicalize_shard(shard, table);
    if (!result.missing.empty()) {
      err << "error: canonicalization table has no entry for";
      for (const auto& m : result.missing) err << " " << m;
      err << "\n";
      return kExitInput;
    }
    for (const auto& u : result.unused_entries) err << "warning: table entry " << u << " matches no instance\n";
    const std::size_t count = result.shard.instances.size();
    write_shard(std::move(result.shard), a.out, a.jobs);
    out << "canonicalize: " << count << " instances -> " << a.out.string() << "\n";
    return kExitOk;
  });
}

/// Prints the validation report; exit 2 when it lists violations.
inline int cmd_validate(const fs::path& shard, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const ValidationReport rep = validate_dataset(shard);
    out << rep.to_text();
    return rep.ok() ? kExitOk : kExitInput;
  });
}

inline int cmd_inspect(const fs::path& shard, const std::string& instance_id, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    for (const auto& r : read_records(shard)) {
      if (r.instance_id != instance_id) continue;
      json j = record_json(r);
      const InstanceMask mask = decode_mask_png(read_bytes(shard / r.mask_path));
      const NocsMap nocs = decode_png16(read_bytes(shard / r.nocs_path));
      j["mask_area"] = mask.area();
      j["nocs_valid"] = nocs.valid_count();
      j["box3d_corners"] = json::array();
      for (const Vec3& c : box_corners(r.box3d)) j["box3d_corners"].push_back(vec_json(c));
      out << j.dump(2) << "\n";
      return kExitOk;
    }
    err << "error: no instance '" << instance_id << "' in " << shard.string() << "\n";
    return kExitInput;
  });
}

}  // namespace nocs::cli
