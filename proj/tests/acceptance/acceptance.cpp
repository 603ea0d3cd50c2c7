// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>

#include "nocs/cli/commands.hpp"
#include "support/iou_oracle.hpp"
#include "support/loss_checks.hpp"
#include "support/scenes.hpp"

namespace nocs {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(3);
  s << v;
  return s.str();
}

/// Ground-truth NOCS recomputed from a rendered depth map and instance mask.
NocsMap gt_nocs(const RenderOutput& out, const RenderedInstance& inst, const CameraIntrinsics& k) {
  return compute_nocs_map(out.depth, k, inst.box, inst.mask);
}

constexpr std::size_t kMinPixels = cli::kDefaultMinInstancePixels;

Outcome eq1_round_trip() {
  const auto t0 = Clock::now();
  const CameraIntrinsics k = SceneSpec().camera;
  double worst = 0.0;
  std::size_t pixels = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const SceneSpec s = random_scene(1000 + seed, k);
    const RenderOutput out = render_scene(s);
    for (const auto& inst : out.instances) {
      const NocsMap n = gt_nocs(out, inst, k);
      for (int r = 0; r < k.height; ++r)
        for (int c = 0; c < k.width; ++c) {
          if (!n.is_valid(r, c)) continue;
          const Vec3 x = inst.box.pose().apply(unnormalize(n.coords(r, c), inst.box.size));
          worst = std::max(worst, (x - backproject(Vec2(c, r), out.depth.depth(r, c), k)).norm());
          ++pixels;
        }
    }
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-6 && secs < 30.0 && pixels > 0,
          "50 scenes, " + std::to_string(pixels) + " pixels, max error " + fmt(worst) + " m, " + fmt(secs) + " s"};
}

Outcome oracle_closure() {
  const auto t0 = Clock::now();
  const CameraIntrinsics k = SceneSpec().camera;
  double worst_rot = 0.0, worst_center = 0.0;
  std::size_t solves = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const SceneSpec s = random_scene(2000 + seed, k);
    const RenderOutput out = render_scene(s);
    for (const auto& inst : out.instances) {
      const NocsMap n = gt_nocs(out, inst, k);
      if (n.valid_count() < kMinPixels) continue;
      LiftOptions opt;
      opt.depth = &out.depth;
      for (SolveMethod m : {SolveMethod::DepthFromOrientation, SolveMethod::EPnPLM, SolveMethod::Umeyama}) {
        const LiftResult r = lift_to_box(n, inst.mask, inst.box.size, k, ground_truth_head(inst.box, k), m, opt);
        worst_rot = std::max(worst_rot, rotation_distance(r.box.rotation, inst.box.rotation));
        worst_center = std::max(worst_center, (r.box.center - inst.box.center).norm());
        ++solves;
      }
    }
  }
  const double secs = seconds_since(t0);
  return {worst_rot < 1e-5 && worst_center < 1e-5 && secs < 120.0 && solves > 0,
          std::to_string(solves) + " solves over 3 paths, max rotation " + fmt(worst_rot) + " rad, max center " +
              fmt(worst_center) + " m, " + fmt(secs) + " s"};
}

Outcome sensitivity_ordering() {
  const CameraIntrinsics k = testing::small_camera();
  NoiseSpec noise;
  noise.nocs_sigma = 0.02;
  double dfo = 0.0, epnp = 0.0;
  int trials = 0;
  for (std::uint64_t seed = 0; trials < 200; ++seed) {
    const SceneSpec s = random_scene(3000 + seed, k);
    const RenderOutput out = render_scene(s);
    // Largest instance of each scene.
    const RenderedInstance* best = nullptr;
    for (const auto& inst : out.instances)
      if (!best || inst.mask.area() > best->mask.area()) best = &inst;
    const NocsMap n = gt_nocs(out, *best, k);
    if (n.valid_count() < kMinPixels) continue;
    const Observation obs = perturb({n, best->mask, std::nullopt}, noise, 77, seed);
    const PoseHead head = ground_truth_head(best->box, k);
    try {
      const LiftResult a = lift_to_box(obs.nocs, obs.mask, best->box.size, k, head, SolveMethod::DepthFromOrientation);
      const LiftResult b = lift_to_box(obs.nocs, obs.mask, best->box.size, k, head, SolveMethod::EPnP);
      dfo += rotation_distance(a.box.rotation, best->box.rotation);
      epnp += rotation_distance(b.box.rotation, best->box.rotation);
      ++trials;
    } catch (const Error&) {
      // Trials where either solver fails are skipped.
    }
  }
  dfo /= trials;
  epnp /= trials;
  return {dfo <= epnp, "200 trials at sigma 0.02: mean rotation error depth-from-orientation " + fmt(dfo) +
                           " rad, raw EPnP " + fmt(epnp) + " rad"};
}

Outcome loss_suite() {
  std::vector<std::string> problems;
  const auto check = [&](bool ok, const std::string& what) {
    if (!ok) problems.push_back(what);
  };

  // Zero at ground truth.
  const CameraIntrinsics k = testing::small_camera();
  const SceneSpec s = random_scene(4000, k);
  const RenderOutput out = render_scene(s);
  const RenderedInstance& inst = out.instances.front();
  Grid<double> mask_pred(inst.mask.width(), inst.mask.height());
  for (std::size_t i = 0; i < mask_pred.size(); ++i) mask_pred[i] = inst.mask.mask[i];
  check(loss_mask(mask_pred, inst.mask.mask).value == 0.0, "mask loss at ground truth");

  const BinLayout& nb = nocs_bins();
  Grid<BinLogits3> nocs_logits(inst.nocs.width(), inst.nocs.height(), BinLogits3::Zero());
  for (std::size_t i = 0; i < nocs_logits.size(); ++i)
    for (int ch = 0; ch < 3; ++ch) nocs_logits[i](ch, nb.bin_of(inst.nocs.coords[i][ch])) = 60.0;
  const NocsLoss ln = loss_nocs(nocs_logits, inst.nocs, inst.mask.mask);
  check(ln.support > 0 && ln.value <= 0.5 * nb.width(0), "NOCS loss at ground-truth bins " + fmt(ln.value));

  const BinLayout& sb = size_bins();
  BinLogits3 size_logits = BinLogits3::Zero();
  double half_bin = 0.0;
  for (int a = 0; a < 3; ++a) {
    const int bin = sb.bin_of(inst.box.size[a]);
    size_logits(a, bin) = 60.0;
    half_bin += 0.5 * sb.width(bin) / inst.box.size[a];
  }
  const SizeLoss ls = loss_size(size_logits, decode_size(size_logits), inst.box.size);
  check(ls.value <= half_bin, "size loss at ground-truth bins " + fmt(ls.value));

  const Mat3 r = inst.box.rotation;
  const Vec2 c = project(inst.box.center, k);
  check(loss_rot(r, r).value == 0.0, "rotation loss at ground truth");
  check(loss_centroid(c, c).value == 0.0, "centroid loss at ground truth");
  check(loss_pnp(r, r, c, c) == 0.0, "PnP loss at ground truth");

  double worst_ss = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const SceneSpec sc = random_scene(4100 + seed, k);
    const RenderOutput o = render_scene(sc);
    for (const auto& ri : o.instances) {
      if (ri.nocs.valid_count() == 0) continue;
      worst_ss = std::max(worst_ss, loss_reprojection_ss(ri.nocs, ri.mask.mask, ri.box.pose(), ri.box.size, k).value);
    }
  }
  check(worst_ss < 1e-6, "L_ss on exact NOCS " + fmt(worst_ss) + " px");
  check(loss_total({}) == 0.0, "total loss of zero components");

  // Analytic gradients against central differences, 10 points each.
  testing::Rng rng(20);
  const std::vector<std::pair<std::string, double>> grads = {
      {"mask", testing::gradient_check_mask(rng)},         {"nocs", testing::gradient_check_nocs(rng)},
      {"size", testing::gradient_check_size(rng)},         {"rot", testing::gradient_check_rot(rng)},
      {"centroid", testing::gradient_check_centroid(rng)}, {"ss", testing::gradient_check_reprojection(rng)}};
  double worst_grad = 0.0;
  for (const auto& [name, err] : grads) {
    check(err < 1e-5, name + " gradient relative error " + fmt(err));
    worst_grad = std::max(worst_grad, err);
  }

  std::string detail = "zero at ground truth, worst gradient relative error " + fmt(worst_grad) + ", L_ss on exact NOCS " +
                       fmt(worst_ss) + " px";
  for (const auto& p : problems) detail += "; FAILED " + p;
  return {problems.empty(), detail};
}

Outcome metric_oracles() {
  std::vector<std::string> problems;

  testing::Rng rng(50);
  double worst_iou = 0.0;
  for (int i = 0; i < 100; ++i) {
    const auto [a, b] = testing::random_box_pair(rng);
    worst_iou = std::max(worst_iou, std::abs(box3d_iou(a, b) - testing::sampled_iou(a, b, rng, 100)));
  }
  if (!(worst_iou < 0.005)) problems.push_back("IoU");

  // Every valid pixel is off by exactly 0.1 on every channel.
  NocsMap gt(32, 32), pred(32, 32);
  BoolGrid mask(32, 32, 1);
  for (std::size_t i = 0; i < gt.coords.size(); ++i) {
    gt.coords[i] = Vec3(-0.25, 0.0, 0.125);
    pred.coords[i] = gt.coords[i] + Vec3(0.1, -0.1, 0.1);
    gt.valid[i] = pred.valid[i] = 1;
  }
  const NocsQuality qn = nocs_mae_psnr(pred, mask, gt, mask);
  if (!(std::abs(*qn.psnr - 20.0) < 1e-9)) problems.push_back("PSNR");

  // 99 "a" instances with error 1 and one "b" instance with error 0: the mean
  // of category means is 0.5 while the pooled mean would be 0.99.
  std::vector<NocsInstanceEval> items;
  for (int i = 0; i < 99; ++i) items.push_back({"a", {1.0, 10.0, 1}, 0.2});
  items.push_back({"b", {0.0, 30.0, 1}, 1.0});
  const NocsEvalResult agg = aggregate_nocs(items);
  if (!(std::abs(*agg.mae - 0.5) < 1e-12 && std::abs(*agg.psnr - 20.0) < 1e-12 && std::abs(agg.mask_iou - 0.6) < 1e-12))
    problems.push_back("category mean");

  std::string detail = "max |IoU - 1e6-sample estimate| " + fmt(worst_iou) + " over 100 pairs, PSNR " +
                       std::to_string(*qn.psnr) + " dB, imbalanced mae " + fmt(*agg.mae) + " (pooled would be 0.99)";
  for (const auto& p : problems) detail += "; FAILED " + p;
  return {problems.empty(), detail};
}

Outcome heading_flip() {
  testing::Rng rng(60);
  std::vector<BoxPair> pairs;
  const std::vector<std::string> cats{"car", "chair", "monitor"};
  for (int i = 0; i < 60; ++i) {
    OrientedBox3D gt{testing::uniform_vec(rng, -3, 3) + Vec3(0, 0, 10), testing::uniform_vec(rng, 0.5, 3),
                     yaw_rotation(testing::uniform(rng, -M_PI, M_PI))};
    OrientedBox3D pred = gt;
    pred.rotation = gt.rotation * rotation_about(Vec3::UnitZ(), M_PI);
    pairs.push_back({pred, gt, cats[i % 3], {}});
  }
  OrientationThresholds th;
  th.heading_deg = {5.0, 10.0, 90.0, 179.0};
  const OrientationEvalResult r = orientation_accuracy(pairs, th);
  bool ok = true;
  for (double g : r.overall.gravity) ok = ok && g == 1.0;
  for (double h : r.overall.heading) ok = ok && h == 0.0;
  std::string detail = "gravity accuracy";
  for (double g : r.overall.gravity) detail += " " + fmt(100 * g) + "%";
  detail += ", heading accuracy";
  for (double h : r.overall.heading) detail += " " + fmt(100 * h) + "%";
  return {ok, detail + " at heading thresholds 5/10/90/179 deg"};
}

Outcome canonicalization() {
  const CameraIntrinsics k = testing::small_camera();
  double worst_corner = 0.0, worst_nocs = 0.0, worst_recomputed = 0.0;
  bool exact = true;
  const std::vector<Mat3> group = cube_group();
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const SceneSpec s = random_scene(5000 + seed, k);
    const RenderOutput out = render_scene(s);
    for (const auto& ri : out.instances) {
      ShardInstance inst;
      inst.record.box3d = ri.box;
      inst.mask = ri.mask;
      inst.nocs = gt_nocs(out, ri, k);
      for (const Mat3& o : group) {
        const ShardInstance c = apply_canonicalization(inst, o);
        // Same corner set, matched by nearest neighbour.
        const auto a = box_corners(inst.record.box3d);
        const auto b = box_corners(c.record.box3d);
        for (const Vec3& p : a) {
          double nearest = INFINITY;
          for (const Vec3& q : b) nearest = std::min(nearest, (p - q).norm());
          worst_corner = std::max(worst_corner, nearest);
        }
        const NocsMap recomputed = compute_nocs_map(out.depth, k, c.record.box3d, inst.mask);
        for (std::size_t i = 0; i < inst.nocs.coords.size(); ++i) {
          if (!inst.nocs.valid[i]) continue;
          const Vec3 expected = o.transpose() * inst.nocs.coords[i];
          exact = exact && c.nocs.coords[i] == expected;
          worst_nocs = std::max(worst_nocs, (c.nocs.coords[i] - expected).norm());
          worst_recomputed = std::max(worst_recomputed, (recomputed.coords[i] - expected).norm());
        }
      }
    }
  }
  return {worst_corner < 1e-9 && exact && worst_recomputed < 1e-9,
          "24 offsets: max corner displacement " + fmt(worst_corner) + " m, NOCS vs O^T n " + fmt(worst_nocs) +
              ", vs NOCS recomputed from depth " + fmt(worst_recomputed)};
}

int run(const std::string& args) {
  const std::string cmd = std::string(NOCS_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome cli_smoke() {
  const fs::path d = testing::temp_dir("acceptance_smoke");
  write_text(d / "spec.json", R"({"random": {"count": 12}})");
  const auto q = [](const fs::path& p) { return "'" + p.string() + "'"; };
  std::vector<std::string> reports;
  for (const char* tag : {"a", "b"}) {
    const fs::path shard = d / (std::string("shard_") + tag);
    const fs::path results = d / (std::string("results_") + tag + ".jsonl");
    const fs::path report = d / (std::string("report_") + tag + ".json");
    if (run("--seed 9 synth --spec " + q(d / "spec.json") + " --out " + q(shard)) != 0) return {false, "synth failed"};
    if (run("--seed 9 lift --shard " + q(shard) + " --out " + q(results)) != 0) return {false, "lift failed"};
    if (run("eval --results " + q(results) + " --shard " + q(shard) + " --out " + q(report)) != 0)
      return {false, "eval failed"};
    reports.push_back(read_text(report));
  }
  const json rep = parse_report(reports[0]);
  const double mae = rep["nocs"]["aggregate"]["mae"];
  const double mate = rep["localization"]["aggregate"]["mATE"];
  bool ok = mae == 0.0 && mate < 1e-4 && reports[0] == reports[1];
  for (const auto& v : rep["map"]["aggregate"]["map"]) ok = ok && v == 100.0;
  for (const auto& v : rep["orientation"]["aggregate"]["gravity"]) ok = ok && v == 1.0;
  for (const auto& v : rep["orientation"]["aggregate"]["heading"]) ok = ok && v == 1.0;
  return {ok, "mae " + fmt(mae) + ", mATE " + fmt(mate) + " m (16-bit NOCS storage), mAP " +
                  rep["map"]["aggregate"]["map"].dump() + ", orientation " + rep["orientation"]["aggregate"]["gravity"].dump() +
                  "/" + rep["orientation"]["aggregate"]["heading"].dump() +
                  (reports[0] == reports[1] ? ", reruns byte-identical" : ", reruns DIFFER")};
}

}  // namespace
}  // namespace nocs

int main() {
  using namespace nocs;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"eq1-round-trip", eq1_round_trip},
      {"oracle-closure", oracle_closure},
      {"sensitivity-ordering", sensitivity_ordering},
      {"loss-suite", loss_suite},
      {"metric-oracles", metric_oracles},
      {"heading-flip", heading_flip},
      {"canonicalization", canonicalization},
      {"cli-smoke", cli_smoke},
  };
  int failures = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
