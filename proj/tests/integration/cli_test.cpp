#include <gtest/gtest.h>

#include <cstdio>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <fstream>
#include <random>

#include "nocs/cli/commands.hpp"
#include "support/scenes.hpp"

namespace nocs {
namespace {

struct CliRun {
  int code = -1;
  std::string output;
};

CliRun run(const std::string& args) {
  const std::string cmd = std::string(NOCS_CLI_PATH) + " " + args + " 2>&1";
  CliRun r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  while (std::size_t n = std::fread(buf, 1, sizeof buf, p)) r.output.append(buf, n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

std::vector<json> read_jsonl(const fs::path& p) {
  std::vector<json> out;
  std::istringstream in(read_text(p));
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(json::parse(line));
  return out;
}

constexpr const char* kSpec =
    R"({"seed": 7, "camera": {"fx": 160, "fy": 160, "cx": 80, "cy": 60, "width": 160, "height": 120},
        "random": {"count": 6}})";

/// One synthesized shard shared by the read-only tests.
class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = testing::temp_dir("cli_shared_" + std::to_string(getpid()));
    write_text(dir_ / "spec.json", kSpec);
    const CliRun r = run("synth --spec " + q(dir_ / "spec.json") + " --out " + q(dir_ / "shard"));
    ASSERT_EQ(r.code, 0) << r.output;
  }
  static fs::path shard() { return dir_ / "shard"; }
  static fs::path dir_;
};
fs::path CliTest::dir_;

TEST_F(CliTest, SynthShardValidatesCleanly) {
  const CliRun r = run("validate --shard " + q(shard()));
  EXPECT_EQ(r.code, 0) << r.output;
  EXPECT_EQ(json::parse(r.output)["violation_count"], 0);
  EXPECT_GT(read_records(shard()).size(), 0u);
}

TEST_F(CliTest, SynthPrintsCounts) {
  const fs::path out = testing::temp_dir("cli_counts") / "s";
  const CliRun r = run("synth --spec " + q(dir_ / "spec.json") + " --out " + q(out));
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.output.find("6 scenes"), std::string::npos) << r.output;
  EXPECT_NE(r.output.find("NOCS pixels"), std::string::npos);
}

TEST_F(CliTest, MissingSpecIsInputError) {
  const fs::path missing = dir_ / "no_such_spec.json";
  const CliRun r = run("synth --spec " + q(missing) + " --out " + q(dir_ / "never"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find(missing.string()), std::string::npos) << r.output;
}

TEST_F(CliTest, MalformedSpecIsInputError) {
  write_text(dir_ / "bad.json", R"({"random": {"count": -1}})");
  EXPECT_EQ(run("synth --spec " + q(dir_ / "bad.json") + " --out " + q(dir_ / "never")).code, 2);
  write_text(dir_ / "empty.json", "{}");
  EXPECT_EQ(run("synth --spec " + q(dir_ / "empty.json") + " --out " + q(dir_ / "never")).code, 2);
}

TEST_F(CliTest, SeedRepetitionGivesIdenticalDigests) {
  const fs::path d = testing::temp_dir("cli_seed");
  const std::string spec = q(dir_ / "spec.json");
  ASSERT_EQ(run("synth --spec " + spec + " --out " + q(d / "a") + " --seed 21").code, 0);
  ASSERT_EQ(run("--seed 21 --jobs 3 synth --spec " + spec + " --out " + q(d / "b")).code, 0);
  ASSERT_EQ(run("synth --spec " + spec + " --out " + q(d / "c") + " --seed 22").code, 0);
  EXPECT_EQ(shard_digest(d / "a"), shard_digest(d / "b"));
  EXPECT_NE(shard_digest(d / "a"), shard_digest(d / "c"));
  // Without --seed the spec's own seed applies.
  ASSERT_EQ(run("synth --spec " + spec + " --out " + q(d / "d") + " --seed 7").code, 0);
  EXPECT_EQ(shard_digest(d / "d"), shard_digest(shard()));
}

TEST_F(CliTest, NoiseFreeEpnpHasNoFailures) {
  const fs::path out = testing::temp_dir("cli_epnp") / "r.jsonl";
  const CliRun r = run("lift --shard " + q(shard()) + " --out " + q(out) + " --method epnp");
  EXPECT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find(" 0 failed"), std::string::npos) << r.output;
  for (const auto& j : read_jsonl(out)) EXPECT_EQ(j["status"], "ok") << j.dump();
}

TEST_F(CliTest, NoiseFreeDepthFromOrientationMatchesGroundTruth) {
  const fs::path out = testing::temp_dir("cli_dfo") / "r.jsonl";
  const CliRun r = run("lift --shard " + q(shard()) + " --out " + q(out) + " --method depth-from-orientation");
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find(" 0 failed"), std::string::npos) << r.output;
  const auto records = read_records(shard());
  const auto results = read_jsonl(out);
  ASSERT_EQ(results.size(), records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    ASSERT_EQ(results[i]["instance_id"], records[i].instance_id);
    const OrientedBox3D box = parse_box(SchemaReader(results[i], "result"), results[i]["box"], "box");
    EXPECT_LT((box.center - records[i].box3d.center).norm(), 1e-4);
    EXPECT_LT(rotation_distance(box.rotation, records[i].box3d.rotation), 1e-5);
    EXPECT_EQ(box.size, records[i].box3d.size);
  }
}

TEST_F(CliTest, ResultsMatchInProcessLift) {
  const fs::path out = testing::temp_dir("cli_parity") / "r.jsonl";
  ASSERT_EQ(run("lift --shard " + q(shard()) + " --out " + q(out) + " --method epnp-lm --nocs-sigma 0.01 --seed 5").code, 0);
  const Shard s = read_shard(shard());
  const auto results = read_jsonl(out);
  NoiseSpec noise;
  noise.nocs_sigma = 0.01;
  for (std::size_t i = 0; i < s.instances.size(); ++i) {
    const auto& inst = s.instances[i];
    const Observation obs = perturb({inst.nocs, inst.mask, std::nullopt}, noise, 5, cli::instance_stream(inst.record.instance_id));
    const LiftResult lr = lift_to_box(obs.nocs, obs.mask, inst.record.box3d.size, inst.record.camera, std::nullopt,
                                      SolveMethod::EPnPLM);
    const OrientedBox3D box = parse_box(SchemaReader(results[i], "result"), results[i]["box"], "box");
    EXPECT_EQ(box, lr.box) << inst.record.instance_id;
  }
}

TEST_F(CliTest, OutputIndependentOfJobs) {
  const fs::path d = testing::temp_dir("cli_jobs");
  const std::string common = "lift --shard " + q(shard()) + " --method ransac-epnp --nocs-sigma 0.02 --outlier-fraction 0.1";
  ASSERT_EQ(run(common + " --jobs 1 --out " + q(d / "a.jsonl")).code, 0);
  ASSERT_EQ(run(common + " --jobs 4 --out " + q(d / "b.jsonl")).code, 0);
  EXPECT_EQ(read_text(d / "a.jsonl"), read_text(d / "b.jsonl"));
  ASSERT_EQ(run("eval --jobs 1 --results " + q(d / "a.jsonl") + " --shard " + q(shard()) + " --out " + q(d / "a.json")).code, 0);
  ASSERT_EQ(run("eval --jobs 4 --results " + q(d / "b.jsonl") + " --shard " + q(shard()) + " --out " + q(d / "b.json")).code, 0);
  EXPECT_EQ(read_text(d / "a.json"), read_text(d / "b.json"));
}

TEST_F(CliTest, MostlyFailingLiftExitsThree) {
  const fs::path out = testing::temp_dir("cli_degraded") / "r.jsonl";
  const CliRun r = run("lift --shard " + q(shard()) + " --out " + q(out) + " --mask-erosion 60");
  EXPECT_EQ(r.code, 3) << r.output;
  EXPECT_NE(r.output.find("InsufficientCorrespondences"), std::string::npos) << r.output;
  // Results are still written.
  EXPECT_EQ(read_jsonl(out).size(), read_records(shard()).size());
}

TEST_F(CliTest, UnknownMethodIsInputError) {
  const fs::path out = testing::temp_dir("cli_method") / "r.jsonl";
  EXPECT_EQ(run("lift --shard " + q(shard()) + " --out " + q(out) + " --method magic").code, 2);
  EXPECT_EQ(run("lift --shard " + q(shard()) + " --out " + q(out) + " --nocs-sigma -1").code, 2);
  EXPECT_EQ(run("lift --shard " + q(shard())).code, 2);
}

TEST_F(CliTest, GroundTruthAsPredictionGivesTrivialMetrics) {
  const fs::path d = testing::temp_dir("cli_gt");
  const Shard s = read_shard(shard());
  std::string lines;
  for (const auto& inst : s.instances) {
    lines += json{{"instance_id", inst.record.instance_id}, {"status", "ok"}, {"box", box_json(inst.record.box3d)}}.dump() + "\n";
    write_bytes(d / "r.jsonl.maps" / (inst.record.instance_id + ".nocs.png"), encode_png16(inst.nocs));
    write_bytes(d / "r.jsonl.maps" / (inst.record.instance_id + ".mask.png"), encode_mask_png(inst.mask));
  }
  write_text(d / "r.jsonl", lines);
  const CliRun r = run("eval --results " + q(d / "r.jsonl") + " --shard " + q(shard()) + " --out " + q(d / "report.json"));
  ASSERT_EQ(r.code, 0) << r.output;
  const json rep = parse_report(read_text(d / "report.json"));
  EXPECT_EQ(rep["nocs"]["aggregate"]["mae"], 0.0);
  EXPECT_EQ(rep["localization"]["aggregate"]["mATE"], 0.0);
  EXPECT_EQ(rep["localization"]["aggregate"]["mAOE"], 0.0);
  EXPECT_EQ(rep["localization"]["aggregate"]["mASE"], 0.0);
  for (const auto& v : rep["orientation"]["aggregate"]["gravity"]) EXPECT_EQ(v, 1.0);
  for (const auto& v : rep["orientation"]["aggregate"]["heading"]) EXPECT_EQ(v, 1.0);
  for (const auto& v : rep["map"]["aggregate"]["map"]) EXPECT_EQ(v, 100.0);

  // Result order does not matter.
  std::vector<std::string> shuffled;
  std::istringstream in(lines);
  for (std::string line; std::getline(in, line);) shuffled.push_back(line);
  std::shuffle(shuffled.begin(), shuffled.end(), std::mt19937_64(3));
  std::string text;
  for (const auto& l : shuffled) text += l + "\n";
  write_text(d / "r2.jsonl", text);
  fs::copy(d / "r.jsonl.maps", d / "r2.jsonl.maps");
  ASSERT_EQ(run("eval --results " + q(d / "r2.jsonl") + " --shard " + q(shard()) + " --out " + q(d / "report2.json")).code, 0);
  EXPECT_EQ(read_text(d / "report.json"), read_text(d / "report2.json"));
}

TEST_F(CliTest, NoisyRunGivesFiniteDegradedMetrics) {
  const fs::path d = testing::temp_dir("cli_noisy");
  ASSERT_EQ(run("lift --shard " + q(shard()) + " --out " + q(d / "r.jsonl") + " --nocs-sigma 0.02 --seed 1").code, 0);
  ASSERT_EQ(run("eval --results " + q(d / "r.jsonl") + " --shard " + q(shard()) + " --out " + q(d / "rep.json")).code, 0);
  const json rep = parse_report(read_text(d / "rep.json"));
  const double mae = rep["nocs"]["aggregate"]["mae"];
  const double mate = rep["localization"]["aggregate"]["mATE"];
  EXPECT_GT(mae, 0.0);
  EXPECT_LT(mae, 0.05);
  EXPECT_TRUE(std::isfinite(mate));
  EXPECT_GT(mate, 1e-4);
  EXPECT_TRUE(std::isfinite(rep["nocs"]["aggregate"]["psnr"].get<double>()));
}

TEST_F(CliTest, EvalRejectsMisalignedResults) {
  const fs::path d = testing::temp_dir("cli_mismatch");
  ASSERT_EQ(run("lift --shard " + q(shard()) + " --out " + q(d / "r.jsonl")).code, 0);
  std::string text = read_text(d / "r.jsonl");
  const std::string dropped = text.substr(text.find('\n') + 1);
  write_text(d / "short.jsonl", dropped);
  CliRun r = run("eval --results " + q(d / "short.jsonl") + " --shard " + q(shard()) + " --out " + q(d / "x.json"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("instance_id"), std::string::npos) << r.output;
  write_text(d / "extra.jsonl", text + R"({"instance_id":"ghost","status":"failed"})" + "\n");
  EXPECT_EQ(run("eval --results " + q(d / "extra.jsonl") + " --shard " + q(shard()) + " --out " + q(d / "x.json")).code, 2);
  write_text(d / "dup.jsonl", text + text.substr(0, text.find('\n') + 1));
  EXPECT_EQ(run("eval --results " + q(d / "dup.jsonl") + " --shard " + q(shard()) + " --out " + q(d / "x.json")).code, 2);
  EXPECT_FALSE(fs::exists(d / "x.json"));
}

TEST_F(CliTest, FailedLiftsCountAsMisses) {
  const fs::path d = testing::temp_dir("cli_misses");
  const auto records = read_records(shard());
  std::string lines;
  for (std::size_t i = 0; i < records.size(); ++i) {
    json j = {{"instance_id", records[i].instance_id}, {"status", i == 0 ? "failed" : "ok"}};
    if (i != 0) j["box"] = box_json(records[i].box3d);
    lines += j.dump() + "\n";
  }
  write_text(d / "r.jsonl", lines);
  ASSERT_EQ(run("eval --results " + q(d / "r.jsonl") + " --shard " + q(shard()) + " --out " + q(d / "rep.json")).code, 0);
  const json rep = parse_report(read_text(d / "rep.json"));
  EXPECT_FALSE(rep.contains("nocs"));
  EXPECT_EQ(rep["map"]["aggregate"]["missed"], 1);
  EXPECT_LT(rep["map"]["aggregate"]["map"][0].get<double>(), 100.0);
  EXPECT_EQ(rep["localization"]["aggregate"]["count"], records.size() - 1);
}

TEST_F(CliTest, InspectPrintsOneRecord) {
  const auto records = read_records(shard());
  const CliRun r = run("inspect --shard " + q(shard()) + " --instance-id " + records[1].instance_id);
  ASSERT_EQ(r.code, 0) << r.output;
  const json j = json::parse(r.output);
  EXPECT_EQ(j["instance_id"], records[1].instance_id);
  EXPECT_EQ(j["box3d"], box_json(records[1].box3d));
  EXPECT_GT(j["mask_area"].get<int>(), 0);
  EXPECT_EQ(run("inspect --shard " + q(shard()) + " --instance-id nobody").code, 2);
}

TEST_F(CliTest, ConfigFileSuppliesFlags) {
  const fs::path d = testing::temp_dir("cli_config");
  write_text(d / "lift.toml", "[lift]\nmethod = \"umeyama\"\nnocs-sigma = 0.0\n");
  const CliRun r = run("--config " + q(d / "lift.toml") + " lift --shard " + q(shard()) + " --out " + q(d / "r.jsonl"));
  ASSERT_EQ(r.code, 0) << r.output;
  for (const auto& j : read_jsonl(d / "r.jsonl")) EXPECT_EQ(j["method"], "umeyama");
}

TEST(CliStandalone, InsufficientPixelInstanceIsRecordedFailure) {
  const fs::path d = testing::temp_dir("cli_tiny");
  Shard s = testing::synth_shard(31, 4);
  ASSERT_GT(s.instances.size(), 2u);
  // Keep only two pixels of the first instance.
  ShardInstance& tiny = s.instances.front();
  std::size_t kept = 0;
  for (std::size_t i = 0; i < tiny.mask.mask.size(); ++i) {
    if (tiny.mask.mask[i] && kept < 2) {
      ++kept;
      continue;
    }
    tiny.mask.mask[i] = 0;
    tiny.nocs.valid[i] = 0;
    tiny.nocs.coords[i] = Vec3::Zero();
  }
  const std::string id = tiny.record.instance_id;
  write_shard(s, d / "shard");
  const CliRun r = run("lift --shard " + q(d / "shard") + " --out " + q(d / "r.jsonl"));
  EXPECT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find(" 1 failed"), std::string::npos) << r.output;
  for (const auto& j : read_jsonl(d / "r.jsonl"))
    if (j["instance_id"] == id) {
      EXPECT_EQ(j["status"], "failed");
      EXPECT_EQ(j["error"], "InsufficientCorrespondences");
    }
}

/// Two sources label the same physical boxes with X axes 90 degrees apart.
Shard two_convention_shard() {
  Shard shard;
  const CameraIntrinsics k = testing::small_camera();
  const Mat3 quarter = rotation_about(Vec3::UnitZ(), -M_PI / 2);
  for (int i = 0; i < 6; ++i) {
    SceneSpec s;
    s.camera = k;
    s.image_id = "img_" + std::to_string(i);
    s.source_dataset = i % 2 ? "beta" : "alpha";
    OrientedBox3D box{backproject({80, 75}, 5.0 + 0.3 * i, k), Vec3(1.6, 0.8, 0.7), yaw_rotation(0.4)};
    if (i % 2) box = apply_canonicalization(box, quarter);
    s.objects.push_back({"car", box, ShapeKind::BoxSurface, {}});
    append_to_shard(shard, s, render_scene(s));
  }
  return shard;
}

double car_spread(const std::string& validate_output) {
  const json report = json::parse(validate_output);
  for (const auto& c : report["categories"])
    if (c["category"] == "car") return c["heading_spread"];
  return -1.0;
}

TEST(CliStandalone, CanonicalizationCollapsesHeadingSpread) {
  const fs::path d = testing::temp_dir("cli_canon");
  write_shard(two_convention_shard(), d / "shard");
  const CliRun before = run("validate --shard " + q(d / "shard"));
  ASSERT_EQ(before.code, 0) << before.output;
  EXPECT_GT(car_spread(before.output), 0.25);

  CanonicalizationTable t;
  t.entries[{"alpha", "car"}] = Mat3::Identity();
  t.entries[{"beta", "car"}] = rotation_about(Vec3::UnitZ(), M_PI / 2);
  t.entries[{"alpha", "bowl"}] = Mat3::Identity();
  write_text(d / "table.json", write_canonicalization_table(t));
  const CliRun r = run("canonicalize --shard " + q(d / "shard") + " --table " + q(d / "table.json") + " --out " + q(d / "out"));
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("warning"), std::string::npos) << r.output;
  EXPECT_NE(r.output.find("alpha/bowl"), std::string::npos) << r.output;

  const CliRun after = run("validate --shard " + q(d / "out"));
  ASSERT_EQ(after.code, 0) << after.output;
  EXPECT_LT(car_spread(after.output), 1e-9);
}

TEST(CliStandalone, IdentityTableRewritesIdenticalShard) {
  const fs::path d = testing::temp_dir("cli_identity");
  write_shard(two_convention_shard(), d / "shard");
  CanonicalizationTable t;
  t.entries[{"alpha", "car"}] = Mat3::Identity();
  t.entries[{"beta", "car"}] = Mat3::Identity();
  write_text(d / "table.json", write_canonicalization_table(t));
  ASSERT_EQ(run("canonicalize --shard " + q(d / "shard") + " --table " + q(d / "table.json") + " --out " + q(d / "out")).code, 0);
  EXPECT_EQ(shard_digest(d / "shard"), shard_digest(d / "out"));
  EXPECT_TRUE(fs::exists(d / "out" / kMetaFile));
}

TEST(CliStandalone, MissingTableEntryIsInputError) {
  const fs::path d = testing::temp_dir("cli_missing_entry");
  write_shard(two_convention_shard(), d / "shard");
  CanonicalizationTable t;
  t.entries[{"alpha", "car"}] = Mat3::Identity();
  write_text(d / "table.json", write_canonicalization_table(t));
  const CliRun r = run("canonicalize --shard " + q(d / "shard") + " --table " + q(d / "table.json") + " --out " + q(d / "out"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("beta/car"), std::string::npos) << r.output;
  EXPECT_FALSE(fs::exists(d / "out"));
  write_text(d / "bad.json", R"({"entries": [{"source_dataset": "alpha", "category": "car", "offset": [[1,0,0],[0,1,0],[0,0,2]]}]})");
  EXPECT_EQ(run("canonicalize --shard " + q(d / "shard") + " --table " + q(d / "bad.json") + " --out " + q(d / "out")).code, 2);
}

TEST(CliStandalone, ValidateReportsViolations) {
  const fs::path d = testing::temp_dir("cli_invalid");
  write_shard(testing::synth_shard(8, 2), d / "shard");
  const auto records = read_records(d / "shard");
  fs::remove(d / "shard" / records[0].nocs_path);
  const CliRun r = run("validate --shard " + q(d / "shard"));
  EXPECT_EQ(r.code, 2);
  EXPECT_GE(json::parse(r.output)["violation_count"].get<int>(), 1);
  EXPECT_EQ(run("validate --shard " + q(d / "nowhere")).code, 2);
}

TEST(CliStandalone, HelpAndUsage) {
  EXPECT_EQ(run("--help").code, 0);
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
}

}  // namespace
}  // namespace nocs
