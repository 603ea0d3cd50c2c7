#include <iostream>

#include <CLI11.hpp>

#include "nocs/cli/commands.hpp"

int main(int argc, char** argv) {
  using namespace nocs;
  CLI::App app{"NOCS toolkit: synthesize shards, lift NOCS maps to boxes, evaluate"};
  app.set_config("--config", "", "Read flags from a TOML/INI file");
  app.require_subcommand(1);
  app.fallthrough();

  std::uint64_t seed = 0;
  int jobs = default_jobs();
  app.add_option("--seed", seed, "Seed for every randomized step");
  app.add_option("--jobs", jobs, "Worker threads (default: NOCS_JOBS or hardware concurrency)")
      ->check(CLI::PositiveNumber);

  cli::SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Render a synthetic scene spec into a dataset shard");
  s->add_option("--spec", synth.spec, "Scene spec JSON")->required();
  s->add_option("--out", synth.out, "Output shard directory")->required();

  cli::LiftArgs lift;
  auto* l = app.add_subcommand("lift", "Lift every shard instance to a metric box");
  l->add_option("--shard", lift.shard, "Shard directory")->required();
  l->add_option("--out", lift.out, "Results file (JSON lines)")->required();
  l->add_option("--method", lift.method, "depth-from-orientation | epnp | epnp-lm | umeyama | ransac-epnp")
      ->capture_default_str();
  l->add_option("--nocs-sigma", lift.noise.nocs_sigma, "Gaussian NOCS noise")->capture_default_str();
  l->add_option("--pixel-sigma", lift.noise.pixel_sigma, "Gaussian centroid pixel noise")->capture_default_str();
  l->add_option("--mask-erosion", lift.noise.mask_erosion, "Mask erosion radius in pixels")->capture_default_str();
  l->add_option("--outlier-fraction", lift.noise.outlier_fraction, "Fraction of NOCS pixels replaced at random")
      ->capture_default_str();

  cli::EvalArgs eval;
  auto* e = app.add_subcommand("eval", "Evaluate lift results against their shard");
  e->add_option("--results", eval.results, "Results file from lift")->required();
  e->add_option("--shard", eval.shard, "Shard directory")->required();
  e->add_option("--out", eval.out, "Report file")->required();
  e->add_flag("--full-3d-ate", eval.full_3d_ate, "Translation error in 3D instead of on the ground plane");

  cli::CanonicalizeArgs canon;
  auto* c = app.add_subcommand("canonicalize", "Apply a canonicalization table and rewrite the shard");
  c->add_option("--shard", canon.shard, "Shard directory")->required();
  c->add_option("--table", canon.table, "Canonicalization table JSON")->required();
  c->add_option("--out", canon.out, "Output shard directory")->required();

  fs::path validate_shard;
  auto* v = app.add_subcommand("validate", "Check a shard and print the validation report");
  v->add_option("--shard", validate_shard, "Shard directory")->required();

  fs::path inspect_shard;
  std::string instance_id;
  auto* i = app.add_subcommand("inspect", "Print one record");
  i->add_option("--shard", inspect_shard, "Shard directory")->required();
  i->add_option("--instance-id", instance_id, "Instance to print")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::CallForAllHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::ParseError& ex) {
    app.exit(ex);
    return cli::kExitInput;
  }

  if (app.count("--seed")) synth.seed = seed;
  lift.seed = seed;
  synth.jobs = lift.jobs = eval.jobs = canon.jobs = jobs;

  if (*s) return cli::cmd_synth(synth, std::cout, std::cerr);
  if (*l) return cli::cmd_lift(lift, std::cout, std::cerr);
  if (*e) return cli::cmd_eval(eval, std::cout, std::cerr);
  if (*c) return cli::cmd_canonicalize(canon, std::cout, std::cerr);
  if (*v) return cli::cmd_validate(validate_shard, std::cout, std::cerr);
  return cli::cmd_inspect(inspect_shard, instance_id, std::cout, std::cerr);
}
