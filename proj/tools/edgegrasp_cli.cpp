// Command-line entry point: gen-scenes, train, detect, eval.
// Exit codes: 0 success, 2 usage, 3 data error, 4 numeric failure.

#include "edgegrasp/commands.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

void add_options(CLI::App& app, edgegrasp::RunConfig& rc) {
  app.set_config("--config", "", "key=value file; command-line flags take precedence");
  app.allow_config_extras(CLI::config_extras_mode::error);

  app.add_option("--seed", rc.seed, "Master seed")->capture_default_str();
  app.add_option("--gripper-width", rc.gripper_width, "Finger opening (m)")->capture_default_str();
  app.add_option("--gripper-depth", rc.gripper_depth, "Palm to fingertip (m)")->capture_default_str();
  app.add_option("--voxel", rc.voxel, "Voxel size (m)")->capture_default_str();
  app.add_option("--normal-k", rc.normal_k, "Neighbors for normal estimation")->capture_default_str();
  app.add_option("--approach-points", rc.approach_points, "Approach points per observation")->capture_default_str();
  app.add_option("--max-edges", rc.max_edges, "Edge cap per observation")->capture_default_str();
  app.add_option("--strategy", rc.strategy, "Approach sampling (gen-scenes and detect fps, eval uniform)")
      ->check(CLI::IsMember({"fps", "uniform"}));

  app.add_option("--scenes", rc.scenes, "Scenes to generate")->capture_default_str();
  app.add_option("--kind", rc.kind, "Scene kind")->check(CLI::IsMember({"packed", "pile", "mixed"}))->capture_default_str();
  app.add_option("--min-objects", rc.min_objects, "Fewest objects per scene (gen 3, eval 5)");
  app.add_option("--max-objects", rc.max_objects, "Most objects per scene (gen 6, eval 5)");
  app.add_option("--mu", rc.friction_mu, "Friction coefficient")->capture_default_str();
  app.add_option("--noise", rc.noise_sigma, "Depth noise sigma (m)")->capture_default_str();
  app.add_option("--val-fraction", rc.val_fraction, "Validation scene fraction")->capture_default_str();

  app.add_option("--model", rc.model, "Model kind")->check(CLI::IsMember({"scalar", "vn"}))->capture_default_str();
  app.add_option("--k", rc.k, "Graph neighbors")->capture_default_str();
  app.add_option("--width-mult", rc.width_mult, "Hidden width multiplier")->capture_default_str();
  app.add_option("--omega-concat-mlp1", rc.omega_concat_mlp1, "Second global stage reads first-stage features")
      ->capture_default_str();
  app.add_option("--self-loop", rc.self_loop, "Include each point in its own neighborhood")->capture_default_str();
  app.add_option("--epochs", rc.epochs, "Total epochs")->capture_default_str();
  app.add_option("--batch", rc.batch, "Regions per minibatch")->capture_default_str();
  app.add_option("--lr", rc.lr, "Initial learning rate")->capture_default_str();
  app.add_option("--patience", rc.patience, "Plateau epochs before halving the learning rate")->capture_default_str();
  app.add_option("--min-delta", rc.min_delta, "Minimum improvement")->capture_default_str();
  app.add_option("--augment", rc.augment, "Rotation augmentation")
      ->check(CLI::IsMember({"auto", "on", "off"}))
      ->capture_default_str();

  app.add_option("--threshold", rc.threshold, "Score threshold (detect 0.9, eval 0)");
  app.add_option("--policy", rc.policy, "Grasp selection")
      ->check(CLI::IsMember({"highest-z", "top-k"}))
      ->capture_default_str();
  app.add_option("--top-k", rc.top_k, "Grasps kept by top-k in detect")->capture_default_str();
  app.add_option("--rounds", rc.rounds, "Evaluation rounds")->capture_default_str();
  app.add_option("--groups", rc.groups, "Groups for mean and std")->capture_default_str();
  app.add_option("--scorer", rc.scorer, "Grasp scorer")
      ->check(CLI::IsMember({"model", "random", "oracle"}))
      ->capture_default_str();
  app.add_option("--baseline", rc.baseline, "Also evaluate random edges")->capture_default_str();
  app.add_option("--table-z", rc.table_z, "Drop grasps reaching this table height (detect)");

  app.add_option("--out", rc.out, "Output path");
  app.add_option("--dataset", rc.dataset, "Dataset file");
  app.add_option("--checkpoint", rc.checkpoint, "Checkpoint file");
  app.add_option("--cloud", rc.cloud, "Point cloud (.ply or .csv)");
  app.add_option("--log", rc.log, "Training CSV log (default: <out>.csv)");
  app.add_option("--resume", rc.resume, "Checkpoint to continue training from");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Edge grasp detection: scene generation, training, detection and evaluation"};
  edgegrasp::RunConfig rc;
  add_options(app, rc);
  auto* gen = app.add_subcommand("gen-scenes", "Render and label a synthetic dataset");
  auto* train = app.add_subcommand("train", "Train an edge network");
  auto* detect = app.add_subcommand("detect", "Detect grasps in a point cloud");
  auto* eval = app.add_subcommand("eval", "Run declutter rounds against the oracle");
  for (auto* sub : {gen, train, detect, eval}) sub->fallthrough();
  app.require_subcommand(1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) edgegrasp::cmd_gen_scenes(rc);
    else if (train->parsed()) edgegrasp::cmd_train(rc);
    else if (detect->parsed()) edgegrasp::cmd_detect(rc);
    else if (eval->parsed()) edgegrasp::cmd_eval(rc);
  } catch (const edgegrasp::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
