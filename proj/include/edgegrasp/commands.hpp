#pragma once

// End-to-end commands behind the command-line tool. Every output embeds the
// run configuration and a format version.

#include "edgegrasp/eval.hpp"
#include "edgegrasp/nn/checkpoint.hpp"
#include "edgegrasp/pointcloud_io.hpp"
#include "edgegrasp/scene/dataset.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

namespace edgegrasp {

inline constexpr int kGraspFileVersion = 1;
inline constexpr int kEvalReportVersion = 1;
inline constexpr int kTrainLogVersion = 1;

struct RunConfig {
  std::uint64_t seed = 0;
  // Gripper and observation processing.
  double gripper_width = 0.08;
  double gripper_depth = 0.05;
  double voxel = 0.004;
  int normal_k = 16;
  std::size_t approach_points = 32;
  std::size_t max_edges = 2000;
  std::optional<std::string> strategy;  // gen-scenes and detect fps, eval uniform
  // Scenes and labels.
  int scenes = 20;
  std::string kind = "pile";
  std::optional<int> min_objects;  // command-specific defaults
  std::optional<int> max_objects;
  double friction_mu = 0.75;
  double noise_sigma = 0.001;
  double val_fraction = 0.15;
  // Model and training.
  std::string model = "scalar";
  int k = 16;
  double width_mult = 1.0;
  bool omega_concat_mlp1 = false;
  bool self_loop = true;
  int epochs = 150;
  int batch = 32;
  double lr = 1e-4;
  int patience = 6;
  double min_delta = 1e-4;
  std::string augment = "auto";  // auto: on for scalar, off for vector neurons
  // Selection and evaluation.
  std::optional<double> threshold;  // detect 0.9, eval 0.0
  std::string policy = "top-k";
  int top_k = 10;
  int rounds = 50;
  int groups = 5;
  std::string scorer = "model";
  bool baseline = true;
  std::optional<double> table_z;  // detect: drop grasps reaching this plane
  // Paths.
  std::string out;
  std::string dataset;
  std::string checkpoint;
  std::string cloud;
  std::string log;
  std::string resume;

  GripperSpec gripper() const {
    GripperSpec g;
    g.width = gripper_width;
    g.depth = gripper_depth;
    g.validate();
    return g;
  }

  PipelineConfig pipeline(const std::string& default_strategy = "fps") const {
    PipelineConfig p;
    p.gripper = gripper();
    p.voxel = voxel;
    p.normal_k = normal_k;
    p.approach_points = approach_points;
    p.max_edges = max_edges;
    p.strategy = parse_strategy(strategy.value_or(default_strategy));
    p.validate();
    return p;
  }

  nn::ModelConfig model_config() const {
    nn::ModelConfig m = nn::ModelConfig::defaults(nn::parse_model_kind(model)).scaled(width_mult);
    m.k = k;
    m.omega_concat_mlp1 = omega_concat_mlp1;
    m.self_loop = self_loop;
    m.validate();
    return m;
  }

  nn::TrainConfig train_config() const {
    nn::TrainConfig t;
    t.epochs = epochs;
    t.batch_regions = batch;
    t.lr = lr;
    t.patience = patience;
    t.min_delta = min_delta;
    t.seed = seed;
    if (augment == "auto") t.augment = nn::parse_model_kind(model) == nn::ModelKind::scalar;
    else if (augment == "on") t.augment = true;
    else if (augment == "off") t.augment = false;
    else throw usage_error("augment must be 'auto', 'on' or 'off'");
    t.validate();
    return t;
  }

  nlohmann::json to_json() const {
    auto opt = [](const auto& o) { return o ? nlohmann::json(*o) : nlohmann::json(); };
    return {{"seed", seed},
            {"gripper_width", gripper_width},
            {"gripper_depth", gripper_depth},
            {"voxel", voxel},
            {"normal_k", normal_k},
            {"approach_points", approach_points},
            {"max_edges", max_edges},
            {"strategy", opt(strategy)},
            {"scenes", scenes},
            {"kind", kind},
            {"min_objects", opt(min_objects)},
            {"max_objects", opt(max_objects)},
            {"friction_mu", friction_mu},
            {"noise_sigma", noise_sigma},
            {"val_fraction", val_fraction},
            {"model", model},
            {"k", k},
            {"width_mult", width_mult},
            {"omega_concat_mlp1", omega_concat_mlp1},
            {"self_loop", self_loop},
            {"epochs", epochs},
            {"batch", batch},
            {"lr", lr},
            {"patience", patience},
            {"min_delta", min_delta},
            {"augment", augment},
            {"threshold", opt(threshold)},
            {"policy", policy},
            {"top_k", top_k},
            {"rounds", rounds},
            {"groups", groups},
            {"scorer", scorer},
            {"baseline", baseline},
            {"table_z", opt(table_z)},
            {"out", out},
            {"dataset", dataset},
            {"checkpoint", checkpoint},
            {"cloud", cloud},
            {"log", log},
            {"resume", resume}};
  }
};

namespace detail {

inline std::ofstream open_out(const std::string& path, bool binary = false) {
  if (path.empty()) throw usage_error("output path is required");
  std::ofstream os(path, binary ? std::ios::binary : std::ios::out);
  if (!os) throw data_error("cannot open for writing: " + path);
  return os;
}

inline std::string or_default(const std::string& s, const char* fallback) { return s.empty() ? fallback : s; }

}  // namespace detail

// ---------------------------------------------------------------------------
// gen-scenes

struct GenSummary {
  std::size_t scenes = 0;
  std::size_t edges = 0;
  std::size_t positives = 0;
};

inline scene::DatasetConfig dataset_config(const RunConfig& rc) {
  scene::DatasetConfig d;
  d.scenes = rc.scenes;
  d.kind = rc.kind;
  d.min_objects = rc.min_objects.value_or(3);
  d.max_objects = rc.max_objects.value_or(std::max(6, d.min_objects));
  d.pipeline = rc.pipeline();
  d.oracle.friction_mu = rc.friction_mu;
  d.noise_sigma = rc.noise_sigma;
  d.val_fraction = rc.val_fraction;
  d.seed = rc.seed;
  d.validate();
  return d;
}

inline GenSummary cmd_gen_scenes(const RunConfig& rc, std::ostream& log = std::cout) {
  const auto cfg = dataset_config(rc);
  const auto ds = scene::build_dataset(cfg, rc.to_json());
  auto os = detail::open_out(detail::or_default(rc.out, "dataset.jsonl"));
  scene::write_dataset(os, ds);
  GenSummary s{ds.scenes.size(), ds.edge_count(), ds.positive_count()};
  const double rate = s.edges ? static_cast<double>(s.positives) / static_cast<double>(s.edges) : 0.0;
  log << "scenes " << s.scenes << " edges " << s.edges << " positive_rate " << rate << '\n';
  return s;
}

// ---------------------------------------------------------------------------
// train

inline scene::LabeledDataset load_dataset(const std::string& path) {
  if (path.empty()) throw usage_error("--dataset is required");
  std::ifstream is(path);
  if (!is) throw data_error("cannot open dataset: " + path);
  return scene::read_dataset(is);
}

/// Regions with at least one edge, split by the scene's split tag.
inline std::pair<std::vector<nn::TrainSample>, std::vector<nn::TrainSample>> to_samples(const scene::LabeledDataset& ds) {
  std::vector<nn::TrainSample> train, val;
  for (const auto& s : ds.scenes)
    for (const auto& r : s.regions) {
      if (r.contacts.empty()) continue;
      (s.validation ? val : train).push_back({r.region, r.contacts, r.labels});
    }
  return {std::move(train), std::move(val)};
}

struct TrainSummary {
  int epochs = 0;
  int best_epoch = -1;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  double best_loss = 0.0;
  std::string kind;
};

inline void write_train_log(const std::string& path, const nlohmann::json& echo, const std::vector<nn::EpochLog>& history) {
  auto os = detail::open_out(path);
  os << "# " << nlohmann::json{{"format", "edgegrasp-train-log"}, {"version", kTrainLogVersion}, {"config", echo}}.dump()
     << '\n';
  nn::write_history_csv(os, history);
}

inline TrainSummary cmd_train(const RunConfig& rc, std::ostream& log = std::cout) {
  const auto ds = load_dataset(rc.dataset);
  const auto [train, val] = to_samples(ds);
  if (train.empty()) throw data_error("dataset has no training edges");
  const nlohmann::json echo = rc.to_json();

  std::optional<nn::Checkpoint> resume;
  if (!rc.resume.empty()) resume = nn::load_checkpoint(rc.resume);
  const nn::ModelConfig mcfg = resume ? resume->model : rc.model_config();
  nn::TrainConfig tcfg = resume ? resume->train : rc.train_config();
  tcfg.epochs = rc.epochs;
  auto net = nn::make_net(mcfg, tcfg.seed);
  nn::Trainer trainer(*net, tcfg);
  if (resume) nn::restore_trainer(trainer, *net, *resume);

  trainer.fit(train, val, [&](const nn::EpochLog& e) {
    log << "epoch " << e.epoch << " train_loss " << e.train_loss << " val_loss " << e.val_loss << " train_acc "
        << e.train_accuracy << " lr " << e.lr << '\n';
  });

  const std::string out = detail::or_default(rc.out, "model.ckpt");
  nn::save_checkpoint(out, nn::make_checkpoint(trainer, *net, echo), net->params());
  write_train_log(rc.log.empty() ? out + ".csv" : rc.log, echo, trainer.state().history);

  const auto& h = trainer.state().history;
  TrainSummary s;
  s.epochs = trainer.state().epoch;
  s.best_epoch = trainer.state().best_epoch;
  s.initial_loss = h.front().train_loss;
  s.final_loss = h.back().train_loss;
  s.best_loss = trainer.state().best_val;
  s.kind = nn::kind_name(mcfg.kind);
  log << "model " << s.kind << " epochs " << s.epochs << " best_epoch " << s.best_epoch << " best_loss " << s.best_loss
      << '\n';
  return s;
}

// ---------------------------------------------------------------------------
// detect

inline std::vector<GraspScorePose> detect_grasps(const PointCloud& raw, const nn::EdgeNet& net, const RunConfig& rc) {
  const auto pipe = rc.pipeline();
  const PointCloud cloud = prepare_cloud(raw, pipe);
  Rng rng = derive_rng(rc.seed, 0);
  const GraspBatch batch = sample_edges(cloud, pipe, rng, rc.table_z);
  const auto grasps = batch_grasps(cloud, batch, pipe.gripper);
  const auto ranked = rank_grasps(grasps, nn::score_batch(net, batch));
  const auto policy = parse_policy(rc.policy);
  if (rc.top_k < 1) throw usage_error("top-k must be positive");
  return select_grasps(ranked, rc.threshold.value_or(0.9), policy, static_cast<std::size_t>(rc.top_k));
}

inline std::vector<GraspScorePose> cmd_detect(const RunConfig& rc, std::ostream& log = std::cerr) {
  if (rc.cloud.empty()) throw usage_error("--cloud is required");
  if (rc.checkpoint.empty()) throw usage_error("--checkpoint is required");
  const PointCloud raw = io::load_cloud(rc.cloud);
  const auto net = nn::load_model(nn::load_checkpoint(rc.checkpoint));
  const auto selected = detect_grasps(raw, *net, rc);
  auto os = detail::open_out(detail::or_default(rc.out, "grasps.jsonl"));
  os << nlohmann::json{{"format", "edgegrasp-grasps"},
                       {"version", kGraspFileVersion},
                       {"count", selected.size()},
                       {"config", rc.to_json()}}
            .dump()
     << '\n';
  for (const auto& g : selected) os << serialize_grasp(g).dump() << '\n';
  if (!os) throw data_error("failed to write grasps");
  if (selected.empty()) log << "warning: no grasp scored above the threshold\n";
  return selected;
}

// ---------------------------------------------------------------------------
// eval

inline EvalConfig eval_config(const RunConfig& rc) {
  EvalConfig e;
  e.rounds = rc.rounds;
  e.groups = std::min(rc.groups, rc.rounds);
  e.kind = scene::parse_kind(rc.kind);
  e.min_objects = rc.min_objects.value_or(5);
  e.max_objects = rc.max_objects.value_or(std::max(5, e.min_objects));
  e.pipeline = rc.pipeline("uniform");
  e.oracle.friction_mu = rc.friction_mu;
  e.noise_sigma = rc.noise_sigma;
  e.threshold = rc.threshold.value_or(0.0);
  e.policy = parse_policy(rc.policy);
  e.seed = rc.seed;
  e.validate();
  return e;
}

struct EvalReport {
  std::vector<EvalSummary> results;  // requested scorer first, then the baseline
  nlohmann::json to_json(const nlohmann::json& echo) const {
    nlohmann::json r = nlohmann::json::array();
    for (const auto& s : results) r.push_back(s.to_json());
    return {{"format", "edgegrasp-eval"}, {"version", kEvalReportVersion}, {"config", echo}, {"results", r}};
  }
};

inline EvalReport cmd_eval(const RunConfig& rc, std::ostream& log = std::cout) {
  const auto cfg = eval_config(rc);
  const ScorerKind scorer = parse_scorer(rc.scorer);
  std::unique_ptr<nn::EdgeNet> net;
  if (scorer == ScorerKind::model) {
    if (rc.checkpoint.empty()) throw usage_error("--checkpoint is required for the model scorer");
    net = nn::load_model(nn::load_checkpoint(rc.checkpoint));
  }
  EvalReport report;
  report.results.push_back(run_eval(cfg, scorer, net.get()));
  if (rc.baseline && scorer != ScorerKind::random) report.results.push_back(run_eval(cfg, ScorerKind::random));
  auto os = detail::open_out(detail::or_default(rc.out, "eval.json"));
  os << report.to_json(rc.to_json()).dump(2) << '\n';
  for (const auto& s : report.results)
    log << s.scorer << " GSR " << 100 * s.gsr_mean << " +- " << 100 * s.gsr_std << " DR " << 100 * s.dr_mean << " +- "
        << 100 * s.dr_std << " (pooled GSR " << 100 * s.gsr << ", attempts " << s.attempts << ")\n";
  return report;
}

}  // namespace edgegrasp
