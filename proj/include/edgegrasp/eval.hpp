#pragma once

// Declutter evaluation: repeatedly observe a pile, execute the selected
// grasp against the analytic oracle, remove the grasped object on success.

#include "edgegrasp/pipeline.hpp"
#include "edgegrasp/scene/oracle.hpp"
#include "edgegrasp/scene/render.hpp"

#include <json.hpp>

namespace edgegrasp {

enum class ScorerKind { model, random, oracle };

inline const char* scorer_name(ScorerKind s) {
  switch (s) {
    case ScorerKind::model: return "model";
    case ScorerKind::random: return "random";
    case ScorerKind::oracle: return "oracle";
  }
  return "model";
}

inline ScorerKind parse_scorer(const std::string& s) {
  if (s == "model") return ScorerKind::model;
  if (s == "random") return ScorerKind::random;
  if (s == "oracle") return ScorerKind::oracle;
  throw usage_error("scorer must be 'model', 'random' or 'oracle', got '" + s + "'");
}

struct EvalConfig {
  int rounds = 50;
  int groups = 5;  // rounds are split into this many groups for mean and std
  scene::SceneKind kind = scene::SceneKind::pile;
  int min_objects = 5;
  int max_objects = 5;
  int max_consecutive_failures = 2;
  PipelineConfig pipeline = [] {
    PipelineConfig p;
    p.strategy = ApproachStrategy::uniform;
    return p;
  }();
  scene::OracleConfig oracle;
  scene::CameraRanges camera;
  double noise_sigma = 0.001;
  double threshold = 0.0;
  SelectPolicy policy = SelectPolicy::top_k;
  std::uint64_t seed = 0;

  void validate() const {
    if (rounds < 1) throw usage_error("round count must be positive");
    if (groups < 1 || groups > rounds) throw usage_error("group count must lie in [1, rounds]");
    if (min_objects < 1 || max_objects < min_objects) throw usage_error("object count range is invalid");
    if (max_consecutive_failures < 1) throw usage_error("failure limit must be positive");
    pipeline.validate();
  }
};

struct RoundResult {
  int objects = 0;
  int removed = 0;
  int attempts = 0;
  int successes = 0;
  std::vector<std::string> outcomes;  // failure reason per attempt, "none" on success
};

struct EvalSummary {
  std::string scorer;
  std::vector<RoundResult> rounds;
  int attempts = 0;
  int successes = 0;
  int objects = 0;
  int removed = 0;
  double gsr = 0.0;  // pooled successes / attempts
  double dr = 0.0;   // pooled removed / objects
  double gsr_mean = 0.0, gsr_std = 0.0;
  double dr_mean = 0.0, dr_std = 0.0;

  nlohmann::json to_json() const {
    nlohmann::json per_round = nlohmann::json::array();
    for (const auto& r : rounds)
      per_round.push_back({{"objects", r.objects},
                           {"removed", r.removed},
                           {"attempts", r.attempts},
                           {"successes", r.successes},
                           {"outcomes", r.outcomes}});
    return {{"scorer", scorer},       {"attempts", attempts}, {"successes", successes},
            {"objects", objects},     {"removed", removed},   {"gsr", gsr},
            {"dr", dr},               {"gsr_mean", gsr_mean}, {"gsr_std", gsr_std},
            {"dr_mean", dr_mean},     {"dr_std", dr_std},     {"rounds", per_round}};
  }
};

namespace detail {

inline std::pair<double, double> mean_std(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return {m, v.size() > 1 ? std::sqrt(s / static_cast<double>(v.size() - 1)) : 0.0};
}

// Stream tags keep scene, observation and random-scorer draws independent.
inline constexpr std::uint64_t kObserveStream = 1ull << 40;
inline constexpr std::uint64_t kRandomStream = 2ull << 40;

}  // namespace detail

/// Scores for one observation. `net` is required for the model scorer.
inline std::vector<double> score_edges(ScorerKind scorer, const nn::EdgeNet* net, const scene::Scene& scene,
                                       const GraspBatch& batch,
                                       const std::vector<EdgeGrasp>& grasps, const EvalConfig& cfg, Rng& rng) {
  switch (scorer) {
    case ScorerKind::model:
      if (!net) throw usage_error("model scorer needs a network");
      return nn::score_batch(*net, batch);
    case ScorerKind::random: {
      std::uniform_real_distribution<double> u(0.0, 1.0);
      std::vector<double> s(grasps.size());
      for (auto& x : s) x = u(rng);
      return s;
    }
    case ScorerKind::oracle: {
      std::vector<double> s;
      s.reserve(grasps.size());
      for (const auto& g : grasps)
        s.push_back(scene::label_grasp(scene, g, cfg.pipeline.gripper, cfg.oracle).success ? 1.0 : 0.0);
      return s;
    }
  }
  return {};
}

inline RoundResult run_round(const EvalConfig& cfg, ScorerKind scorer, const nn::EdgeNet* net, int round) {
  Rng scene_rng = derive_rng(cfg.seed, static_cast<std::uint64_t>(round));
  std::uniform_int_distribution<int> count(cfg.min_objects, cfg.max_objects);
  RoundResult res;
  res.objects = count(scene_rng);
  scene::Scene scene = scene::generate_scene(cfg.kind, res.objects, scene_rng);
  int failures = 0;
  for (int attempt = 0; !scene.primitives.empty() && failures < cfg.max_consecutive_failures; ++attempt) {
    const std::uint64_t stream = static_cast<std::uint64_t>(round) * 1024 + static_cast<std::uint64_t>(attempt);
    Rng obs_rng = derive_rng(cfg.seed, detail::kObserveStream + stream);
    Rng pick_rng = derive_rng(cfg.seed, detail::kRandomStream + stream);
    const scene::Camera cam = scene::random_camera(obs_rng, cfg.camera);
    scene::RenderOptions ropts;
    ropts.noise_sigma = cfg.noise_sigma;
    PointCloud raw;
    try {
      raw = scene::render_view(scene, cam, obs_rng, ropts);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::data) throw;
      break;  // nothing visible to grasp
    }
    ++res.attempts;
    std::vector<GraspScorePose> chosen;
    PointCloud cloud;
    try {
      cloud = prepare_cloud(raw, cfg.pipeline);
      const GraspBatch batch = sample_edges(cloud, cfg.pipeline, obs_rng, scene.table_z());
      const auto grasps = batch_grasps(cloud, batch, cfg.pipeline.gripper);
      const auto scores = score_edges(scorer, net, scene, batch, grasps, cfg, pick_rng);
      const auto ranked = rank_grasps(grasps, scores);
      chosen = select_grasps(ranked, cfg.threshold, cfg.policy, 1);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::data) throw;
    }
    if (chosen.empty()) {
      res.outcomes.emplace_back("no_grasp");
      ++failures;
      continue;
    }
    const auto label = scene::label_grasp(scene, chosen.front().grasp, cfg.pipeline.gripper, cfg.oracle);
    res.outcomes.emplace_back(scene::reason_name(label.failure_reason));
    if (label.success) {
      ++res.successes;
      ++res.removed;
      failures = 0;
      scene::remove_and_settle(scene, label.target);
    } else {
      ++failures;
    }
  }
  return res;
}

inline EvalSummary run_eval(const EvalConfig& cfg, ScorerKind scorer, const nn::EdgeNet* net = nullptr) {
  cfg.validate();
  EvalSummary sum;
  sum.scorer = scorer_name(scorer);
  for (int r = 0; r < cfg.rounds; ++r) sum.rounds.push_back(run_round(cfg, scorer, net, r));
  std::vector<double> gsr, dr;
  for (int g = 0; g < cfg.groups; ++g) {
    const int lo = g * cfg.rounds / cfg.groups, hi = (g + 1) * cfg.rounds / cfg.groups;
    int att = 0, suc = 0, obj = 0, rem = 0;
    for (int r = lo; r < hi; ++r) {
      const auto& rr = sum.rounds[static_cast<std::size_t>(r)];
      att += rr.attempts;
      suc += rr.successes;
      obj += rr.objects;
      rem += rr.removed;
    }
    gsr.push_back(att ? static_cast<double>(suc) / att : 0.0);
    dr.push_back(obj ? static_cast<double>(rem) / obj : 0.0);
  }
  for (const auto& rr : sum.rounds) {
    sum.attempts += rr.attempts;
    sum.successes += rr.successes;
    sum.objects += rr.objects;
    sum.removed += rr.removed;
  }
  sum.gsr = sum.attempts ? static_cast<double>(sum.successes) / sum.attempts : 0.0;
  sum.dr = sum.objects ? static_cast<double>(sum.removed) / sum.objects : 0.0;
  std::tie(sum.gsr_mean, sum.gsr_std) = detail::mean_std(gsr);
  std::tie(sum.dr_mean, sum.dr_std) = detail::mean_std(dr);
  return sum;
}

}  // namespace edgegrasp
