#include "edgegrasp/eval.hpp"
#include "edgegrasp/scene/dataset.hpp"

#include <catch_amalgamated.hpp>

#include <sstream>

using namespace edgegrasp;
using namespace edgegrasp::scene;

namespace {

DatasetConfig small_config(std::uint64_t seed) {
  DatasetConfig cfg;
  cfg.scenes = 10;
  cfg.pipeline.approach_points = 8;
  cfg.pipeline.max_edges = 300;
  cfg.seed = seed;
  return cfg;
}

std::string dump(const LabeledDataset& ds) {
  std::ostringstream os;
  write_dataset(os, ds);
  return os.str();
}

}  // namespace

TEST_CASE("dataset labels every edge with both classes present", "[dataset]") {
  const auto cfg = small_config(7);
  const auto ds = build_dataset(cfg);
  REQUIRE(ds.scenes.size() == 10);
  std::size_t pos = 0, neg = 0, val = 0;
  for (const auto& s : ds.scenes) {
    val += s.validation ? 1 : 0;
    for (const auto& r : s.regions) {
      REQUIRE(r.labels.size() == r.contacts.size());
      REQUIRE(r.reasons.size() == r.contacts.size());
      for (std::size_t e = 0; e < r.labels.size(); ++e) {
        (r.labels[e] ? pos : neg) += 1;
        CHECK((r.labels[e] == 1) == (r.reasons[e] == FailureReason::none));
      }
    }
  }
  CHECK(pos > 0);
  CHECK(neg > 0);
  CHECK(pos + neg == ds.edge_count());
  CHECK(pos == ds.positive_count());
  CHECK(val == 2);  // round(0.15 * 10)
}

TEST_CASE("dataset edges respect the aperture bound and positives are valid frames", "[dataset][property]") {
  const auto cfg = small_config(8);
  const auto ds = build_dataset(cfg);
  const double half = cfg.pipeline.gripper.width / 2;
  std::size_t positives = 0;
  for (const auto& s : ds.scenes)
    for (const auto& r : s.regions) {
      const auto& reg = r.region;
      CHECK(reg.centered_points[0].norm() == 0.0);
      for (std::size_t e = 0; e < r.contacts.size(); ++e) {
        const auto c = static_cast<std::size_t>(r.contacts[e]);
        CHECK(reg.centered_points[c].norm() <= half + 1e-9);
        if (r.labels[e] == 1) {
          ++positives;
          CHECK(compute_edge_frame(r.approach_point, r.approach_point + reg.centered_points[c], reg.normals[c],
                                   cfg.pipeline.gripper)
                    .has_value());
        }
      }
    }
  CHECK(positives > 0);
}

TEST_CASE("dataset files are deterministic and round trip", "[dataset][io]") {
  const auto cfg = small_config(9);
  const std::string a = dump(build_dataset(cfg, {{"note", "x"}}));
  const std::string b = dump(build_dataset(cfg, {{"note", "x"}}));
  CHECK(a == b);

  std::istringstream is(a);
  const auto back = read_dataset(is);
  CHECK(dump(back) == a);

  auto other = cfg;
  other.seed = 10;
  CHECK(dump(build_dataset(other, {{"note", "x"}})) != a);
}

TEST_CASE("malformed dataset files are rejected", "[dataset][io]") {
  auto cfg = small_config(11);
  cfg.scenes = 2;
  const std::string good = dump(build_dataset(cfg));
  auto reject = [](const std::string& text) {
    std::istringstream is(text);
    CHECK_THROWS_AS(read_dataset(is), Error);
  };
  reject("");
  reject("not json\n");
  reject(good.substr(0, good.size() / 2));
  std::string bad_version = good;
  const auto at = bad_version.find("\"version\":1");
  REQUIRE(at != std::string::npos);
  bad_version.replace(at, 11, "\"version\":9");
  reject(bad_version);
}

TEST_CASE("dataset configuration errors", "[dataset]") {
  auto cfg = small_config(1);
  cfg.scenes = 0;
  CHECK_THROWS_AS(build_dataset(cfg), Error);
  cfg = small_config(1);
  cfg.val_fraction = 1.5;
  CHECK_THROWS_AS(build_dataset(cfg), Error);
  cfg = small_config(1);
  cfg.kind = "heap";
  CHECK_THROWS_AS(build_dataset(cfg), Error);
}

TEST_CASE("removing an object leaves a settled scene", "[scene][remove]") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    Rng rng(seed);
    Scene s = generate_scene(SceneKind::pile, 5, rng);
    const Scene before = s;
    remove_and_settle(s, 0);
    REQUIRE(s.primitives.size() == 4);
    for (std::size_t i = 0; i < s.primitives.size(); ++i) {
      const auto& p = s.primitives[i];
      CHECK(p.shape == before.primitives[i + 1].shape);
      CHECK(p.size == before.primitives[i + 1].size);
      CHECK(p.pose.translation.z() <= before.primitives[i + 1].pose.translation.z() + 1e-12);
      double support = clearance_above_table(s, p);
      CHECK(support > -1e-12);
      for (std::size_t j = 0; j < s.primitives.size(); ++j) {
        if (j == i) continue;
        const double d = exact_primitive_distance(p, s.primitives[j]);
        CHECK(d > 0.0);
        support = std::min(support, d);
      }
      CHECK(support < 1e-4);
    }
  }
  Rng rng(1);
  Scene s = generate_scene(SceneKind::pile, 2, rng);
  CHECK_THROWS_AS(remove_and_settle(s, 2), Error);
  remove_and_settle(s, 1);
  remove_and_settle(s, 0);
  CHECK(s.primitives.empty());
}

TEST_CASE("declutter with oracle scores bounds the random baseline", "[eval]") {
  EvalConfig cfg;
  cfg.rounds = 10;
  cfg.groups = 2;
  cfg.seed = 5;
  const auto oracle = run_eval(cfg, ScorerKind::oracle);
  const auto random = run_eval(cfg, ScorerKind::random);
  CHECK(oracle.gsr >= 0.8);
  CHECK(oracle.gsr > random.gsr);
  CHECK(oracle.dr > random.dr);
  for (const auto* s : {&oracle, &random}) {
    CHECK(s->rounds.size() == 10);
    CHECK(s->objects == 50);
    CHECK(s->removed == s->successes);
    CHECK(s->removed <= s->objects);
    for (const auto& r : s->rounds) {
      CHECK(static_cast<int>(r.outcomes.size()) == r.attempts);
      // Rounds end on an empty scene or two failures in a row.
      if (r.removed < r.objects && r.attempts > 0) {
        REQUIRE(r.outcomes.size() >= 2);
        CHECK(r.outcomes.back() != "none");
        CHECK(r.outcomes[r.outcomes.size() - 2] != "none");
      }
    }
  }
}

TEST_CASE("declutter reports are deterministic", "[eval]") {
  EvalConfig cfg;
  cfg.rounds = 4;
  cfg.groups = 2;
  cfg.seed = 6;
  CHECK(run_eval(cfg, ScorerKind::random).to_json() == run_eval(cfg, ScorerKind::random).to_json());
  auto net = nn::make_net(nn::ModelConfig::defaults(nn::ModelKind::scalar).scaled(0.1), 1);
  CHECK(run_eval(cfg, ScorerKind::model, net.get()).to_json() == run_eval(cfg, ScorerKind::model, net.get()).to_json());
  CHECK_THROWS_AS(run_eval(cfg, ScorerKind::model, nullptr), Error);
  cfg.groups = 5;
  CHECK_THROWS_AS(run_eval(cfg, ScorerKind::random), Error);
}
