#include "edgegrasp/sampler.hpp"
#include "oracles_geometry.hpp"

#include <catch_amalgamated.hpp>

#include <set>

using namespace edgegrasp;

namespace {

PointCloud sphere_cloud(std::size_t n, double r, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> g(0, 1);
  PointCloud c;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 d = Vec3(g(rng), g(rng), g(rng)).normalized();
    c.points.push_back(Vec3(0.01, -0.02, 0.05) + r * d);
    c.normals.push_back(d);
  }
  return c;
}

GraspScorePose scored(double z, double score, Index tag) {
  GraspScorePose g;
  g.grasp.center = Vec3(0, 0, z);
  g.grasp.approach_index = tag;
  g.score = score;
  return g;
}

}  // namespace

TEST_CASE("uniform approach sampling", "[sampler][approach]") {
  const auto cloud = sphere_cloud(300, 0.03, 1);
  Rng a(5), b(5);
  const auto s1 = sample_approach_points(cloud, 50, ApproachStrategy::uniform, a);
  const auto s2 = sample_approach_points(cloud, 50, ApproachStrategy::uniform, b);
  CHECK(s1 == s2);
  CHECK(std::set<Index>(s1.begin(), s1.end()).size() == 50);
  for (Index i : s1) CHECK((i >= 0 && i < 300));

  const std::vector<Index> pool{3, 7, 11, 19};
  const auto sub = sample_approach_points(cloud, 4, ApproachStrategy::uniform, a, pool);
  CHECK(std::set<Index>(sub.begin(), sub.end()) == std::set<Index>(pool.begin(), pool.end()));
  CHECK(sample_approach_points(cloud, 0, ApproachStrategy::uniform, a).empty());
  CHECK_THROWS_AS(sample_approach_points(cloud, 301, ApproachStrategy::uniform, a), Error);
  CHECK_THROWS_AS(parse_strategy("random"), Error);
}

TEST_CASE("uniform approach sampling covers indices evenly", "[sampler][approach][property]") {
  const auto cloud = sphere_cloud(20, 0.03, 2);
  Rng rng(3);
  std::vector<int> hits(20, 0);
  constexpr int kTrials = 4000;
  for (int t = 0; t < kTrials; ++t)
    for (Index i : sample_approach_points(cloud, 5, ApproachStrategy::uniform, rng)) ++hits[static_cast<std::size_t>(i)];
  // Each index appears with probability 1/4; 5 sigma band.
  const double mean = kTrials * 0.25, sd = std::sqrt(kTrials * 0.25 * 0.75);
  for (int h : hits) CHECK(std::abs(h - mean) < 5 * sd);
}

TEST_CASE("fps approach sampling matches the greedy reference", "[sampler][approach][oracle]") {
  const auto cloud = sphere_cloud(400, 0.03, 4);
  Rng rng(8);
  const auto got = sample_approach_points(cloud, 32, ApproachStrategy::fps, rng);
  const std::vector<oracle::V3> pts(cloud.points.begin(), cloud.points.end());
  const auto ref = oracle::brute_fps(pts, 32, got.front());
  CHECK(std::vector<long>(got.begin(), got.end()) == ref);
}

TEST_CASE("local regions", "[sampler][region]") {
  const GripperSpec spec;
  const auto cloud = sphere_cloud(1500, 0.03, 6);
  const std::vector<oracle::V3> pts(cloud.points.begin(), cloud.points.end());
  for (Index a : {Index{0}, Index{17}, Index{900}}) {
    const auto r = build_region(cloud, a, spec);
    REQUIRE(r);
    CHECK(r->point_indices.front() == a);
    CHECK(r->centered_points.front() == Vec3::Zero());
    const auto ref = oracle::linear_crop(pts, pts[static_cast<std::size_t>(a)], spec.width / 2);
    CHECK(r->size() == ref.size());
    CHECK(std::set<Index>(r->point_indices.begin(), r->point_indices.end()) == std::set<Index>(ref.begin(), ref.end()));
    for (std::size_t l = 0; l < r->size(); ++l) {
      const auto gi = static_cast<std::size_t>(r->point_indices[l]);
      CHECK((r->centered_points[l] - (cloud.points[gi] - cloud.points[static_cast<std::size_t>(a)])).norm() < 1e-15);
      CHECK(r->normals[l] == cloud.normals[gi]);
    }
    // Candidates are exactly the non-approach points that yield a frame.
    std::set<int> expect;
    for (std::size_t l = 1; l < r->size(); ++l) {
      const auto gi = static_cast<std::size_t>(r->point_indices[l]);
      EdgeFrameOptions fo;
      fo.check_delta_range = true;
      if (compute_edge_frame(cloud.points[static_cast<std::size_t>(a)], cloud.points[gi], cloud.normals[gi], spec, fo))
        expect.insert(static_cast<int>(l));
    }
    CHECK(std::set<int>(r->contact_candidates.begin(), r->contact_candidates.end()) == expect);
    CHECK(!r->contact_candidates.empty());
  }

  PointCloud bare;
  bare.points = cloud.points;
  CHECK_THROWS_AS(build_region(bare, 0, spec), Error);
  CHECK_THROWS_AS(build_region(cloud, 1500, spec), Error);

  RegionOptions big;
  big.min_points = 100000;
  CHECK_FALSE(build_region(cloud, 0, spec, big));
}

TEST_CASE("regions are invariant to rigid motions", "[sampler][region][property]") {
  const GripperSpec spec;
  const auto cloud = sphere_cloud(1000, 0.03, 9);
  Rng rng(10);
  const auto g = random_rigid_transform(rng, 0.2);
  const auto moved = cloud.transformed(g);
  for (Index a : {Index{3}, Index{500}}) {
    const auto r0 = build_region(cloud, a, spec);
    const auto r1 = build_region(moved, a, spec);
    REQUIRE(r0);
    REQUIRE(r1);
    // Membership can differ only for points within rounding of the crop radius.
    CHECK(r0->size() == r1->size());
    const auto rot = r0->rotated(g.rotation);
    for (std::size_t l = 0; l < std::min(r0->size(), r1->size()); ++l) {
      REQUIRE(r0->point_indices[l] == r1->point_indices[l]);
      CHECK((rot.centered_points[l] - r1->centered_points[l]).norm() < 1e-12);
      CHECK((rot.normals[l] - r1->normals[l]).norm() < 1e-12);
    }
  }
}

TEST_CASE("edge batches", "[sampler][batch]") {
  const GripperSpec spec;
  const auto cloud = sphere_cloud(1500, 0.03, 12);
  Rng rng(13);
  const auto approaches = sample_approach_points(cloud, 16, ApproachStrategy::uniform, rng);

  Rng a(1), b(1);
  const auto full = build_batch(cloud, approaches, 1u << 30, a, spec);
  std::size_t total = 0;
  for (const auto& r : full.regions) total += r.contact_candidates.size();
  CHECK(full.edges.size() == total);

  const auto capped = build_batch(cloud, approaches, 300, b, spec);
  Rng b2(1);
  const auto again = build_batch(cloud, approaches, 300, b2, spec);
  CHECK(capped.edges.size() == 300);
  REQUIRE(again.edges.size() == 300);
  for (std::size_t i = 0; i < 300; ++i) {
    CHECK(capped.edges[i].region == again.edges[i].region);
    CHECK(capped.edges[i].contact == again.edges[i].contact);
  }
  std::vector<int> per_region(capped.regions.size(), 0);
  for (std::size_t i = 0; i < capped.edges.size(); ++i) {
    const auto& e = capped.edges[i];
    if (i > 0) {
      const auto& p = capped.edges[i - 1];
      CHECK((p.region < e.region || (p.region == e.region && p.contact < e.contact)));
    }
    const auto& r = capped.regions[static_cast<std::size_t>(e.region)];
    CHECK(std::find(r.contact_candidates.begin(), r.contact_candidates.end(), e.contact) != r.contact_candidates.end());
    ++per_region[static_cast<std::size_t>(e.region)];
  }
  for (int c : per_region) CHECK(c > 0);

  for (const auto& e : capped.edges) {
    const auto& r = capped.regions[static_cast<std::size_t>(e.region)];
    const auto g = edge_grasp(cloud, r, e.contact, spec);
    CHECK(g.approach_index == r.approach_index);
    CHECK(g.contact_index == r.point_indices[static_cast<std::size_t>(e.contact)]);
  }

  // Two isolated points cannot form a region.
  PointCloud sparse;
  sparse.points = {Vec3::Zero(), Vec3(1, 0, 0)};
  sparse.normals = {Vec3::UnitZ(), Vec3::UnitZ()};
  const std::vector<Index> both{0, 1};
  CHECK_THROWS_AS(build_batch(sparse, both, 10, rng, spec), Error);
}

TEST_CASE("grasp selection", "[sampler][select]") {
  const std::vector<GraspScorePose> g{scored(0.10, 0.9, 0), scored(0.20, 0.6, 1), scored(0.15, 0.95, 2),
                                      scored(0.20, 0.7, 3), scored(0.30, 0.2, 4)};
  SECTION("highest center among grasps above threshold") {
    const auto out = select_grasps(g, 0.5, SelectPolicy::highest_z);
    REQUIRE(out.size() == 1);
    CHECK(out[0].grasp.approach_index == 3);
  }
  SECTION("top-k by score") {
    const auto out = select_grasps(g, 0.5, SelectPolicy::top_k, 3);
    REQUIRE(out.size() == 3);
    CHECK(out[0].grasp.approach_index == 2);
    CHECK(out[1].grasp.approach_index == 0);
    CHECK(out[2].grasp.approach_index == 3);
  }
  SECTION("nothing clears the threshold") {
    CHECK(select_grasps(g, 0.99, SelectPolicy::highest_z).empty());
    CHECK(select_grasps({}, 0.0, SelectPolicy::top_k, 4).empty());
  }
  SECTION("ties keep input order") {
    const std::vector<GraspScorePose> t{scored(0.1, 0.5, 0), scored(0.1, 0.5, 1)};
    CHECK(select_grasps(t, 0.0, SelectPolicy::highest_z)[0].grasp.approach_index == 0);
    CHECK(select_grasps(t, 0.0, SelectPolicy::top_k, 1)[0].grasp.approach_index == 0);
  }
  CHECK(parse_policy("top-k") == SelectPolicy::top_k);
  CHECK_THROWS_AS(parse_policy("best"), Error);
}
