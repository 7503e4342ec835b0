#include "edgegrasp/pipeline.hpp"
#include "edgegrasp/pointcloud.hpp"
#include "edgegrasp/pointcloud_io.hpp"
#include "oracles_geometry.hpp"

#include <catch_amalgamated.hpp>

#include <numbers>
#include <sstream>

using namespace edgegrasp;
using Catch::Approx;

namespace {

std::vector<Vec3> to_vec(const std::vector<oracle::V3>& pts) { return {pts.begin(), pts.end()}; }

std::vector<long> to_long(const std::vector<Index>& v) { return {v.begin(), v.end()}; }

}  // namespace

TEST_CASE("voxel_downsample merges and orders voxels", "[pointcloud][voxel]") {
  PointCloud c;
  c.points = {{0.001, 0, 0}, {0.003, 0, 0}};
  auto out = voxel_downsample(c, 0.004);
  REQUIRE(out.size() == 1);
  CHECK(out.points[0].x() == Approx(0.002).margin(1e-15));

  c.points = {{0.001, 0, 0}, {0.005, 0, 0}};
  out = voxel_downsample(c, 0.004);
  REQUIRE(out.size() == 2);
  CHECK(out.points[0] == c.points[0]);
  CHECK(out.points[1] == c.points[1]);

  SECTION("z-major ordering") {
    PointCloud d;
    d.points = {{0.0101, 0, 0}, {0, 0, 0.0101}, {0, 0.0101, 0}};
    const auto o = voxel_downsample(d, 0.01);
    REQUIRE(o.size() == 3);
    CHECK(o.points[0].x() > 0.01);
    CHECK(o.points[1].y() > 0.01);
    CHECK(o.points[2].z() > 0.01);
  }

  SECTION("empty cloud is fine") { CHECK(voxel_downsample(PointCloud{}, 0.004).empty()); }
  SECTION("non-positive voxel rejected") { CHECK_THROWS_AS(voxel_downsample(c, 0.0), Error); }
}

TEST_CASE("voxel_downsample count equals hash-grid occupancy", "[pointcloud][voxel][oracle]") {
  // 10,000 points in a 3 cm cube.
  auto pts = oracle::random_points(10000, 0.015, 11);
  PointCloud c;
  c.points = to_vec(pts);
  const auto out = voxel_downsample(c, 0.004);
  CHECK(out.size() == oracle::voxel_occupancy(pts, 0.004));
}

TEST_CASE("voxel_downsample is idempotent", "[pointcloud][voxel][property]") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    PointCloud c;
    c.points = to_vec(oracle::random_points(3000, 0.05, seed));
    Rng rng(seed);
    for (std::size_t i = 0; i < c.size(); ++i) c.normals.push_back(random_rotation(rng).col(0));
    const auto once = voxel_downsample(c, 0.004);
    const auto twice = voxel_downsample(once, 0.004);
    REQUIRE(once.size() == twice.size());
    for (std::size_t i = 0; i < once.size(); ++i) {
      CHECK(once.points[i] == twice.points[i]);
      CHECK(once.normals[i] == twice.normals[i]);
    }
  }
}

TEST_CASE("estimate_normals on a plane is oriented toward the viewpoint", "[pointcloud][normals]") {
  PointCloud c;
  for (int i = -1; i <= 1; ++i)
    for (int j = -1; j <= 1; ++j) c.points.emplace_back(0.01 * i, 0.01 * j, 0.0);
  c.viewpoint = Vec3(0, 0, 1);
  auto out = estimate_normals(c, 8);
  for (const auto& n : out.normals) CHECK((n - Vec3(0, 0, 1)).norm() < 1e-12);
  c.viewpoint = Vec3(0, 0, -1);
  out = estimate_normals(c, 8);
  for (const auto& n : out.normals) CHECK((n - Vec3(0, 0, -1)).norm() < 1e-12);

  PointCloud tiny;
  tiny.points = {{0, 0, 0}, {1, 0, 0}};
  CHECK_THROWS_WITH(estimate_normals(tiny, 2), "too few points for normal estimation");
}

TEST_CASE("normal estimation order is configurable", "[pointcloud][normals]") {
  PointCloud c;
  for (int i = -20; i <= 20; ++i)
    for (int j = -20; j <= 20; ++j) c.points.emplace_back(0.001 * i, 0.001 * j, 0.0);
  c.viewpoint = Vec3(0.01, 0, 0.5);
  PipelineConfig cfg;
  const auto after = prepare_cloud(c, cfg);
  cfg.normals_first = true;
  const auto before = prepare_cloud(c, cfg);
  REQUIRE(before.size() == after.size());
  CHECK(before.size() < c.size());
  for (std::size_t i = 0; i < before.size(); ++i) {
    CHECK(before.points[i] == after.points[i]);  // positions never depend on normals
    CHECK((before.normals[i] - Vec3(0, 0, 1)).norm() < 1e-12);
    CHECK((after.normals[i] - Vec3(0, 0, 1)).norm() < 1e-12);
  }
}

TEST_CASE("estimate_normals on a unit sphere matches radial normals", "[pointcloud][normals][oracle]") {
  Rng rng(3);
  std::normal_distribution<double> g(0, 1);
  PointCloud c;
  for (int i = 0; i < 200; ++i) c.points.push_back(Vec3(g(rng), g(rng), g(rng)).normalized());
  c.viewpoint = Vec3::Zero();  // orient inward, then compare up to sign below
  const auto out = estimate_normals(c, 8);
  double total = 0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    const double cosang = std::min(1.0, std::abs(out.normals[i].dot(c.points[i])));
    total += std::acos(cosang);
  }
  const double mean_deg = total / static_cast<double>(c.size()) * 180.0 / std::numbers::pi;
  CHECK(mean_deg < 5.0);
}

TEST_CASE("estimate_normals is rotation equivariant", "[pointcloud][normals][property]") {
  Rng rng(5);
  PointCloud c;
  c.points = to_vec(oracle::random_points(300, 0.05, 9));
  for (auto& p : c.points) p.z() = 0.3 * p.x() * p.x() + 0.1 * p.y();  // smooth surface
  c.viewpoint = Vec3(0.01, 0.02, 1.0);
  const auto base = estimate_normals(c, 16);
  for (int trial = 0; trial < 10; ++trial) {
    const auto g = random_rigid_transform(rng, 0.5);
    const auto moved = estimate_normals(c.transformed(g), 16);
    for (std::size_t i = 0; i < c.size(); ++i) {
      const double cosang = std::min(1.0, std::abs(moved.normals[i].dot(g.rotation * base.normals[i])));
      CHECK(std::acos(cosang) < 1e-4);
    }
  }
}

TEST_CASE("knn_graph small cases", "[pointcloud][knn]") {
  std::vector<Vec3> line{{0, 0, 0}, {1, 0, 0}, {3, 0, 0}};
  auto g = knn_graph(line, 1);
  CHECK(g.neighbors[0] == std::vector<Index>{1});
  CHECK(g.neighbors[1] == std::vector<Index>{0});
  CHECK(g.neighbors[2] == std::vector<Index>{1});

  std::vector<Vec3> square{{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}};
  g = knn_graph(square, 2);
  CHECK(g.neighbors[0] == std::vector<Index>{1, 3});
  CHECK(g.neighbors[1] == std::vector<Index>{0, 2});
  CHECK(g.neighbors[2] == std::vector<Index>{1, 3});
  CHECK(g.neighbors[3] == std::vector<Index>{0, 2});

  CHECK_THROWS_AS(knn_graph(std::vector<Vec3>{{0, 0, 0}}, 1), Error);
  // k larger than n - 1 is clamped.
  CHECK(knn_graph(line, 16).neighbors[0].size() == 2);
}

TEST_CASE("knn_graph matches brute force", "[pointcloud][knn][oracle]") {
  for (std::size_t n : {40u, 500u}) {
    const auto pts = oracle::random_points(n, 0.1, n);
    const auto ref = oracle::brute_knn(pts, 16);
    const auto g = knn_graph(to_vec(pts), 16);
    for (std::size_t i = 0; i < n; ++i) REQUIRE(to_long(g.neighbors[i]) == ref[i]);
  }
  SECTION("duplicate points tie by index") {
    std::vector<Vec3> dup(100, Vec3(0.1, 0.2, 0.3));
    const auto g = knn_graph(dup, 5);
    CHECK(g.neighbors[0] == std::vector<Index>{1, 2, 3, 4, 5});
    CHECK(g.neighbors[3] == std::vector<Index>{0, 1, 2, 4, 5});
  }
}

TEST_CASE("knn_graph is rigid invariant", "[pointcloud][knn][property]") {
  Rng rng(21);
  const auto pts = to_vec(oracle::random_points(200, 0.1, 4));
  const auto base = knn_graph(pts, 16);
  for (int t = 0; t < 5; ++t) {
    const auto g = random_rigid_transform(rng);
    std::vector<Vec3> moved;
    for (const auto& p : pts) moved.push_back(g.apply(p));
    CHECK(knn_graph(moved, 16).neighbors == base.neighbors);
  }
}

TEST_CASE("radius_crop", "[pointcloud][crop]") {
  std::vector<Vec3> pts{{0.03, 0, 0}, {0, 0.06, 0}};
  CHECK(radius_crop(pts, Vec3::Zero(), 0.04) == std::vector<Index>{0});
  CHECK(radius_crop(pts, pts[1], 0.0) == std::vector<Index>{1});

  const auto rnd = oracle::random_points(1000, 0.1, 77);
  const auto v = to_vec(rnd);
  const KdTree tree(v);
  for (int t = 0; t < 20; ++t) {
    const auto& c = v[static_cast<std::size_t>(t * 37)];
    const auto ref = oracle::linear_crop(rnd, c, 0.04);
    CHECK(to_long(radius_crop(v, c, 0.04)) == ref);
    CHECK(to_long(radius_crop(tree, c, 0.04)) == ref);
  }

  Rng rng(8);
  const auto g = random_rigid_transform(rng);
  std::vector<Vec3> moved;
  for (const auto& p : v) moved.push_back(g.apply(p));
  CHECK(radius_crop(moved, g.apply(v[5]), 0.04) == radius_crop(v, v[5], 0.04));
}

TEST_CASE("farthest_point_sampling", "[pointcloud][fps]") {
  std::vector<Vec3> line{{0, 0, 0}, {0.5, 0, 0}, {1, 0, 0}};
  CHECK(farthest_point_sampling(line, 2, 0) == std::vector<Index>{0, 2});
  auto all = farthest_point_sampling(line, 3, 1);
  std::sort(all.begin(), all.end());
  CHECK(all == std::vector<Index>{0, 1, 2});
  CHECK_THROWS_AS(farthest_point_sampling(line, 4, 0), Error);

  const auto pts = oracle::random_points(300, 0.1, 5);
  CHECK(to_long(farthest_point_sampling(to_vec(pts), 32, 17)) == oracle::brute_fps(pts, 32, 17));
}

TEST_CASE("add_noise", "[pointcloud][noise]") {
  PointCloud c;
  c.points = to_vec(oracle::random_points(10000, 0.1, 1));
  c.viewpoint = Vec3(0, 0, 1);
  Rng rng(1);
  const auto same = add_noise(c, 0.0, rng);
  CHECK(same.points == c.points);

  Rng r1(42), r2(42);
  const auto a = add_noise(c, 0.001, r1);
  const auto b = add_noise(c, 0.001, r2);
  CHECK(a.points == b.points);

  double sum = 0, sum2 = 0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    const Vec3 ray = (c.points[i] - *c.viewpoint).normalized();
    const Vec3 d = a.points[i] - c.points[i];
    CHECK((d - d.dot(ray) * ray).norm() < 1e-12);  // displacement stays on the ray
    sum += d.dot(ray);
    sum2 += d.dot(ray) * d.dot(ray);
  }
  const double n = static_cast<double>(c.size());
  const double sd = std::sqrt(sum2 / n - (sum / n) * (sum / n));
  CHECK(sd == Approx(0.001).epsilon(0.1));
}

TEST_CASE("PLY and CSV round trip", "[pointcloud][io]") {
  PointCloud c;
  c.points = {{0.1, 0.2, 0.3}, {-1e-3, 2.5, 1.0 / 3.0}};
  c.normals = {{0, 0, 1}, Vec3(1, 1, 0).normalized()};
  c.viewpoint = Vec3(0.5, 0.25, 1.0);
  std::stringstream ss;
  io::write_ply(ss, c);
  const auto back = io::read_ply(ss);
  REQUIRE(back.size() == 2);
  CHECK(back.points == c.points);
  CHECK((back.normals[1] - c.normals[1]).norm() < 1e-15);
  REQUIRE(back.viewpoint);
  CHECK(*back.viewpoint == *c.viewpoint);

  std::stringstream csv("x,y,z\n0.1,0.2,0.3\n# comment\n1,2,3\n");
  const auto cc = io::read_csv(csv);
  REQUIRE(cc.size() == 2);
  CHECK(cc.points[1] == Vec3(1, 2, 3));
  CHECK_FALSE(cc.has_normals());

  std::stringstream bad("ply\nformat binary_little_endian 1.0\nelement vertex 1\nproperty float x\nend_header\n");
  CHECK_THROWS_AS(io::read_ply(bad), Error);
}
