#include "edgegrasp/grasp_geometry.hpp"

#include <catch_amalgamated.hpp>

#include <numbers>

using namespace edgegrasp;

namespace {

struct Triple {
  Vec3 pa, pc, nc;
};

Triple random_triple(Rng& rng, double max_dist = 0.039) {
  std::uniform_real_distribution<double> u(-1, 1);
  std::normal_distribution<double> g(0, 1);
  for (;;) {
    Triple t;
    t.pc = Vec3(u(rng), u(rng), u(rng)) * 0.2;
    t.nc = Vec3(g(rng), g(rng), g(rng)).normalized();
    Vec3 off(g(rng), g(rng), g(rng));
    off = off.normalized() * max_dist * std::abs(u(rng));
    t.pa = t.pc + off;
    if (t.nc.cross(off).norm() > 1e-4) return t;
  }
}

Mat3 rot_z_pi() {
  Mat3 r = Mat3::Identity();
  r(0, 0) = -1;
  r(1, 1) = -1;
  return r;
}

// Dense samples over every face of the three gripper bodies.
double dense_min_z(const EdgeGrasp& g, const GripperSpec& spec) {
  double zmin = std::numeric_limits<double>::infinity();
  constexpr int kSteps = 10;
  for (const auto& b : gripper_boxes(g.center, g.rotation, spec)) {
    for (int axis = 0; axis < 3; ++axis) {
      for (double side : {-1.0, 1.0}) {
        for (int i = 0; i <= kSteps; ++i) {
          for (int j = 0; j <= kSteps; ++j) {
            Vec3 s;
            s[axis] = side;
            s[(axis + 1) % 3] = -1.0 + 2.0 * i / kSteps;
            s[(axis + 2) % 3] = -1.0 + 2.0 * j / kSteps;
            zmin = std::min(zmin, (b.center + b.rotation * s.cwiseProduct(b.half)).z());
          }
        }
      }
    }
  }
  return zmin;
}

}  // namespace

TEST_CASE("compute_edge_frame worked example", "[grasp][frame]") {
  const GripperSpec spec;
  const auto g = compute_edge_frame(Vec3(0.01, 0, 0.01), Vec3::Zero(), Vec3(0, 0, 1), spec);
  REQUIRE(g);
  CHECK((g->approach - Vec3(-1, 0, 0)).norm() < 1e-15);
  CHECK(g->delta == Catch::Approx(0.04).margin(1e-15));
  CHECK((g->center - Vec3(0.05, 0, 0.01)).norm() < 1e-15);
  CHECK((g->closing_axis() - Vec3(0, 0, 1)).norm() < 1e-15);
}

TEST_CASE("compute_edge_frame rejections", "[grasp][frame]") {
  const GripperSpec spec;
  FrameRejection why{};
  CHECK_FALSE(compute_edge_frame(Vec3(0, 0, 0.02), Vec3::Zero(), Vec3(0, 0, 1), spec, {}, &why));
  CHECK(why == FrameRejection::degenerate);
  CHECK_FALSE(compute_edge_frame(Vec3(0.05, 0, 0.0), Vec3::Zero(), Vec3(0, 0, 1), spec, {}, &why));
  CHECK(why == FrameRejection::too_far);
  CHECK_THROWS_AS(compute_edge_frame(Vec3(0.01, 0, 0), Vec3::Zero(), Vec3(0, 0, 2), spec), Error);
}

TEST_CASE("edge frames satisfy the algebraic identities", "[grasp][frame][oracle]") {
  const GripperSpec spec;
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    const auto t = random_triple(rng);
    const auto g = compute_edge_frame(t.pa, t.pc, t.nc, spec);
    REQUIRE(g);
    const Mat3& R = g->rotation;
    CHECK((R.transpose() * R - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(std::abs(R.determinant() - 1.0) < 1e-9);
    CHECK(std::abs(g->approach.dot(t.nc)) < 1e-9);
    const Vec3 d = t.pa - g->center;
    CHECK(d.cross(g->approach).norm() < 1e-9);
    CHECK(std::abs(d.dot(g->approach) - g->delta) < 1e-9);
    // Approach point sits on the approach axis, between the fingers.
    CHECK((g->center + g->delta * g->approach_axis() - t.pa).norm() < 1e-9);
    CHECK(std::abs((t.pa - t.pc).norm()) <= spec.width / 2);
  }
}

TEST_CASE("edge frames are rigid equivariant", "[grasp][frame][property]") {
  const GripperSpec spec;
  Rng rng(2);
  for (int i = 0; i < 100; ++i) {
    const auto t = random_triple(rng);
    const auto g = random_rigid_transform(rng);
    const auto a = compute_edge_frame(t.pa, t.pc, t.nc, spec);
    const auto b = compute_edge_frame(g.apply(t.pa), g.apply(t.pc), g.rotate(t.nc), spec);
    REQUIRE(a);
    REQUIRE(b);
    CHECK((b->center - g.apply(a->center)).norm() < 1e-9);
    CHECK((b->rotation - g.rotation * a->rotation).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(std::abs(b->delta - a->delta) < 1e-12);
  }
}

TEST_CASE("flip_normal_grasp is a half turn about the approach axis", "[grasp][flip]") {
  const GripperSpec spec;
  const auto g = compute_edge_frame(Vec3(0.01, 0, 0.01), Vec3::Zero(), Vec3(0, 0, 1), spec);
  const auto flipped = compute_edge_frame(Vec3(0.01, 0, 0.01), Vec3::Zero(), Vec3(0, 0, -1), spec);
  REQUIRE(g);
  REQUIRE(flipped);
  CHECK(flipped->center == g->center);
  CHECK(flipped->approach == g->approach);
  CHECK(flipped->rotation.col(0) == -g->rotation.col(0));
  CHECK(flipped->rotation.col(1) == -g->rotation.col(1));

  const auto f = flip_normal_grasp(*g);
  CHECK(f.rotation == flipped->rotation);
  const auto ff = flip_normal_grasp(f);
  CHECK(ff.rotation == g->rotation);
  CHECK(ff.contact_normal == g->contact_normal);
  CHECK(ff.center == g->center);

  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    const auto t = random_triple(rng);
    const auto base = compute_edge_frame(t.pa, t.pc, t.nc, spec);
    const auto rebuilt = compute_edge_frame(t.pa, t.pc, -t.nc, spec);
    REQUIRE(base);
    REQUIRE(rebuilt);
    CHECK((rebuilt->rotation - base->rotation * rot_z_pi()).norm() < 1e-9);
    CHECK((flip_normal_grasp(*base).rotation - base->rotation * rot_z_pi()).norm() < 1e-9);
    CHECK((rebuilt->center - base->center).norm() < 1e-15);
  }
}

TEST_CASE("table_collision_filter", "[grasp][table]") {
  const GripperSpec spec;
  // Top-down grasp: fingertips reach z = 0.
  const auto top = compute_edge_frame(Vec3(-0.01, 0, 0.02), Vec3::Zero(), Vec3(1, 0, 0), spec);
  REQUIRE(top);
  CHECK((top->approach - Vec3(0, 0, -1)).norm() < 1e-15);
  CHECK(table_collision_filter(*top, spec, -0.01));
  // Side grasp closing vertically: lowest body corner at z = -0.04.
  const auto side = compute_edge_frame(Vec3(-0.02, 0, 0.01), Vec3::Zero(), Vec3(0, 0, 1), spec);
  REQUIRE(side);
  CHECK((side->approach - Vec3(1, 0, 0)).norm() < 1e-15);
  CHECK_FALSE(table_collision_filter(*side, spec, -0.039));
  CHECK(table_collision_filter(*side, spec, -0.041));
}

TEST_CASE("table_collision_filter agrees with dense surface sampling", "[grasp][table][oracle]") {
  const GripperSpec spec;
  Rng rng(4);
  std::uniform_real_distribution<double> tz(-0.25, 0.15);
  int compared = 0;
  for (int i = 0; i < 100; ++i) {
    const auto t = random_triple(rng);
    const auto g = compute_edge_frame(t.pa, t.pc, t.nc, spec);
    REQUIRE(g);
    const double table = tz(rng);
    const double zmin = dense_min_z(*g, spec);
    if (std::abs(zmin - table) < 1e-6) continue;
    ++compared;
    CHECK(table_collision_filter(*g, spec, table) == (zmin > table));
  }
  CHECK(compared > 90);
}

TEST_CASE("grasp records", "[grasp][serialize]") {
  const GripperSpec spec;
  GraspScorePose id;
  id.score = 0.5;
  const auto j = serialize_grasp(id);
  CHECK(j["quat"][0].get<double>() == 1.0);
  CHECK(j["quat"][1].get<double>() == 0.0);

  // w < 0 is written with the opposite sign.
  GraspScorePose neg;
  neg.grasp.rotation = Eigen::Quaterniond(-0.5, 0.5, 0.5, 0.5).toRotationMatrix();
  const auto q = deserialize_grasp(serialize_grasp(neg)).quat;
  CHECK(q[0] > 0);
  CHECK((q - Eigen::Vector4d(0.5, -0.5, -0.5, -0.5)).norm() < 1e-15);

  Rng rng(5);
  std::uniform_real_distribution<double> u(0, 1);
  double worst = 0;
  for (int i = 0; i < 100; ++i) {
    const auto t = random_triple(rng);
    GraspScorePose gs;
    gs.grasp = *compute_edge_frame(t.pa, t.pc, t.nc, spec);
    gs.grasp.approach_index = i;
    gs.grasp.contact_index = 1000 + i;
    gs.score = u(rng);
    const auto line = serialize_grasp(gs).dump();
    const auto r = deserialize_grasp(nlohmann::json::parse(line));
    worst = std::max(worst, (r.center - gs.grasp.center).cwiseAbs().maxCoeff());
    worst = std::max(worst, (r.rotation() - gs.grasp.rotation).cwiseAbs().maxCoeff());
    worst = std::max(worst, std::abs(r.delta - gs.grasp.delta));
    worst = std::max(worst, std::abs(r.score - gs.score));
    CHECK(r.approach_index == i);
    CHECK(r.contact_index == 1000 + i);
  }
  CHECK(worst < 1e-12);

  CHECK_THROWS_AS(deserialize_grasp(nlohmann::json{{"center", {1, 2}}}), Error);
}
