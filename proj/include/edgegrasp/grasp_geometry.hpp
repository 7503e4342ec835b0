#pragma once

// Edge grasp construction: an (approach point, contact point, contact normal)
// triple fixes a parallel-jaw gripper pose.
//
// Gripper frame convention (also used by the serialized records):
//   x = closing direction (the contact normal n_c)
//   z = approach direction a_ac
//   y = z cross x
// The frame origin C sits at the palm; fingers extend from z = 0 to z = G_d,
// so the contact point lies at fingertip depth and the approach point sits on
// the approach axis at depth delta.

#include "edgegrasp/common.hpp"

#include <json.hpp>

#include <array>
#include <optional>

namespace edgegrasp {

struct GripperSpec {
  double width = 0.08;             // G_w, finger-to-finger opening
  double depth = 0.05;             // G_d, palm to fingertip
  double finger_thickness = 0.01;  // along closing axis; fingers are 2x as wide along y
  double palm_halfwidth = 0.05;

  void validate() const {
    if (!(width > 0 && depth > 0 && finger_thickness > 0 && palm_halfwidth > 0))
      throw usage_error("gripper dimensions must be positive");
  }
};

struct EdgeGrasp {
  Index approach_index = -1;
  Index contact_index = -1;
  Vec3 approach_point = Vec3::Zero();  // p_a
  Vec3 contact_point = Vec3::Zero();   // p_c
  Vec3 contact_normal = Vec3::UnitX(); // n_c
  Vec3 approach = Vec3::UnitZ();       // a_ac, unit
  double delta = 0.0;
  Vec3 center = Vec3::Zero();          // C
  Mat3 rotation = Mat3::Identity();    // columns: closing, binormal, approach

  Vec3 closing_axis() const { return rotation.col(0); }
  Vec3 approach_axis() const { return rotation.col(2); }

  EdgeGrasp transformed(const RigidTransform& g) const {
    EdgeGrasp out = *this;
    out.approach_point = g.apply(approach_point);
    out.contact_point = g.apply(contact_point);
    out.contact_normal = g.rotate(contact_normal);
    out.approach = g.rotate(approach);
    out.center = g.apply(center);
    out.rotation = g.rotation * rotation;
    return out;
  }
};

struct GraspScorePose {
  EdgeGrasp grasp;
  double score = 0.0;
};

enum class FrameRejection { none, degenerate, too_far, delta_out_of_range };

struct EdgeFrameOptions {
  bool check_delta_range = false;  // require 0 <= delta <= G_d
  double degenerate_tolerance = 1e-8;
};

/// Gripper pose for an edge, or nullopt when the edge cannot define one.
inline std::optional<EdgeGrasp> compute_edge_frame(const Vec3& p_a, const Vec3& p_c, const Vec3& n_c,
                                                   const GripperSpec& gripper, const EdgeFrameOptions& opts = {},
                                                   FrameRejection* why = nullptr) {
  auto reject = [&](FrameRejection r) -> std::optional<EdgeGrasp> {
    if (why) *why = r;
    return std::nullopt;
  };
  if (std::abs(n_c.norm() - 1.0) > 1e-6) throw usage_error("contact normal must be unit length");
  const Vec3 v = p_a - p_c;
  if (v.norm() > gripper.width / 2) return reject(FrameRejection::too_far);
  const Vec3 nxv = n_c.cross(v);
  if (nxv.norm() < opts.degenerate_tolerance) return reject(FrameRejection::degenerate);

  EdgeGrasp g;
  g.approach_point = p_a;
  g.contact_point = p_c;
  g.contact_normal = n_c;
  g.approach = n_c.cross(nxv).normalized();
  g.delta = gripper.depth + v.dot(g.approach);
  if (opts.check_delta_range && (g.delta < 0 || g.delta > gripper.depth)) return reject(FrameRejection::delta_out_of_range);
  g.center = p_a - g.delta * g.approach;
  // Re-orthogonalize the closing axis against the approach axis so R is
  // orthonormal to machine precision even when n_c carries round-off.
  const Vec3 x = (n_c - n_c.dot(g.approach) * g.approach).normalized();
  g.rotation.col(0) = x;
  g.rotation.col(2) = g.approach;
  g.rotation.col(1) = g.approach.cross(x);
  if (why) *why = FrameRejection::none;
  return g;
}

/// Same grasp built from the opposite contact normal: a half turn about the
/// approach axis.
inline EdgeGrasp flip_normal_grasp(const EdgeGrasp& g) {
  EdgeGrasp out = g;
  out.contact_normal = -g.contact_normal;
  out.rotation.col(0) = -g.rotation.col(0);
  out.rotation.col(1) = -g.rotation.col(1);
  return out;
}

// ---------------------------------------------------------------------------
// Gripper bodies

struct OrientedBox {
  Vec3 center = Vec3::Zero();
  Mat3 rotation = Mat3::Identity();
  Vec3 half = Vec3::Zero();

  std::array<Vec3, 8> corners() const {
    std::array<Vec3, 8> out;
    for (int i = 0; i < 8; ++i) {
      const Vec3 s((i & 1) ? 1.0 : -1.0, (i & 2) ? 1.0 : -1.0, (i & 4) ? 1.0 : -1.0);
      out[static_cast<std::size_t>(i)] = center + rotation * s.cwiseProduct(half);
    }
    return out;
  }
};

/// Open-gripper bodies in the gripper frame: positive finger, negative
/// finger, palm.
inline std::array<OrientedBox, 3> gripper_local_boxes(const GripperSpec& s) {
  const double t = s.finger_thickness;
  const double x_mid = s.width / 2 + t / 2;
  std::array<OrientedBox, 3> boxes;
  boxes[0].center = Vec3(x_mid, 0, s.depth / 2);
  boxes[0].half = Vec3(t / 2, t, s.depth / 2);
  boxes[1].center = Vec3(-x_mid, 0, s.depth / 2);
  boxes[1].half = boxes[0].half;
  boxes[2].center = Vec3(0, 0, -t / 2);
  boxes[2].half = Vec3(s.palm_halfwidth, t, t / 2);
  return boxes;
}

inline std::array<OrientedBox, 3> gripper_boxes(const Vec3& center, const Mat3& rotation, const GripperSpec& s) {
  auto boxes = gripper_local_boxes(s);
  for (auto& b : boxes) {
    b.center = center + rotation * b.center;
    b.rotation = rotation;
  }
  return boxes;
}

/// True when every gripper body corner stays strictly above the table.
inline bool table_collision_filter(const EdgeGrasp& g, const GripperSpec& gripper, double table_z) {
  for (const auto& box : gripper_boxes(g.center, g.rotation, gripper))
    for (const auto& c : box.corners())
      if (!(c.z() > table_z)) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Records

/// Unit quaternion (w, x, y, z) with w >= 0.
inline Eigen::Vector4d rotation_to_wxyz(const Mat3& r) {
  Eigen::Quaterniond q(r);
  q.normalize();
  Eigen::Vector4d out(q.w(), q.x(), q.y(), q.z());
  if (out[0] < 0) out = -out;
  return out;
}

inline Mat3 wxyz_to_rotation(const Eigen::Vector4d& wxyz) {
  Eigen::Quaterniond q(wxyz[0], wxyz[1], wxyz[2], wxyz[3]);
  q.normalize();
  return q.toRotationMatrix();
}

/// What a grasp record carries on disk.
struct GraspRecord {
  Vec3 center = Vec3::Zero();
  Eigen::Vector4d quat{1, 0, 0, 0};
  double delta = 0.0;
  Index approach_index = -1;
  Index contact_index = -1;
  double score = 0.0;

  Mat3 rotation() const { return wxyz_to_rotation(quat); }
};

inline GraspRecord to_record(const GraspScorePose& gs) {
  GraspRecord r;
  r.center = gs.grasp.center;
  r.quat = rotation_to_wxyz(gs.grasp.rotation);
  r.delta = gs.grasp.delta;
  r.approach_index = gs.grasp.approach_index;
  r.contact_index = gs.grasp.contact_index;
  r.score = gs.score;
  return r;
}

inline nlohmann::json serialize_grasp(const GraspScorePose& gs) {
  const GraspRecord r = to_record(gs);
  return nlohmann::json{{"center", {r.center.x(), r.center.y(), r.center.z()}},
                        {"quat", {r.quat[0], r.quat[1], r.quat[2], r.quat[3]}},
                        {"delta", r.delta},
                        {"approach_index", r.approach_index},
                        {"contact_index", r.contact_index},
                        {"score", r.score}};
}

inline GraspRecord deserialize_grasp(const nlohmann::json& j) {
  GraspRecord r;
  try {
    const auto& c = j.at("center");
    const auto& q = j.at("quat");
    r.center = Vec3(c.at(0).get<double>(), c.at(1).get<double>(), c.at(2).get<double>());
    r.quat = Eigen::Vector4d(q.at(0).get<double>(), q.at(1).get<double>(), q.at(2).get<double>(), q.at(3).get<double>());
    r.delta = j.at("delta").get<double>();
    r.approach_index = j.at("approach_index").get<Index>();
    r.contact_index = j.at("contact_index").get<Index>();
    r.score = j.at("score").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw data_error(std::string("malformed grasp record: ") + e.what());
  }
  return r;
}

}  // namespace edgegrasp
