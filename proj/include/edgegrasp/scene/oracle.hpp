#pragma once

// Static grasp oracle. A grasp succeeds when
//   (a) the open gripper, swept from its pregrasp pose to the grasp pose,
//       touches neither the table nor any primitive,
//   (b) closing along the fingertip line meets the target on both sides
//       inside the aperture, with nothing else in between, and
//   (c) both contact normals lie inside the friction cone around the
//       closing line.

#include "edgegrasp/grasp_geometry.hpp"
#include "edgegrasp/scene/scene.hpp"

#include <cmath>

namespace edgegrasp::scene {

enum class FailureReason { none, collision, friction_cone, aperture, unreachable };

inline const char* reason_name(FailureReason r) {
  switch (r) {
    case FailureReason::none: return "none";
    case FailureReason::collision: return "collision";
    case FailureReason::friction_cone: return "friction_cone";
    case FailureReason::aperture: return "aperture";
    case FailureReason::unreachable: return "unreachable";
  }
  return "?";
}

inline FailureReason parse_reason(const std::string& s) {
  for (auto r : {FailureReason::none, FailureReason::collision, FailureReason::friction_cone, FailureReason::aperture,
                 FailureReason::unreachable})
    if (s == reason_name(r)) return r;
  throw data_error("unknown failure reason '" + s + "'");
}

struct GraspLabel {
  Index edge_id = -1;
  bool success = false;
  FailureReason failure_reason = FailureReason::unreachable;
  int target = -1;  // primitive owning the contact point
};

struct OracleConfig {
  double friction_mu = 0.75;
  double pregrasp_retreat = -1.0;  // along -approach; negative means G_d
  int sweep_steps = 10;            // poses checked = sweep_steps + 1
};

inline bool gripper_hits_scene(const Scene& s, const Vec3& center, const Mat3& rotation, const GripperSpec& gripper) {
  for (const auto& b : gripper_boxes(center, rotation, gripper)) {
    for (const auto& c : b.corners())
      if (s.table_normal.dot(c) <= s.table_offset) return true;
    const Primitive body = box_primitive(b.center, b.rotation, b.half);
    for (const auto& p : s.primitives)
      if (intersects(body, p)) return true;
  }
  return false;
}

inline GraspLabel label_grasp(const Scene& s, const EdgeGrasp& g, const GripperSpec& gripper,
                              const OracleConfig& cfg = {}) {
  GraspLabel label;
  auto fail = [&](FailureReason r) {
    label.success = false;
    label.failure_reason = r;
    return label;
  };
  label.target = s.owner_of(g.contact_point);
  if (label.target < 0) return fail(FailureReason::unreachable);

  const Vec3 x = g.closing_axis();
  const Vec3 z = g.approach_axis();
  const double half_w = gripper.width / 2;
  const Vec3 line_origin = g.center + gripper.depth * z;

  // Closing line intervals along +x.
  const auto target_iv = s.primitives[static_cast<std::size_t>(label.target)].ray_interval(line_origin, x);
  if (!target_iv || target_iv->t_out < -half_w || target_iv->t_in > half_w) return fail(FailureReason::unreachable);
  if (target_iv->t_in < -half_w || target_iv->t_out > half_w) return fail(FailureReason::aperture);
  for (std::size_t i = 0; i < s.primitives.size(); ++i) {
    if (static_cast<int>(i) == label.target) continue;
    const auto iv = s.primitives[i].ray_interval(line_origin, x);
    if (!iv || iv->t_out < -half_w || iv->t_in > half_w) continue;
    // Any other solid on the closing segment sits between a finger and the
    // target (or overlaps it) and blocks the closure.
    return fail(FailureReason::collision);
  }

  const double retreat = cfg.pregrasp_retreat < 0 ? gripper.depth : cfg.pregrasp_retreat;
  const int steps = std::max(cfg.sweep_steps, 1);
  for (int i = 0; i <= steps; ++i) {
    const double frac = 1.0 - static_cast<double>(i) / steps;
    if (gripper_hits_scene(s, g.center - frac * retreat * z, g.rotation, gripper)) return fail(FailureReason::collision);
  }

  const double cos_limit = 1.0 / std::sqrt(1.0 + cfg.friction_mu * cfg.friction_mu);
  const double c_pos = std::abs(target_iv->n_out.dot(x));
  const double c_neg = std::abs(target_iv->n_in.dot(x));
  if (c_pos < cos_limit || c_neg < cos_limit) return fail(FailureReason::friction_cone);

  label.success = true;
  label.failure_reason = FailureReason::none;
  return label;
}

}  // namespace edgegrasp::scene
