#pragma once

// Tabletop scenes of analytic primitives: packed (upright, non-overlapping)
// and pile (random orientations, stacked quasi-statically).

#include "edgegrasp/scene/gjk.hpp"
#include "edgegrasp/scene/primitives.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace edgegrasp::scene {

enum class SceneKind { packed, pile };

inline const char* kind_name(SceneKind k) { return k == SceneKind::packed ? "packed" : "pile"; }

inline SceneKind parse_kind(const std::string& s) {
  if (s == "packed") return SceneKind::packed;
  if (s == "pile") return SceneKind::pile;
  throw usage_error("scene kind must be 'packed' or 'pile', got '" + s + "'");
}

struct Scene {
  std::vector<Primitive> primitives;
  // Table plane {x : table_normal . x = table_offset}; objects live on the
  // positive side.
  Vec3 table_normal = Vec3::UnitZ();
  double table_offset = 0.0;
  Eigen::AlignedBox3d workspace{Vec3(-0.15, -0.15, 0.0), Vec3(0.15, 0.15, 0.30)};
  double object_mass = 0.5;  // kg; recorded only, the static oracle ignores it

  double table_z() const { return table_offset; }

  Scene transformed(const RigidTransform& g) const {
    Scene out = *this;
    for (auto& p : out.primitives) p = p.transformed(g);
    out.table_normal = g.rotate(table_normal);
    out.table_offset = table_offset + out.table_normal.dot(g.translation);
    return out;
  }

  /// Primitive whose surface is closest to `p` (-1 when the scene is empty).
  int owner_of(const Vec3& p) const {
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < primitives.size(); ++i) {
      const double d = std::abs(primitives[i].signed_distance(p));
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(i);
      }
    }
    return best;
  }
};

/// Lower bound on the distance between two primitives, 0 on overlap. Exact
/// whenever the bound drops below `exact_below`.
inline double primitive_distance(const Primitive& a, const Primitive& b, double exact_below = 1e-3) {
  const Vec3 ca = a.pose.translation, cb = b.pose.translation;
  const double gap = (ca - cb).norm() - a.bounding_radius() - b.bounding_radius();
  if (gap > exact_below) return gap;
  return gjk_distance([&](const Vec3& d) { return a.support(d); }, [&](const Vec3& d) { return b.support(d); }, ca - cb);
}

/// Exact distance (no bounding-sphere shortcut).
inline double exact_primitive_distance(const Primitive& a, const Primitive& b) {
  return gjk_distance([&](const Vec3& d) { return a.support(d); }, [&](const Vec3& d) { return b.support(d); },
                      a.pose.translation - b.pose.translation);
}

inline bool intersects(const Primitive& a, const Primitive& b) {
  const double gap =
      (a.pose.translation - b.pose.translation).norm() - a.bounding_radius() - b.bounding_radius();
  if (gap > 0.0) return false;
  return exact_primitive_distance(a, b) <= 0.0;
}

/// Signed height of the lowest point of `p` above the table plane.
inline double clearance_above_table(const Scene& s, const Primitive& p) {
  return s.table_normal.dot(p.support(-s.table_normal)) - s.table_offset;
}

struct SceneGenConfig {
  double packed_half_area = 0.10;  // xy placement square half-width (packed)
  double pile_half_area = 0.06;    // xy drop square half-width (pile)
  int max_attempts = 1000;
  double min_radius = 0.015, max_radius = 0.035;
  double min_box_half = 0.01, max_box_half = 0.035;
  double min_half_height = 0.02, max_half_height = 0.055;
};

namespace detail {

inline Primitive random_shape(Rng& rng, const SceneGenConfig& cfg) {
  std::uniform_int_distribution<int> pick(0, 2);
  std::uniform_real_distribution<double> radius(cfg.min_radius, cfg.max_radius);
  std::uniform_real_distribution<double> half(cfg.min_box_half, cfg.max_box_half);
  std::uniform_real_distribution<double> hh(cfg.min_half_height, cfg.max_half_height);
  switch (pick(rng)) {
    case 0: return Primitive::sphere(radius(rng), Vec3::Zero());
    case 1: {
      const double hx = half(rng), hy = half(rng), hz = hh(rng);
      return Primitive::box(Vec3(hx, hy, hz), RigidTransform{});
    }
    default: {
      const double r = radius(rng), h = hh(rng);
      return Primitive::cylinder(r, h, RigidTransform{});
    }
  }
}

inline double upright_half_height(const Primitive& p) {
  switch (p.shape) {
    case Shape::sphere: return p.size.x();
    case Shape::box: return p.size.z();
    case Shape::cylinder: return p.size.y();
  }
  return 0.0;
}

// Lower `p` along -table_normal until it rests on the table or on another
// primitive (conservative advancement, no dynamics).
inline void drop_onto(const Scene& s, Primitive& p) {
  const Vec3 down = -s.table_normal;
  for (int iter = 0; iter < 500; ++iter) {
    const double gap_table = clearance_above_table(s, p);
    double gap_objects = std::numeric_limits<double>::infinity();
    for (const auto& other : s.primitives) gap_objects = std::min(gap_objects, primitive_distance(p, other));
    if (gap_table <= 0.9 * gap_objects) {
      p.pose.translation += gap_table * down;
      return;
    }
    if (gap_objects < 1e-5) return;
    p.pose.translation += 0.9 * gap_objects * down;
  }
}

}  // namespace detail

/// Removes primitive `index` and lets the rest drop, lowest first, until
/// each rests on the table or another primitive.
inline void remove_and_settle(Scene& s, int index) {
  if (index < 0 || static_cast<std::size_t>(index) >= s.primitives.size()) throw usage_error("primitive index out of range");
  s.primitives.erase(s.primitives.begin() + index);
  std::vector<std::size_t> order(s.primitives.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto bottom = [&](std::size_t i) { return s.primitives[i].support(-s.table_normal).dot(s.table_normal); };
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return bottom(a) < bottom(b); });
  for (std::size_t i : order) {
    Primitive p = s.primitives[i];
    Scene rest = s;
    rest.primitives.erase(rest.primitives.begin() + static_cast<std::ptrdiff_t>(i));
    detail::drop_onto(rest, p);
    s.primitives[i] = p;
  }
}

inline Scene generate_scene(SceneKind kind, int object_count, Rng& rng, const SceneGenConfig& cfg = {}) {
  if (object_count < 1) throw usage_error("object count must be at least 1");
  Scene scene;
  const double tz = scene.table_z();
  std::uniform_real_distribution<double> yaw(0.0, 2.0 * std::numbers::pi);
  if (kind == SceneKind::packed) {
    std::uniform_real_distribution<double> xy(-cfg.packed_half_area, cfg.packed_half_area);
    for (int k = 0; k < object_count; ++k) {
      Primitive shape = detail::random_shape(rng, cfg);
      bool placed = false;
      for (int attempt = 0; attempt < cfg.max_attempts && !placed; ++attempt) {
        Primitive cand = shape;
        cand.pose.rotation = Eigen::AngleAxisd(yaw(rng), Vec3::UnitZ()).toRotationMatrix();
        cand.pose.translation = Vec3(xy(rng), xy(rng), tz + detail::upright_half_height(cand));
        placed = std::none_of(scene.primitives.begin(), scene.primitives.end(),
                              [&](const Primitive& o) { return !(primitive_distance(cand, o) > 0.0); });
        if (placed) scene.primitives.push_back(cand);
      }
      if (!placed) throw data_error("could not place object without overlap after max attempts");
    }
  } else {
    std::uniform_real_distribution<double> xy(-cfg.pile_half_area, cfg.pile_half_area);
    for (int k = 0; k < object_count; ++k) {
      Primitive cand = detail::random_shape(rng, cfg);
      cand.pose.rotation = random_rotation(rng);
      double top = tz;
      for (const auto& o : scene.primitives) top = std::max(top, o.support(Vec3::UnitZ()).z());
      cand.pose.translation = Vec3(xy(rng), xy(rng), 0.0);
      const double bottom_offset = cand.support(-Vec3::UnitZ()).z();
      cand.pose.translation.z() = top + 0.01 - bottom_offset;
      detail::drop_onto(scene, cand);
      scene.primitives.push_back(cand);
    }
  }
  return scene;
}

}  // namespace edgegrasp::scene
