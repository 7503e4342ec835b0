#pragma once

// Analytic convex solids: sphere, box, and z-axis cylinder in a local frame,
// placed in the world by a rigid pose. Each supports ray intervals, signed
// distance, and a support map for GJK.

#include "edgegrasp/common.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

namespace edgegrasp::scene {

enum class Shape { sphere, box, cylinder };

inline const char* shape_name(Shape s) {
  switch (s) {
    case Shape::sphere: return "sphere";
    case Shape::box: return "box";
    case Shape::cylinder: return "cylinder";
  }
  return "?";
}

inline Shape parse_shape(const std::string& s) {
  if (s == "sphere") return Shape::sphere;
  if (s == "box") return Shape::box;
  if (s == "cylinder") return Shape::cylinder;
  throw data_error("unknown shape '" + s + "'");
}

/// Entry and exit of a line through a solid: origin + t * dir for t in
/// [t_in, t_out], with outward normals at both ends.
struct RayInterval {
  double t_in = 0.0;
  double t_out = 0.0;
  Vec3 n_in = Vec3::Zero();
  Vec3 n_out = Vec3::Zero();
};

struct Primitive {
  Shape shape = Shape::sphere;
  // sphere: (r, -, -); box: half extents; cylinder: (r, half height, -)
  Vec3 size = Vec3::Zero();
  RigidTransform pose;

  static Primitive sphere(double radius, const Vec3& center) {
    Primitive p;
    p.shape = Shape::sphere;
    p.size = Vec3(radius, 0, 0);
    p.pose.translation = center;
    return p;
  }
  static Primitive box(const Vec3& half_extents, const RigidTransform& pose) {
    Primitive p;
    p.shape = Shape::box;
    p.size = half_extents;
    p.pose = pose;
    return p;
  }
  static Primitive cylinder(double radius, double half_height, const RigidTransform& pose) {
    Primitive p;
    p.shape = Shape::cylinder;
    p.size = Vec3(radius, half_height, 0);
    p.pose = pose;
    return p;
  }

  Primitive transformed(const RigidTransform& g) const {
    Primitive out = *this;
    out.pose = g * pose;
    return out;
  }

  double bounding_radius() const {
    switch (shape) {
      case Shape::sphere: return size.x();
      case Shape::box: return size.norm();
      case Shape::cylinder: return std::hypot(size.x(), size.y());
    }
    return 0.0;
  }

  Vec3 local(const Vec3& world) const { return pose.rotation.transpose() * (world - pose.translation); }

  /// Farthest point of the solid along `dir` (world frame).
  Vec3 support(const Vec3& dir) const {
    const Vec3 d = pose.rotation.transpose() * dir;
    Vec3 s = Vec3::Zero();
    switch (shape) {
      case Shape::sphere: {
        const double n = d.norm();
        if (n > 0) s = d * (size.x() / n);
        break;
      }
      case Shape::box:
        for (int a = 0; a < 3; ++a) s[a] = d[a] >= 0 ? size[a] : -size[a];
        break;
      case Shape::cylinder: {
        const double r = std::hypot(d.x(), d.y());
        if (r > 0) {
          s.x() = d.x() * size.x() / r;
          s.y() = d.y() * size.x() / r;
        }
        s.z() = d.z() >= 0 ? size.y() : -size.y();
        break;
      }
    }
    return pose.apply(s);
  }

  double signed_distance(const Vec3& world) const {
    const Vec3 p = local(world);
    switch (shape) {
      case Shape::sphere: return p.norm() - size.x();
      case Shape::box: {
        const Vec3 q = p.cwiseAbs() - size;
        return q.cwiseMax(0.0).norm() + std::min(q.maxCoeff(), 0.0);
      }
      case Shape::cylinder: {
        const double dr = std::hypot(p.x(), p.y()) - size.x();
        const double dz = std::abs(p.z()) - size.y();
        return std::min(std::max(dr, dz), 0.0) + std::hypot(std::max(dr, 0.0), std::max(dz, 0.0));
      }
    }
    return 0.0;
  }

  /// Outward surface normal at (or near) a world point.
  Vec3 surface_normal(const Vec3& world) const {
    const Vec3 p = local(world);
    Vec3 n = Vec3::UnitZ();
    switch (shape) {
      case Shape::sphere:
        if (p.norm() > 0) n = p.normalized();
        break;
      case Shape::box: {
        int axis = 0;
        (p.cwiseAbs() - size).maxCoeff(&axis);
        n = Vec3::Zero();
        n[axis] = p[axis] >= 0 ? 1.0 : -1.0;
        break;
      }
      case Shape::cylinder: {
        const double r = std::hypot(p.x(), p.y());
        if (std::abs(p.z()) - size.y() > r - size.x()) {
          n = Vec3(0, 0, p.z() >= 0 ? 1.0 : -1.0);
        } else if (r > 0) {
          n = Vec3(p.x() / r, p.y() / r, 0);
        }
        break;
      }
    }
    return pose.rotate(n);
  }

  /// Interval of the full line origin + t*dir inside the solid (t may be
  /// negative). `dir` must be unit length.
  std::optional<RayInterval> ray_interval(const Vec3& origin, const Vec3& dir) const {
    const Vec3 o = local(origin);
    const Vec3 d = pose.rotation.transpose() * dir;
    std::optional<RayInterval> hit;
    switch (shape) {
      case Shape::sphere: hit = sphere_interval(o, d); break;
      case Shape::box: hit = box_interval(o, d); break;
      case Shape::cylinder: hit = cylinder_interval(o, d); break;
    }
    if (hit) {
      hit->n_in = pose.rotate(hit->n_in);
      hit->n_out = pose.rotate(hit->n_out);
    }
    return hit;
  }

 private:
  std::optional<RayInterval> sphere_interval(const Vec3& o, const Vec3& d) const {
    const double r = size.x();
    const double b = o.dot(d);
    const double c = o.squaredNorm() - r * r;
    const double disc = b * b - c;
    if (disc < 0) return std::nullopt;
    const double s = std::sqrt(disc);
    RayInterval out;
    out.t_in = -b - s;
    out.t_out = -b + s;
    out.n_in = (o + out.t_in * d) / r;
    out.n_out = (o + out.t_out * d) / r;
    return out;
  }

  std::optional<RayInterval> box_interval(const Vec3& o, const Vec3& d) const {
    double t0 = -std::numeric_limits<double>::infinity();
    double t1 = std::numeric_limits<double>::infinity();
    int a0 = -1, a1 = -1;
    double s0 = 0, s1 = 0;
    for (int a = 0; a < 3; ++a) {
      if (std::abs(d[a]) < 1e-15) {
        if (o[a] < -size[a] || o[a] > size[a]) return std::nullopt;
        continue;
      }
      double ta = (-size[a] - o[a]) / d[a];
      double tb = (size[a] - o[a]) / d[a];
      double sa = -1.0, sb = 1.0;
      if (ta > tb) {
        std::swap(ta, tb);
        std::swap(sa, sb);
      }
      if (ta > t0) {
        t0 = ta;
        a0 = a;
        s0 = sa;
      }
      if (tb < t1) {
        t1 = tb;
        a1 = a;
        s1 = sb;
      }
    }
    if (t0 > t1 || a0 < 0 || a1 < 0) return std::nullopt;
    RayInterval out;
    out.t_in = t0;
    out.t_out = t1;
    out.n_in[a0] = s0;
    out.n_out[a1] = s1;
    return out;
  }

  std::optional<RayInterval> cylinder_interval(const Vec3& o, const Vec3& d) const {
    const double r = size.x();
    const double h = size.y();
    // Radial slab.
    double tr0 = -std::numeric_limits<double>::infinity();
    double tr1 = std::numeric_limits<double>::infinity();
    const double a = d.x() * d.x() + d.y() * d.y();
    const double b = o.x() * d.x() + o.y() * d.y();
    const double c = o.x() * o.x() + o.y() * o.y() - r * r;
    if (a < 1e-15) {
      if (c > 0) return std::nullopt;
    } else {
      const double disc = b * b - a * c;
      if (disc < 0) return std::nullopt;
      const double s = std::sqrt(disc);
      tr0 = (-b - s) / a;
      tr1 = (-b + s) / a;
    }
    // Axial slab.
    double tz0 = -std::numeric_limits<double>::infinity();
    double tz1 = std::numeric_limits<double>::infinity();
    double sz0 = 0, sz1 = 0;
    if (std::abs(d.z()) < 1e-15) {
      if (std::abs(o.z()) > h) return std::nullopt;
    } else {
      tz0 = (-h - o.z()) / d.z();
      tz1 = (h - o.z()) / d.z();
      sz0 = -1.0;
      sz1 = 1.0;
      if (tz0 > tz1) {
        std::swap(tz0, tz1);
        std::swap(sz0, sz1);
      }
    }
    RayInterval out;
    out.t_in = std::max(tr0, tz0);
    out.t_out = std::min(tr1, tz1);
    if (out.t_in > out.t_out) return std::nullopt;
    auto radial_normal = [&](double t) {
      const Vec3 p = o + t * d;
      return Vec3(p.x() / r, p.y() / r, 0.0);
    };
    out.n_in = (tz0 > tr0) ? Vec3(0, 0, sz0) : radial_normal(out.t_in);
    out.n_out = (tz1 < tr1) ? Vec3(0, 0, sz1) : radial_normal(out.t_out);
    return out;
  }
};

/// Primitive built from an OrientedBox-like description.
inline Primitive box_primitive(const Vec3& center, const Mat3& rotation, const Vec3& half) {
  RigidTransform pose;
  pose.rotation = rotation;
  pose.translation = center;
  return Primitive::box(half, pose);
}

}  // namespace edgegrasp::scene
