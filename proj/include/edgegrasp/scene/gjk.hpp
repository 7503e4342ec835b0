#pragma once

// GJK distance between two convex sets given by support maps. Returns 0 when
// the sets overlap.

#include "edgegrasp/common.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace edgegrasp::scene {

namespace detail {

struct Simplex {
  std::array<Vec3, 4> pts;
  int size = 0;
};

// Closest point to the origin on triangle abc; rewrites `out` to the smallest
// sub-simplex containing it.
inline Vec3 closest_on_triangle(const Vec3& a, const Vec3& b, const Vec3& c, Simplex& out) {
  const Vec3 ab = b - a, ac = c - a, ap = -a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0 && d2 <= 0) {
    out.pts[0] = a;
    out.size = 1;
    return a;
  }
  const Vec3 bp = -b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0 && d4 <= d3) {
    out.pts[0] = b;
    out.size = 1;
    return b;
  }
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) {
    const double v = d1 / (d1 - d3);
    out.pts[0] = a;
    out.pts[1] = b;
    out.size = 2;
    return a + v * ab;
  }
  const Vec3 cp = -c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0 && d5 <= d6) {
    out.pts[0] = c;
    out.size = 1;
    return c;
  }
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) {
    const double w = d2 / (d2 - d6);
    out.pts[0] = a;
    out.pts[1] = c;
    out.size = 2;
    return a + w * ac;
  }
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) {
    const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    out.pts[0] = b;
    out.pts[1] = c;
    out.size = 2;
    return b + w * (c - b);
  }
  const double denom = 1.0 / (va + vb + vc);
  const double v = vb * denom, w = vc * denom;
  out.pts[0] = a;
  out.pts[1] = b;
  out.pts[2] = c;
  out.size = 3;
  return a + ab * v + ac * w;
}

inline Vec3 closest_on_segment(const Vec3& a, const Vec3& b, Simplex& out) {
  const Vec3 ab = b - a;
  const double len2 = ab.squaredNorm();
  const double t = len2 > 0 ? -a.dot(ab) / len2 : 0.0;
  if (t <= 0) {
    out.pts[0] = a;
    out.size = 1;
    return a;
  }
  if (t >= 1) {
    out.pts[0] = b;
    out.size = 1;
    return b;
  }
  out.pts[0] = a;
  out.pts[1] = b;
  out.size = 2;
  return a + t * ab;
}

// Returns false when the origin lies inside the tetrahedron.
inline bool closest_on_tetrahedron(const Simplex& s, Vec3& v, Simplex& out) {
  const Vec3& a = s.pts[0];
  const Vec3& b = s.pts[1];
  const Vec3& c = s.pts[2];
  const Vec3& d = s.pts[3];
  const std::array<std::array<int, 4>, 4> faces{{{0, 1, 2, 3}, {0, 2, 3, 1}, {0, 3, 1, 2}, {1, 3, 2, 0}}};
  const double volume = (b - a).dot((c - a).cross(d - a));
  const double scale = std::max({(b - a).norm(), (c - a).norm(), (d - a).norm()});
  const bool degenerate = std::abs(volume) <= 1e-13 * scale * scale * scale;
  bool any_outside = false;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& f : faces) {
    const Vec3& p0 = s.pts[static_cast<std::size_t>(f[0])];
    const Vec3& p1 = s.pts[static_cast<std::size_t>(f[1])];
    const Vec3& p2 = s.pts[static_cast<std::size_t>(f[2])];
    const Vec3& opp = s.pts[static_cast<std::size_t>(f[3])];
    const Vec3 n = (p1 - p0).cross(p2 - p0);
    const double sign_origin = (-p0).dot(n);
    const double sign_opp = (opp - p0).dot(n);
    const bool outside = degenerate || sign_origin * sign_opp < 0;
    if (!outside) continue;
    any_outside = true;
    Simplex sub;
    const Vec3 q = closest_on_triangle(p0, p1, p2, sub);
    const double d2 = q.squaredNorm();
    if (d2 < best) {
      best = d2;
      v = q;
      out = sub;
    }
  }
  return any_outside;
}

}  // namespace detail

/// Euclidean distance between convex sets A and B (0 when they overlap).
/// `support_a(dir)` / `support_b(dir)` return the farthest point along dir.
template <class SupportA, class SupportB>
double gjk_distance(const SupportA& support_a, const SupportB& support_b, const Vec3& initial_dir = Vec3::UnitX()) {
  auto support = [&](const Vec3& d) -> Vec3 { return support_a(d) - support_b(Vec3(-d)); };
  detail::Simplex simplex;
  Vec3 v = support(initial_dir.squaredNorm() > 0 ? Vec3(-initial_dir) : Vec3(-Vec3::UnitX()));
  simplex.pts[0] = v;
  simplex.size = 1;
  constexpr double kRelTol = 1e-12;
  constexpr double kAbsTol2 = 1e-26;
  for (int iter = 0; iter < 128; ++iter) {
    const double vv = v.squaredNorm();
    if (vv < kAbsTol2) return 0.0;
    const Vec3 w = support(Vec3(-v));
    // Lower bound on the distance has caught up with the upper bound.
    if (vv - v.dot(w) <= kRelTol * vv) return std::sqrt(vv);
    for (int i = 0; i < simplex.size; ++i)
      if ((simplex.pts[static_cast<std::size_t>(i)] - w).squaredNorm() < 1e-28) return std::sqrt(vv);
    simplex.pts[static_cast<std::size_t>(simplex.size++)] = w;
    detail::Simplex reduced;
    switch (simplex.size) {
      case 2: v = detail::closest_on_segment(simplex.pts[0], simplex.pts[1], reduced); break;
      case 3: v = detail::closest_on_triangle(simplex.pts[0], simplex.pts[1], simplex.pts[2], reduced); break;
      case 4:
        if (!detail::closest_on_tetrahedron(simplex, v, reduced)) return 0.0;
        break;
      default: break;
    }
    simplex = reduced;
    if (v.squaredNorm() >= vv) return std::sqrt(vv);  // no progress
  }
  return v.norm();
}

}  // namespace edgegrasp::scene
