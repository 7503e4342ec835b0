#pragma once

// Pinhole ray casting of a scene into a single-view point cloud with exact
// surface normals.

#include "edgegrasp/pointcloud.hpp"
#include "edgegrasp/scene/scene.hpp"

#include <cmath>
#include <numbers>

namespace edgegrasp::scene {

struct Camera {
  Vec3 position = Vec3(0, 0, 0.6);
  Vec3 target = Vec3(0, 0, 0.05);
  Vec3 up_hint = Vec3::UnitZ();
  double fov_deg = 60.0;
  int resolution = 120;

  /// Columns: right, down, forward.
  Mat3 basis() const {
    const Vec3 forward = (target - position).normalized();
    Vec3 hint = up_hint;
    if (std::abs(forward.dot(hint)) > 0.999) hint = Vec3::UnitY();
    const Vec3 right = forward.cross(hint).normalized();
    const Vec3 down = forward.cross(right);
    Mat3 b;
    b.col(0) = right;
    b.col(1) = down;
    b.col(2) = forward;
    return b;
  }

  Vec3 ray(int u, int v) const {
    const Mat3 b = basis();
    const double f = std::tan(fov_deg * std::numbers::pi / 360.0);
    const double x = (2.0 * (u + 0.5) / resolution - 1.0) * f;
    const double y = (2.0 * (v + 0.5) / resolution - 1.0) * f;
    return (b.col(2) + x * b.col(0) + y * b.col(1)).normalized();
  }
};

struct CameraRanges {
  double min_distance = 0.5, max_distance = 0.8;
  double min_elevation_deg = 20.0, max_elevation_deg = 80.0;
  Vec3 target = Vec3(0, 0, 0.05);
  double fov_deg = 60.0;
  int resolution = 120;
};

/// Camera on a random sphere cap above the table, looking at the target.
inline Camera random_camera(Rng& rng, const CameraRanges& r = {}) {
  std::uniform_real_distribution<double> dist(r.min_distance, r.max_distance);
  std::uniform_real_distribution<double> elev(r.min_elevation_deg, r.max_elevation_deg);
  std::uniform_real_distribution<double> azim(0.0, 2.0 * std::numbers::pi);
  const double d = dist(rng);
  const double e = elev(rng) * std::numbers::pi / 180.0;
  const double a = azim(rng);
  Camera cam;
  cam.target = r.target;
  cam.position = r.target + d * Vec3(std::cos(e) * std::cos(a), std::cos(e) * std::sin(a), std::sin(e));
  cam.fov_deg = r.fov_deg;
  cam.resolution = r.resolution;
  return cam;
}

struct RayHit {
  double t = 0.0;
  Vec3 normal = Vec3::Zero();
  int primitive = -1;  // -1 marks the table
};

/// Nearest forward hit of a ray against the scene (table optional).
inline std::optional<RayHit> cast_ray(const Scene& s, const Vec3& origin, const Vec3& dir, bool include_table) {
  std::optional<RayHit> best;
  for (std::size_t i = 0; i < s.primitives.size(); ++i) {
    const auto iv = s.primitives[i].ray_interval(origin, dir);
    if (!iv || iv->t_in <= 0.0) continue;
    if (!best || iv->t_in < best->t) best = RayHit{iv->t_in, iv->n_in, static_cast<int>(i)};
  }
  if (include_table) {
    const double denom = s.table_normal.dot(dir);
    if (denom < -1e-12) {
      const double t = (s.table_offset - s.table_normal.dot(origin)) / denom;
      if (t > 0 && (!best || t < best->t)) best = RayHit{t, s.table_normal, -1};
    }
  }
  return best;
}

struct RenderOptions {
  double noise_sigma = 0.001;
  bool include_table = false;  // table hits still occlude when false
};

inline PointCloud render_view(const Scene& s, const Camera& cam, Rng& rng, const RenderOptions& opts = {}) {
  PointCloud cloud;
  cloud.viewpoint = cam.position;
  for (int v = 0; v < cam.resolution; ++v) {
    for (int u = 0; u < cam.resolution; ++u) {
      const Vec3 dir = cam.ray(u, v);
      const auto hit = cast_ray(s, cam.position, dir, true);
      if (!hit || (hit->primitive < 0 && !opts.include_table)) continue;
      const Vec3 p = cam.position + hit->t * dir;
      Vec3 n = hit->normal;
      if (n.dot(cam.position - p) < 0) n = -n;
      cloud.points.push_back(p);
      cloud.normals.push_back(n);
    }
  }
  if (cloud.empty()) throw data_error("empty view");
  return add_noise(cloud, opts.noise_sigma, rng);
}

}  // namespace edgegrasp::scene
