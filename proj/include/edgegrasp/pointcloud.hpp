#pragma once

#include "edgegrasp/common.hpp"
#include "edgegrasp/kdtree.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <tuple>

namespace edgegrasp {

/// Observed point set with optional per-point unit normals and the camera
/// origin it was captured from. Units are meters.
struct PointCloud {
  std::vector<Vec3> points;
  std::vector<Vec3> normals;  // empty, or parallel to points
  std::optional<Vec3> viewpoint;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool has_normals() const { return !normals.empty(); }

  PointCloud transformed(const RigidTransform& g) const {
    PointCloud out;
    out.points.reserve(points.size());
    for (const auto& p : points) out.points.push_back(g.apply(p));
    out.normals.reserve(normals.size());
    for (const auto& n : normals) out.normals.push_back(g.rotate(n));
    if (viewpoint) out.viewpoint = g.apply(*viewpoint);
    return out;
  }

  PointCloud subset(std::span<const Index> indices) const {
    PointCloud out;
    out.viewpoint = viewpoint;
    out.points.reserve(indices.size());
    for (Index i : indices) out.points.push_back(points[static_cast<std::size_t>(i)]);
    if (has_normals()) {
      out.normals.reserve(indices.size());
      for (Index i : indices) out.normals.push_back(normals[static_cast<std::size_t>(i)]);
    }
    return out;
  }

  /// Throws unless normals are absent or unit length and parallel to points.
  void validate() const {
    if (!normals.empty() && normals.size() != points.size())
      throw data_error("normal count does not match point count");
    for (const auto& n : normals)
      if (std::abs(n.norm() - 1.0) > 1e-6) throw data_error("normals must be unit length");
    for (const auto& p : points)
      if (!p.allFinite()) throw data_error("non-finite point coordinate");
  }
};

/// For each point i, its k nearest other points ordered by (distance, index).
struct KnnGraph {
  int k = 0;
  std::vector<std::vector<Index>> neighbors;
};

// ---------------------------------------------------------------------------
// Downsampling

namespace detail {
using VoxelKey = std::array<std::int64_t, 3>;

inline VoxelKey voxel_key(const Vec3& p, double voxel) {
  return {static_cast<std::int64_t>(std::floor(p.x() / voxel)), static_cast<std::int64_t>(std::floor(p.y() / voxel)),
          static_cast<std::int64_t>(std::floor(p.z() / voxel))};
}

// z-major, then y, then x.
struct VoxelOrder {
  bool operator()(const VoxelKey& a, const VoxelKey& b) const {
    return std::tie(a[2], a[1], a[0]) < std::tie(b[2], b[1], b[0]);
  }
};
}  // namespace detail

/// One point per occupied voxel at the centroid of its members.
inline PointCloud voxel_downsample(const PointCloud& cloud, double voxel_size) {
  if (!(voxel_size > 0)) throw usage_error("voxel size must be positive");
  PointCloud out;
  out.viewpoint = cloud.viewpoint;
  if (cloud.empty()) return out;

  struct Acc {
    Vec3 sum = Vec3::Zero();
    Vec3 nsum = Vec3::Zero();
    std::size_t first = 0;
    std::size_t count = 0;
  };
  std::map<detail::VoxelKey, Acc, detail::VoxelOrder> cells;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    auto& acc = cells[detail::voxel_key(cloud.points[i], voxel_size)];
    if (acc.count == 0) acc.first = i;
    acc.sum += cloud.points[i];
    if (cloud.has_normals()) acc.nsum += cloud.normals[i];
    ++acc.count;
  }
  out.points.reserve(cells.size());
  for (const auto& [key, acc] : cells) {
    if (acc.count == 1) {
      out.points.push_back(cloud.points[acc.first]);
      if (cloud.has_normals()) out.normals.push_back(cloud.normals[acc.first]);
      continue;
    }
    out.points.push_back(acc.sum / static_cast<double>(acc.count));
    if (cloud.has_normals()) {
      const double len = acc.nsum.norm();
      // Opposing normals can cancel; fall back to the first member's normal.
      out.normals.push_back(len > 1e-12 ? Vec3(acc.nsum / len) : cloud.normals[acc.first]);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Neighborhoods

inline KnnGraph knn_graph(std::span<const Vec3> points, int k) {
  if (points.size() < 2) throw data_error("knn graph needs at least 2 points");
  if (k < 1) throw usage_error("k must be positive");
  KnnGraph g;
  g.k = k;
  g.neighbors.resize(points.size());
  const int kk = std::min<int>(k, static_cast<int>(points.size()) - 1);
  if (points.size() <= 64) {
    // Small sets: a direct scan beats building a tree.
    std::vector<std::pair<double, Index>> cand;
    cand.reserve(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
      cand.clear();
      for (std::size_t j = 0; j < points.size(); ++j)
        if (j != i) cand.emplace_back((points[j] - points[i]).squaredNorm(), static_cast<Index>(j));
      std::partial_sort(cand.begin(), cand.begin() + kk, cand.end());
      auto& nb = g.neighbors[i];
      nb.reserve(static_cast<std::size_t>(kk));
      for (int t = 0; t < kk; ++t) nb.push_back(cand[static_cast<std::size_t>(t)].second);
    }
    return g;
  }
  const KdTree tree(points);
  for (std::size_t i = 0; i < points.size(); ++i) g.neighbors[i] = tree.knn(points[i], kk, static_cast<Index>(i));
  return g;
}

/// Indices of points within `radius` of `center` (inclusive), ascending.
inline std::vector<Index> radius_crop(std::span<const Vec3> points, const Vec3& center, double radius) {
  if (radius < 0) throw usage_error("radius must be non-negative");
  std::vector<Index> out;
  const double r2 = radius * radius;
  for (std::size_t i = 0; i < points.size(); ++i)
    if ((points[i] - center).squaredNorm() <= r2) out.push_back(static_cast<Index>(i));
  return out;
}

/// Same as radius_crop but answered by a prebuilt tree.
inline std::vector<Index> radius_crop(const KdTree& tree, const Vec3& center, double radius) {
  if (radius < 0) throw usage_error("radius must be non-negative");
  return tree.radius(center, radius);
}

/// Greedy max-min spread subset starting from seed_index.
inline std::vector<Index> farthest_point_sampling(std::span<const Vec3> points, std::size_t m, Index seed_index) {
  const std::size_t n = points.size();
  if (m < 1 || m > n) throw usage_error("farthest point sampling needs 1 <= m <= n");
  if (seed_index < 0 || static_cast<std::size_t>(seed_index) >= n) throw usage_error("seed index out of range");
  std::vector<Index> selected;
  selected.reserve(m);
  std::vector<double> min_d2(n, std::numeric_limits<double>::infinity());
  Index current = seed_index;
  for (std::size_t s = 0; s < m; ++s) {
    selected.push_back(current);
    const Vec3 c = points[static_cast<std::size_t>(current)];
    Index best = -1;
    double best_d2 = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      min_d2[i] = std::min(min_d2[i], (points[i] - c).squaredNorm());
      if (min_d2[i] > best_d2) {
        best_d2 = min_d2[i];
        best = static_cast<Index>(i);
      }
    }
    current = best;
  }
  return selected;
}

// ---------------------------------------------------------------------------
// Normals and noise

/// PCA normals over each point and its k nearest neighbors. With a viewpoint,
/// normals are flipped to face it.
inline PointCloud estimate_normals(const PointCloud& cloud, int k = 16) {
  const std::size_t n = cloud.size();
  if (n < 3) throw data_error("too few points for normal estimation");
  if (k < 2) throw usage_error("normal estimation needs k >= 2");
  const int kk = std::min<int>(k, static_cast<int>(n) - 1);
  const KdTree tree(cloud.points);
  PointCloud out = cloud;
  out.normals.assign(n, Vec3::UnitZ());
  for (std::size_t i = 0; i < n; ++i) {
    auto nb = tree.knn(cloud.points[i], kk, static_cast<Index>(i));
    nb.push_back(static_cast<Index>(i));
    Vec3 centroid = Vec3::Zero();
    for (Index j : nb) centroid += cloud.points[static_cast<std::size_t>(j)];
    centroid /= static_cast<double>(nb.size());
    Mat3 cov = Mat3::Zero();
    for (Index j : nb) {
      const Vec3 d = cloud.points[static_cast<std::size_t>(j)] - centroid;
      cov += d * d.transpose();
    }
    const Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
    Vec3 normal = eig.eigenvectors().col(0).normalized();
    if (cloud.viewpoint && normal.dot(*cloud.viewpoint - cloud.points[i]) < 0) normal = -normal;
    out.normals[i] = normal;
  }
  return out;
}

/// Gaussian displacement of each point along its viewing ray (or +z without
/// a viewpoint). Normals are left untouched.
inline PointCloud add_noise(const PointCloud& cloud, double sigma, Rng& rng) {
  if (sigma < 0) throw usage_error("noise sigma must be non-negative");
  PointCloud out = cloud;
  if (sigma == 0) return out;
  std::normal_distribution<double> normal(0.0, sigma);
  for (auto& p : out.points) {
    Vec3 dir = Vec3::UnitZ();
    if (cloud.viewpoint) {
      const Vec3 ray = p - *cloud.viewpoint;
      if (ray.norm() > 1e-12) dir = ray.normalized();
    }
    p += normal(rng) * dir;
  }
  return out;
}

}  // namespace edgegrasp
