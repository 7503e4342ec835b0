#pragma once

// Independent brute-force references for the point-cloud routines. They share
// no code with the library beyond plain Eigen vectors.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <tuple>
#include <vector>

namespace oracle {

using V3 = Eigen::Vector3d;

inline std::vector<V3> random_points(std::size_t n, double half_extent, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-half_extent, half_extent);
  std::vector<V3> pts(n);
  for (auto& p : pts) p = V3(u(rng), u(rng), u(rng));
  return pts;
}

/// All-pairs k nearest neighbors, ties by lower index.
inline std::vector<std::vector<long>> brute_knn(const std::vector<V3>& pts, int k) {
  std::vector<std::vector<long>> out(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    std::vector<std::pair<double, long>> all;
    for (std::size_t j = 0; j < pts.size(); ++j) {
      if (j == i) continue;
      const V3 d = pts[j] - pts[i];
      all.emplace_back(d.squaredNorm(), static_cast<long>(j));
    }
    std::sort(all.begin(), all.end());
    const std::size_t kk = std::min<std::size_t>(static_cast<std::size_t>(k), all.size());
    for (std::size_t t = 0; t < kk; ++t) out[i].push_back(all[t].second);
  }
  return out;
}

/// Max-min greedy selection recomputing every distance from scratch.
inline std::vector<long> brute_fps(const std::vector<V3>& pts, std::size_t m, long seed) {
  std::vector<long> sel{seed};
  while (sel.size() < m) {
    long best = -1;
    double best_d = -1;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      double dmin = std::numeric_limits<double>::infinity();
      for (long s : sel) dmin = std::min(dmin, (pts[i] - pts[static_cast<std::size_t>(s)]).squaredNorm());
      if (dmin > best_d) {
        best_d = dmin;
        best = static_cast<long>(i);
      }
    }
    sel.push_back(best);
  }
  return sel;
}

/// Number of distinct occupied voxels via a set of integer triples.
inline std::size_t voxel_occupancy(const std::vector<V3>& pts, double voxel) {
  std::set<std::tuple<long, long, long>> cells;
  for (const auto& p : pts)
    cells.emplace(static_cast<long>(std::floor(p.x() / voxel)), static_cast<long>(std::floor(p.y() / voxel)),
                  static_cast<long>(std::floor(p.z() / voxel)));
  return cells.size();
}

inline std::vector<long> linear_crop(const std::vector<V3>& pts, const V3& c, double r) {
  std::vector<long> out;
  for (std::size_t i = 0; i < pts.size(); ++i)
    if ((pts[i] - c).norm() <= r) out.push_back(static_cast<long>(i));
  return out;
}

}  // namespace oracle
