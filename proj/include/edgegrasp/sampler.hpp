#pragma once

// Approach-point sampling, approach-centered local regions, edge batches and
// final grasp selection.

#include "edgegrasp/grasp_geometry.hpp"
#include "edgegrasp/pointcloud.hpp"

#include <algorithm>
#include <numeric>

namespace edgegrasp {

enum class ApproachStrategy { uniform, fps };

inline ApproachStrategy parse_strategy(const std::string& s) {
  if (s == "uniform") return ApproachStrategy::uniform;
  if (s == "fps") return ApproachStrategy::fps;
  throw usage_error("approach strategy must be 'uniform' or 'fps'");
}

/// m distinct indices drawn from `candidates` (all points when empty).
inline std::vector<Index> sample_approach_points(const PointCloud& cloud, std::size_t m, ApproachStrategy strategy,
                                                 Rng& rng, std::span<const Index> candidates = {}) {
  std::vector<Index> pool;
  if (candidates.empty()) {
    pool.resize(cloud.size());
    std::iota(pool.begin(), pool.end(), Index{0});
  } else {
    pool.assign(candidates.begin(), candidates.end());
  }
  if (m > pool.size()) throw usage_error("cannot sample more approach points than candidates");
  if (m == 0) return {};
  if (strategy == ApproachStrategy::uniform) {
    // Partial Fisher-Yates.
    for (std::size_t i = 0; i < m; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
      std::swap(pool[i], pool[pick(rng)]);
    }
    pool.resize(m);
    return pool;
  }
  std::vector<Vec3> pts;
  pts.reserve(pool.size());
  for (Index i : pool) pts.push_back(cloud.points[static_cast<std::size_t>(i)]);
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  const auto local = farthest_point_sampling(pts, m, static_cast<Index>(pick(rng)));
  std::vector<Index> out;
  out.reserve(m);
  for (Index l : local) out.push_back(pool[static_cast<std::size_t>(l)]);
  return out;
}

/// Ball-cropped neighborhood of one approach point, translated so the
/// approach point is the origin. Local index 0 is the approach point.
struct LocalRegion {
  Index approach_index = -1;
  std::vector<Index> point_indices;
  std::vector<Vec3> centered_points;
  std::vector<Vec3> normals;
  std::vector<int> contact_candidates;

  std::size_t size() const { return centered_points.size(); }

  LocalRegion rotated(const Mat3& r) const {
    LocalRegion out = *this;
    for (auto& p : out.centered_points) p = r * p;
    for (auto& n : out.normals) n = r * n;
    return out;
  }
};

struct RegionOptions {
  bool check_delta_range = true;
  std::size_t min_points = 4;
};

inline std::optional<LocalRegion> build_region(const PointCloud& cloud, Index approach_index,
                                               const GripperSpec& gripper, const RegionOptions& opts = {},
                                               const KdTree* tree = nullptr) {
  if (!cloud.has_normals()) throw data_error("region building needs normals");
  if (approach_index < 0 || static_cast<std::size_t>(approach_index) >= cloud.size())
    throw usage_error("approach index out of range");
  const Vec3 pa = cloud.points[static_cast<std::size_t>(approach_index)];
  const double radius = gripper.width / 2;
  std::vector<Index> idx = tree ? radius_crop(*tree, pa, radius) : radius_crop(cloud.points, pa, radius);
  if (idx.size() < opts.min_points) return std::nullopt;

  LocalRegion r;
  r.approach_index = approach_index;
  r.point_indices.reserve(idx.size());
  r.point_indices.push_back(approach_index);
  for (Index i : idx)
    if (i != approach_index) r.point_indices.push_back(i);
  r.centered_points.reserve(r.point_indices.size());
  r.normals.reserve(r.point_indices.size());
  for (Index i : r.point_indices) {
    r.centered_points.push_back(cloud.points[static_cast<std::size_t>(i)] - pa);
    r.normals.push_back(cloud.normals[static_cast<std::size_t>(i)]);
  }
  r.centered_points[0] = Vec3::Zero();

  EdgeFrameOptions frame_opts;
  frame_opts.check_delta_range = opts.check_delta_range;
  for (std::size_t l = 1; l < r.size(); ++l) {
    const auto c = static_cast<std::size_t>(r.point_indices[l]);
    if (compute_edge_frame(pa, cloud.points[c], cloud.normals[c], gripper, frame_opts))
      r.contact_candidates.push_back(static_cast<int>(l));
  }
  return r;
}

struct BatchEdge {
  int region = 0;
  int contact = 0;  // local index into the region
};

struct GraspBatch {
  std::vector<LocalRegion> regions;
  std::vector<BatchEdge> edges;  // grouped by region, ascending
};

/// Regions for every buildable approach point plus their candidate edges,
/// capped at max_edges by uniform subsampling. Regions left without edges
/// are dropped.
inline GraspBatch build_batch(const PointCloud& cloud, std::span<const Index> approach_indices, std::size_t max_edges,
                              Rng& rng, const GripperSpec& gripper, const RegionOptions& opts = {}) {
  const KdTree tree(cloud.points);
  std::vector<LocalRegion> regions;
  for (Index a : approach_indices)
    if (auto r = build_region(cloud, a, gripper, opts, &tree)) regions.push_back(std::move(*r));
  if (regions.empty()) throw data_error("no valid approach points");

  std::vector<BatchEdge> all;
  for (std::size_t ri = 0; ri < regions.size(); ++ri)
    for (int c : regions[ri].contact_candidates) all.push_back({static_cast<int>(ri), c});
  if (all.size() > max_edges) {
    std::vector<std::size_t> order(all.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = 0; i < max_edges; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, order.size() - 1);
      std::swap(order[i], order[pick(rng)]);
    }
    order.resize(max_edges);
    std::sort(order.begin(), order.end());
    std::vector<BatchEdge> kept;
    kept.reserve(max_edges);
    for (std::size_t i : order) kept.push_back(all[i]);
    all = std::move(kept);
  }

  GraspBatch batch;
  std::vector<int> remap(regions.size(), -1);
  for (const auto& e : all) {
    if (remap[static_cast<std::size_t>(e.region)] < 0) {
      remap[static_cast<std::size_t>(e.region)] = static_cast<int>(batch.regions.size());
      batch.regions.push_back(std::move(regions[static_cast<std::size_t>(e.region)]));
    }
    batch.edges.push_back({remap[static_cast<std::size_t>(e.region)], e.contact});
  }
  return batch;
}

/// World-frame grasp for one batch edge.
inline EdgeGrasp edge_grasp(const PointCloud& cloud, const LocalRegion& region, int contact_local,
                            const GripperSpec& gripper) {
  const auto a = static_cast<std::size_t>(region.approach_index);
  const auto c = static_cast<std::size_t>(region.point_indices[static_cast<std::size_t>(contact_local)]);
  auto g = compute_edge_frame(cloud.points[a], cloud.points[c], cloud.normals[c], gripper);
  if (!g) throw data_error("edge no longer defines a grasp");
  g->approach_index = region.approach_index;
  g->contact_index = static_cast<Index>(c);
  return *g;
}

enum class SelectPolicy { highest_z, top_k };

inline SelectPolicy parse_policy(const std::string& s) {
  if (s == "highest-z" || s == "highest_z") return SelectPolicy::highest_z;
  if (s == "top-k" || s == "top_k") return SelectPolicy::top_k;
  throw usage_error("policy must be 'highest-z' or 'top-k'");
}

/// Grasps scoring at least `threshold`; highest_z keeps the single grasp with
/// the largest center height, top_k the k best scores. Ties resolve by higher
/// score, then earlier input position.
inline std::vector<GraspScorePose> select_grasps(std::span<const GraspScorePose> scored, double threshold,
                                                 SelectPolicy policy, std::size_t k = 1) {
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < scored.size(); ++i)
    if (scored[i].score >= threshold) keep.push_back(i);
  std::vector<GraspScorePose> out;
  if (keep.empty()) return out;
  if (policy == SelectPolicy::highest_z) {
    std::size_t best = keep.front();
    for (std::size_t i : keep) {
      const auto& a = scored[i];
      const auto& b = scored[best];
      if (a.grasp.center.z() > b.grasp.center.z() ||
          (a.grasp.center.z() == b.grasp.center.z() && a.score > b.score))
        best = i;
    }
    out.push_back(scored[best]);
    return out;
  }
  std::stable_sort(keep.begin(), keep.end(), [&](std::size_t a, std::size_t b) { return scored[a].score > scored[b].score; });
  keep.resize(std::min(k, keep.size()));
  for (std::size_t i : keep) out.push_back(scored[i]);
  return out;
}

}  // namespace edgegrasp
