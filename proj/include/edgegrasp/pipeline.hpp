#pragma once

// Raw cloud to scored edge grasps: downsample, normals, approach sampling,
// region building, optional table filtering, scoring.

#include "edgegrasp/nn/model.hpp"
#include "edgegrasp/pointcloud.hpp"
#include "edgegrasp/sampler.hpp"

#include <json.hpp>

namespace edgegrasp {

struct PipelineConfig {
  GripperSpec gripper;
  double voxel = 0.004;
  int normal_k = 16;
  std::size_t approach_points = 32;
  std::size_t max_edges = 2000;
  ApproachStrategy strategy = ApproachStrategy::fps;
  bool normals_first = false;  // estimate normals on the raw cloud, then downsample

  void validate() const {
    gripper.validate();
    if (!(voxel > 0)) throw usage_error("voxel size must be positive");
    if (normal_k < 2) throw usage_error("normal neighborhood must be at least 2");
    if (approach_points == 0) throw usage_error("approach point count must be positive");
    if (max_edges == 0) throw usage_error("edge count must be positive");
  }

  nlohmann::json to_json() const {
    return {{"gripper_width", gripper.width},
            {"gripper_depth", gripper.depth},
            {"finger_thickness", gripper.finger_thickness},
            {"palm_halfwidth", gripper.palm_halfwidth},
            {"voxel", voxel},
            {"normal_k", normal_k},
            {"approach_points", approach_points},
            {"max_edges", max_edges},
            {"strategy", strategy == ApproachStrategy::fps ? "fps" : "uniform"},
            {"normals_first", normals_first}};
  }
};

/// Downsampled cloud with normals. Normals are re-estimated when a viewpoint
/// orients them; otherwise input normals are kept.
inline PointCloud prepare_cloud(const PointCloud& raw, const PipelineConfig& cfg) {
  if (raw.empty()) throw data_error("point cloud is empty");
  if (!raw.has_normals() && !raw.viewpoint) throw data_error("cloud has neither normals nor a viewpoint");
  if (cfg.normals_first && raw.viewpoint) return voxel_downsample(estimate_normals(raw, cfg.normal_k), cfg.voxel);
  PointCloud cloud = voxel_downsample(raw, cfg.voxel);
  if (cloud.viewpoint) cloud = estimate_normals(cloud, cfg.normal_k);
  return cloud;
}

/// Drops edges whose gripper would reach the table plane, then regions left
/// without edges.
inline GraspBatch table_filter(const PointCloud& cloud, GraspBatch batch, const GripperSpec& gripper, double table_z) {
  GraspBatch out;
  std::vector<int> remap(batch.regions.size(), -1);
  for (const auto& e : batch.edges) {
    const auto& region = batch.regions[static_cast<std::size_t>(e.region)];
    if (!table_collision_filter(edge_grasp(cloud, region, e.contact, gripper), gripper, table_z)) continue;
    int& slot = remap[static_cast<std::size_t>(e.region)];
    if (slot < 0) {
      slot = static_cast<int>(out.regions.size());
      out.regions.push_back(region);
    }
    out.edges.push_back({slot, e.contact});
  }
  return out;
}

/// Candidate edges for a prepared cloud. Approach points are sampled from
/// the whole cloud; the table filter applies when `table_z` is given.
inline GraspBatch sample_edges(const PointCloud& cloud, const PipelineConfig& cfg, Rng& rng,
                               std::optional<double> table_z = std::nullopt) {
  const std::size_t m = std::min(cfg.approach_points, cloud.size());
  const auto approach = sample_approach_points(cloud, m, cfg.strategy, rng);
  GraspBatch batch = build_batch(cloud, approach, cfg.max_edges, rng, cfg.gripper);
  if (table_z) batch = table_filter(cloud, std::move(batch), cfg.gripper, *table_z);
  return batch;
}

/// World-frame grasps aligned with batch.edges.
inline std::vector<EdgeGrasp> batch_grasps(const PointCloud& cloud, const GraspBatch& batch, const GripperSpec& gripper) {
  std::vector<EdgeGrasp> out;
  out.reserve(batch.edges.size());
  for (const auto& e : batch.edges)
    out.push_back(edge_grasp(cloud, batch.regions[static_cast<std::size_t>(e.region)], e.contact, gripper));
  return out;
}

/// Scored grasps sorted by descending score; ties keep batch order.
inline std::vector<GraspScorePose> rank_grasps(const std::vector<EdgeGrasp>& grasps, const std::vector<double>& scores) {
  if (grasps.size() != scores.size()) throw usage_error("score count does not match grasp count");
  std::vector<GraspScorePose> out;
  out.reserve(grasps.size());
  for (std::size_t i = 0; i < grasps.size(); ++i) out.push_back({grasps[i], scores[i]});
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.score > b.score; });
  return out;
}

}  // namespace edgegrasp
