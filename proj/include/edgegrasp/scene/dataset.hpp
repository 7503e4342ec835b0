#pragma once

// Labeled edge datasets rendered from synthetic scenes.
//
// File layout (JSON-lines): the first line is a header object
//   {"format": "edgegrasp-dataset", "version": 1, "gripper": ..., ...}
// followed by one object per scene
//   {"scene": s, "split": "train"|"val", "kind": ..., "objects": n,
//    "regions": [{"approach_index": i, "approach_point": [x, y, z],
//                 "point_indices": [...], "points": [x0, y0, z0, x1, ...],
//                 "normals": [...], "contacts": [...], "labels": [0|1, ...],
//                 "reasons": ["none", "collision", ...]}, ...]}
// Points are centered on the approach point; contacts index into the region.

#include "edgegrasp/pipeline.hpp"
#include "edgegrasp/scene/oracle.hpp"
#include "edgegrasp/scene/render.hpp"

#include <json.hpp>

#include <istream>
#include <ostream>

namespace edgegrasp::scene {

inline constexpr int kDatasetVersion = 1;

struct DatasetConfig {
  int scenes = 20;
  std::string kind = "pile";  // packed, pile or mixed (alternating)
  int min_objects = 3;
  int max_objects = 6;
  PipelineConfig pipeline;
  OracleConfig oracle;
  CameraRanges camera;
  double noise_sigma = 0.001;
  double val_fraction = 0.15;
  std::uint64_t seed = 0;

  void validate() const {
    if (scenes < 1) throw usage_error("scene count must be positive");
    if (kind != "packed" && kind != "pile" && kind != "mixed")
      throw usage_error("scene kind must be 'packed', 'pile' or 'mixed', got '" + kind + "'");
    if (min_objects < 1 || max_objects < min_objects) throw usage_error("object count range is invalid");
    if (!(val_fraction >= 0 && val_fraction < 1)) throw usage_error("validation fraction must lie in [0, 1)");
    if (!(oracle.friction_mu > 0)) throw usage_error("friction coefficient must be positive");
    if (noise_sigma < 0) throw usage_error("noise sigma must be non-negative");
    pipeline.validate();
  }

  SceneKind kind_of(int scene_index) const {
    if (kind == "mixed") return scene_index % 2 == 0 ? SceneKind::packed : SceneKind::pile;
    return parse_kind(kind);
  }
};

struct RegionRecord {
  LocalRegion region;
  Vec3 approach_point = Vec3::Zero();
  std::vector<int> contacts;
  std::vector<int> labels;
  std::vector<FailureReason> reasons;
};

struct SceneRecord {
  int scene = 0;
  bool validation = false;
  SceneKind kind = SceneKind::pile;
  int objects = 0;
  std::vector<RegionRecord> regions;

  std::size_t edge_count() const {
    std::size_t n = 0;
    for (const auto& r : regions) n += r.contacts.size();
    return n;
  }
};

struct LabeledDataset {
  nlohmann::json header;
  std::vector<SceneRecord> scenes;

  std::size_t edge_count() const {
    std::size_t n = 0;
    for (const auto& s : scenes) n += s.edge_count();
    return n;
  }
  std::size_t positive_count() const {
    std::size_t n = 0;
    for (const auto& s : scenes)
      for (const auto& r : s.regions)
        for (int y : r.labels) n += static_cast<std::size_t>(y);
    return n;
  }
};

/// Validation flags per scene: round(fraction * n) scenes chosen by a seeded
/// shuffle, keeping at least one training scene.
inline std::vector<bool> split_scenes(int n, double val_fraction, std::uint64_t seed) {
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  Rng rng = derive_rng(seed, 0xffffffffull);
  std::shuffle(order.begin(), order.end(), rng);
  const int val = std::min(n - 1, static_cast<int>(std::lround(val_fraction * n)));
  std::vector<bool> flags(static_cast<std::size_t>(n), false);
  for (int i = 0; i < val; ++i) flags[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = true;
  return flags;
}

/// Render, sample and label one scene. A view without any buildable region
/// yields a record without regions.
inline SceneRecord build_scene_record(const DatasetConfig& cfg, int index) {
  Rng rng = derive_rng(cfg.seed, static_cast<std::uint64_t>(index));
  SceneRecord rec;
  rec.scene = index;
  rec.kind = cfg.kind_of(index);
  std::uniform_int_distribution<int> count(cfg.min_objects, cfg.max_objects);
  rec.objects = count(rng);
  const Scene scene = generate_scene(rec.kind, rec.objects, rng);
  const Camera cam = random_camera(rng, cfg.camera);
  RenderOptions ropts;
  ropts.noise_sigma = cfg.noise_sigma;
  const PointCloud cloud = prepare_cloud(render_view(scene, cam, rng, ropts), cfg.pipeline);
  GraspBatch batch;
  try {
    batch = sample_edges(cloud, cfg.pipeline, rng, scene.table_z());
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::data) throw;
    return rec;
  }
  std::vector<int> slot(batch.regions.size(), -1);
  for (const auto& e : batch.edges) {
    const auto& region = batch.regions[static_cast<std::size_t>(e.region)];
    int& s = slot[static_cast<std::size_t>(e.region)];
    if (s < 0) {
      s = static_cast<int>(rec.regions.size());
      RegionRecord rr;
      rr.region = region;
      rr.approach_point = cloud.points[static_cast<std::size_t>(region.approach_index)];
      rec.regions.push_back(std::move(rr));
    }
    const auto grasp = edge_grasp(cloud, region, e.contact, cfg.pipeline.gripper);
    const auto label = label_grasp(scene, grasp, cfg.pipeline.gripper, cfg.oracle);
    auto& rr = rec.regions[static_cast<std::size_t>(s)];
    rr.contacts.push_back(e.contact);
    rr.labels.push_back(label.success ? 1 : 0);
    rr.reasons.push_back(label.failure_reason);
  }
  return rec;
}

inline nlohmann::json dataset_header(const DatasetConfig& cfg, const nlohmann::json& run_config) {
  return {{"format", "edgegrasp-dataset"},
          {"version", kDatasetVersion},
          {"scenes", cfg.scenes},
          {"kind", cfg.kind},
          {"objects", {cfg.min_objects, cfg.max_objects}},
          {"pipeline", cfg.pipeline.to_json()},
          {"friction_mu", cfg.oracle.friction_mu},
          {"noise_sigma", cfg.noise_sigma},
          {"val_fraction", cfg.val_fraction},
          {"seed", cfg.seed},
          {"config", run_config}};
}

inline LabeledDataset build_dataset(const DatasetConfig& cfg, const nlohmann::json& run_config = nlohmann::json::object()) {
  cfg.validate();
  LabeledDataset ds;
  ds.header = dataset_header(cfg, run_config);
  const auto val = split_scenes(cfg.scenes, cfg.val_fraction, cfg.seed);
  for (int s = 0; s < cfg.scenes; ++s) {
    ds.scenes.push_back(build_scene_record(cfg, s));
    ds.scenes.back().validation = val[static_cast<std::size_t>(s)];
  }
  return ds;
}

namespace detail {

inline nlohmann::json flatten(const std::vector<Vec3>& v) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& p : v) {
    out.push_back(p.x());
    out.push_back(p.y());
    out.push_back(p.z());
  }
  return out;
}

inline std::vector<Vec3> unflatten(const nlohmann::json& j) {
  const auto flat = j.get<std::vector<double>>();
  if (flat.size() % 3 != 0) throw data_error("coordinate array length is not a multiple of 3");
  std::vector<Vec3> out;
  for (std::size_t i = 0; i < flat.size(); i += 3) out.emplace_back(flat[i], flat[i + 1], flat[i + 2]);
  return out;
}

}  // namespace detail

inline nlohmann::json scene_to_json(const SceneRecord& s) {
  nlohmann::json regions = nlohmann::json::array();
  for (const auto& r : s.regions) {
    nlohmann::json reasons = nlohmann::json::array();
    for (auto why : r.reasons) reasons.push_back(reason_name(why));
    regions.push_back({{"approach_index", r.region.approach_index},
                       {"approach_point", {r.approach_point.x(), r.approach_point.y(), r.approach_point.z()}},
                       {"point_indices", r.region.point_indices},
                       {"points", detail::flatten(r.region.centered_points)},
                       {"normals", detail::flatten(r.region.normals)},
                       {"contacts", r.contacts},
                       {"labels", r.labels},
                       {"reasons", reasons}});
  }
  return {{"scene", s.scene},
          {"split", s.validation ? "val" : "train"},
          {"kind", kind_name(s.kind)},
          {"objects", s.objects},
          {"regions", regions}};
}

inline SceneRecord scene_from_json(const nlohmann::json& j) {
  try {
    SceneRecord s;
    s.scene = j.at("scene").get<int>();
    const auto split = j.at("split").get<std::string>();
    if (split != "train" && split != "val") throw data_error("split must be 'train' or 'val'");
    s.validation = split == "val";
    s.kind = parse_kind(j.at("kind").get<std::string>());
    s.objects = j.at("objects").get<int>();
    for (const auto& jr : j.at("regions")) {
      RegionRecord r;
      r.region.approach_index = jr.at("approach_index").get<Index>();
      const auto ap = jr.at("approach_point").get<std::vector<double>>();
      if (ap.size() != 3) throw data_error("approach point must have 3 coordinates");
      r.approach_point = Vec3(ap[0], ap[1], ap[2]);
      r.region.point_indices = jr.at("point_indices").get<std::vector<Index>>();
      r.region.centered_points = detail::unflatten(jr.at("points"));
      r.region.normals = detail::unflatten(jr.at("normals"));
      r.contacts = jr.at("contacts").get<std::vector<int>>();
      r.labels = jr.at("labels").get<std::vector<int>>();
      for (const auto& why : jr.at("reasons")) r.reasons.push_back(parse_reason(why.get<std::string>()));
      const std::size_t n = r.region.centered_points.size();
      if (n == 0 || r.region.normals.size() != n || r.region.point_indices.size() != n)
        throw data_error("region arrays have inconsistent lengths");
      if (r.labels.size() != r.contacts.size() || r.reasons.size() != r.contacts.size())
        throw data_error("every edge needs exactly one label");
      for (std::size_t e = 0; e < r.contacts.size(); ++e) {
        if (r.contacts[e] < 1 || static_cast<std::size_t>(r.contacts[e]) >= n)
          throw data_error("contact index out of range");
        if (r.labels[e] != 0 && r.labels[e] != 1) throw data_error("labels must be 0 or 1");
      }
      r.region.contact_candidates = r.contacts;
      std::sort(r.region.contact_candidates.begin(), r.region.contact_candidates.end());
      r.region.contact_candidates.erase(
          std::unique(r.region.contact_candidates.begin(), r.region.contact_candidates.end()),
          r.region.contact_candidates.end());
      s.regions.push_back(std::move(r));
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw data_error(std::string("malformed scene record: ") + e.what());
  }
}

inline void write_dataset(std::ostream& os, const LabeledDataset& ds) {
  os << ds.header.dump() << '\n';
  for (const auto& s : ds.scenes) os << scene_to_json(s).dump() << '\n';
  if (!os) throw data_error("failed to write dataset");
}

inline LabeledDataset read_dataset(std::istream& is) {
  LabeledDataset ds;
  std::string line;
  if (!std::getline(is, line)) throw data_error("dataset file is empty");
  try {
    ds.header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw data_error(std::string("malformed dataset header: ") + e.what());
  }
  if (ds.header.value("format", "") != "edgegrasp-dataset") throw data_error("not an edgegrasp dataset");
  if (ds.header.value("version", -1) != kDatasetVersion) throw data_error("unsupported dataset version");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw data_error(std::string("malformed dataset line: ") + e.what());
    }
    ds.scenes.push_back(scene_from_json(j));
  }
  return ds;
}

}  // namespace edgegrasp::scene
