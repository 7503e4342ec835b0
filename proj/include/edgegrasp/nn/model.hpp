#pragma once

#include "edgegrasp/nn/scalar_net.hpp"
#include "edgegrasp/nn/vn_net.hpp"

#include <memory>

namespace edgegrasp::nn {

inline std::unique_ptr<EdgeNet> make_net(const ModelConfig& cfg, std::uint64_t seed) {
  if (cfg.kind == ModelKind::scalar) return std::make_unique<ScalarEdgeNet>(cfg, seed);
  return std::make_unique<VnEdgeNet>(cfg, seed);
}

/// Scores aligned with batch.edges; edges are grouped by region.
inline std::vector<double> score_batch(const EdgeNet& net, const GraspBatch& batch) {
  std::vector<double> out(batch.edges.size());
  std::size_t e = 0;
  std::vector<int> contacts;
  while (e < batch.edges.size()) {
    const int region = batch.edges[e].region;
    const std::size_t start = e;
    contacts.clear();
    for (; e < batch.edges.size() && batch.edges[e].region == region; ++e) contacts.push_back(batch.edges[e].contact);
    const Vec s = net.scores(batch.regions[static_cast<std::size_t>(region)], contacts);
    for (std::size_t i = 0; i < contacts.size(); ++i) out[start + i] = s[static_cast<Eigen::Index>(i)];
  }
  return out;
}

}  // namespace edgegrasp::nn
