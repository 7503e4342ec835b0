#pragma once

// Interface shared by the scalar and vector-neuron edge classifiers.

#include "edgegrasp/nn/config.hpp"
#include "edgegrasp/nn/params.hpp"
#include "edgegrasp/sampler.hpp"

#include <functional>
#include <span>

namespace edgegrasp::nn {

/// Message sources per node: slot 0 is the node itself when self loops are
/// on, then its k nearest neighbors by distance.
struct MessageGraph {
  int slots = 0;
  std::vector<int> source;  // node i, slot t -> source[i * slots + t]

  std::size_t nodes() const { return slots ? source.size() / static_cast<std::size_t>(slots) : 0; }
};

inline MessageGraph message_graph(std::span<const Vec3> points, int k, bool self_loop) {
  MessageGraph g;
  const std::size_t n = points.size();
  if (n == 0) throw data_error("empty region");
  if (n == 1) {
    if (!self_loop) throw data_error("single-point region has no neighbors");
    g.slots = 1;
    g.source = {0};
    return g;
  }
  const KnnGraph knn = knn_graph(points, k);
  const int kk = static_cast<int>(knn.neighbors.front().size());
  g.slots = kk + (self_loop ? 1 : 0);
  g.source.reserve(n * static_cast<std::size_t>(g.slots));
  for (std::size_t i = 0; i < n; ++i) {
    if (self_loop) g.source.push_back(static_cast<int>(i));
    for (Index j : knn.neighbors[i]) g.source.push_back(static_cast<int>(j));
  }
  return g;
}

using Upstream = std::function<Vec(const Vec&)>;

class EdgeNet {
 public:
  explicit EdgeNet(ModelConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }
  virtual ~EdgeNet() = default;

  const ModelConfig& config() const { return cfg_; }
  ModelKind kind() const { return cfg_.kind; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }

  /// Raw classifier outputs, one per contact (local indices into `region`).
  virtual Vec logits(const LocalRegion& region, std::span<const int> contacts) const = 0;

  /// Forward pass, then reverse pass seeded with upstream(logits) as
  /// dLoss/dlogit. Parameter gradients accumulate. Returns the logits.
  virtual Vec accumulate_gradients(const LocalRegion& region, std::span<const int> contacts,
                                   const Upstream& upstream) = 0;

  Vec scores(const LocalRegion& region, std::span<const int> contacts) const {
    Vec z = logits(region, contacts);
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = sigmoid(z[i]);
    return z;
  }

 protected:
  static void check_contacts(const LocalRegion& region, std::span<const int> contacts) {
    for (int c : contacts)
      if (c < 0 || static_cast<std::size_t>(c) >= region.size()) throw data_error("contact index out of range");
    if (region.normals.size() != region.size()) throw data_error("region normals missing");
  }

  ModelConfig cfg_;
  ParamSet params_;
};

}  // namespace edgegrasp::nn
