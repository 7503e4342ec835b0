#pragma once

// Static 3-D kd-tree with exact k-nearest and radius queries.
//
// Every query is exact: nodes are pruned only when their box lies strictly
// farther than the current bound, so equidistant candidates are always
// visited and ties resolve by ascending point index.

#include "edgegrasp/common.hpp"

#include <algorithm>
#include <numeric>
#include <queue>
#include <span>
#include <utility>

namespace edgegrasp {

class KdTree {
 public:
  KdTree() = default;

  explicit KdTree(std::span<const Vec3> points, int leaf_size = 12) : points_(points.begin(), points.end()), leaf_size_(leaf_size) {
    order_.resize(points_.size());
    std::iota(order_.begin(), order_.end(), 0);
    if (!points_.empty()) {
      nodes_.reserve(2 * points_.size() / std::max(1, leaf_size_) + 2);
      build(0, static_cast<int>(order_.size()));
    }
  }

  std::size_t size() const { return points_.size(); }

  /// Up to k nearest indices of `query`, sorted by (squared distance, index).
  /// `exclude` removes one index (typically the query point itself).
  std::vector<Index> knn(const Vec3& query, int k, Index exclude = -1) const {
    std::vector<Index> out;
    if (k <= 0 || nodes_.empty()) return out;
    Heap heap;
    search_knn(0, query, static_cast<std::size_t>(k), exclude, heap);
    std::vector<Entry> entries;
    entries.reserve(heap.size());
    while (!heap.empty()) {
      entries.push_back(heap.top());
      heap.pop();
    }
    std::sort(entries.begin(), entries.end());
    out.reserve(entries.size());
    for (const auto& e : entries) out.push_back(e.second);
    return out;
  }

  /// All indices with squared distance <= radius^2, ascending index order.
  std::vector<Index> radius(const Vec3& query, double radius) const {
    std::vector<Index> out;
    if (nodes_.empty() || radius < 0) return out;
    search_radius(0, query, radius * radius, out);
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  using Entry = std::pair<double, Index>;
  // Max-heap by (distance, index): the top is the worst kept candidate.
  using Heap = std::priority_queue<Entry>;

  struct Node {
    Eigen::AlignedBox3d box;
    int begin = 0;
    int end = 0;
    int left = -1;
    int right = -1;
  };

  int build(int begin, int end) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back(Node{});
    Eigen::AlignedBox3d box;
    for (int i = begin; i < end; ++i) box.extend(points_[static_cast<std::size_t>(order_[static_cast<std::size_t>(i)])]);
    nodes_[static_cast<std::size_t>(id)].box = box;
    nodes_[static_cast<std::size_t>(id)].begin = begin;
    nodes_[static_cast<std::size_t>(id)].end = end;
    if (end - begin > leaf_size_) {
      int axis = 0;
      box.sizes().maxCoeff(&axis);
      const int mid = begin + (end - begin) / 2;
      std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end, [&](Index a, Index b) {
        const double va = points_[static_cast<std::size_t>(a)][axis];
        const double vb = points_[static_cast<std::size_t>(b)][axis];
        return va < vb || (va == vb && a < b);
      });
      const int left = build(begin, mid);
      const int right = build(mid, end);
      nodes_[static_cast<std::size_t>(id)].left = left;
      nodes_[static_cast<std::size_t>(id)].right = right;
    }
    return id;
  }

  static double box_sq_distance(const Eigen::AlignedBox3d& box, const Vec3& q) {
    double d2 = 0.0;
    for (int a = 0; a < 3; ++a) {
      double d = 0.0;
      if (q[a] < box.min()[a]) d = box.min()[a] - q[a];
      else if (q[a] > box.max()[a]) d = q[a] - box.max()[a];
      d2 += d * d;
    }
    return d2;
  }

  void search_knn(int id, const Vec3& q, std::size_t k, Index exclude, Heap& heap) const {
    const Node& node = nodes_[static_cast<std::size_t>(id)];
    if (heap.size() == k && box_sq_distance(node.box, q) > heap.top().first) return;
    if (node.left < 0) {
      for (int i = node.begin; i < node.end; ++i) {
        const Index idx = order_[static_cast<std::size_t>(i)];
        if (idx == exclude) continue;
        const Entry e{(points_[static_cast<std::size_t>(idx)] - q).squaredNorm(), idx};
        if (heap.size() < k) {
          heap.push(e);
        } else if (e < heap.top()) {
          heap.pop();
          heap.push(e);
        }
      }
      return;
    }
    const double dl = box_sq_distance(nodes_[static_cast<std::size_t>(node.left)].box, q);
    const double dr = box_sq_distance(nodes_[static_cast<std::size_t>(node.right)].box, q);
    if (dl <= dr) {
      search_knn(node.left, q, k, exclude, heap);
      search_knn(node.right, q, k, exclude, heap);
    } else {
      search_knn(node.right, q, k, exclude, heap);
      search_knn(node.left, q, k, exclude, heap);
    }
  }

  void search_radius(int id, const Vec3& q, double r2, std::vector<Index>& out) const {
    const Node& node = nodes_[static_cast<std::size_t>(id)];
    if (box_sq_distance(node.box, q) > r2) return;
    if (node.left < 0) {
      for (int i = node.begin; i < node.end; ++i) {
        const Index idx = order_[static_cast<std::size_t>(i)];
        if ((points_[static_cast<std::size_t>(idx)] - q).squaredNorm() <= r2) out.push_back(idx);
      }
      return;
    }
    search_radius(node.left, q, r2, out);
    search_radius(node.right, q, r2, out);
  }

  std::vector<Vec3> points_;
  std::vector<Index> order_;
  std::vector<Node> nodes_;
  int leaf_size_ = 12;
};

}  // namespace edgegrasp
