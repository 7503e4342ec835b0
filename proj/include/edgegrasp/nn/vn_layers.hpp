#pragma once

// Vector-neuron primitives. A feature set of N elements with C vector
// channels is stored as a (3N x C) matrix; row 3n + s holds spatial
// component s of element n. Rotations act on the spatial component only, so
// right-multiplying by channel-mixing matrices commutes with them.

#include "edgegrasp/nn/params.hpp"

namespace edgegrasp::nn {

inline constexpr double kVnDirectionFloor = 1e-9;

/// Rotate every element of a VN feature: v -> R v.
inline Mat vn_rotate(const Mat& x, const Mat3& r) {
  Mat out(x.rows(), x.cols());
  for (Eigen::Index n = 0; n < x.rows() / 3; ++n) out.middleRows(3 * n, 3) = r * x.middleRows(3 * n, 3);
  return out;
}

/// q if <q,k> >= 0, else q - <q,k^>k^ with k = (x U)[channel] and
/// k^ = k / max(|k|, floor).
inline Mat vn_relu_forward(const Mat& x, const Mat& u, Mat* k_out) {
  if (u.rows() != x.cols() || u.cols() != x.cols()) throw data_error("vn relu direction has wrong shape");
  Mat k = x * u;
  Mat out = x;
  for (Eigen::Index n = 0; n < x.rows() / 3; ++n) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      const Vec3 q(x(3 * n, c), x(3 * n + 1, c), x(3 * n + 2, c));
      const Vec3 kv(k(3 * n, c), k(3 * n + 1, c), k(3 * n + 2, c));
      const double dot = q.dot(kv);
      if (dot >= 0.0) continue;
      const double s = std::max(kv.norm(), kVnDirectionFloor);
      const Vec3 o = q - (dot / (s * s)) * kv;
      for (int d = 0; d < 3; ++d) out(3 * n + d, c) = o[d];
    }
  }
  if (k_out) *k_out = std::move(k);
  return out;
}

/// Given cached input x and directions k, returns dL/dx and accumulates
/// dL/dU into du.
inline Mat vn_relu_backward(const Mat& x, const Mat& u, const Mat& k, const Mat& dout, Mat& du) {
  Mat dx = dout;
  Mat dk = Mat::Zero(k.rows(), k.cols());
  bool any = false;
  for (Eigen::Index n = 0; n < x.rows() / 3; ++n) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      const Vec3 q(x(3 * n, c), x(3 * n + 1, c), x(3 * n + 2, c));
      const Vec3 kv(k(3 * n, c), k(3 * n + 1, c), k(3 * n + 2, c));
      const double dot = q.dot(kv);
      if (dot >= 0.0) continue;
      const Vec3 g(dout(3 * n, c), dout(3 * n + 1, c), dout(3 * n + 2, c));
      const double norm = kv.norm();
      const double s2 = std::pow(std::max(norm, kVnDirectionFloor), 2);
      const double kg = kv.dot(g);
      const Vec3 dq = g - (kg / s2) * kv;
      Vec3 dkv = -(dot * g + kg * q) / s2;
      if (norm > kVnDirectionFloor) dkv += (2.0 * dot * kg / (s2 * s2)) * kv;
      for (int d = 0; d < 3; ++d) {
        dx(3 * n + d, c) = dq[d];
        dk(3 * n + d, c) = dkv[d];
      }
      any = true;
    }
  }
  if (any) {
    du.noalias() += x.transpose() * dk;
    dx.noalias() += dk * u.transpose();
  }
  return dx;
}

/// Max pooling over `groups` consecutive sets of equal size. For each set and
/// channel, picks the element maximizing <v, d> with d = (mean(set) D)[channel];
/// ties go to the lowest index. Output is (3 groups x C).
inline Mat vn_pool_forward(const Mat& x, Eigen::Index groups, const Mat& dmat, std::vector<int>* arg_out) {
  if (groups <= 0 || x.rows() == 0) throw data_error("cannot pool an empty set");
  if (x.rows() % (3 * groups) != 0) throw data_error("vn pool groups do not divide the input");
  if (dmat.rows() != x.cols() || dmat.cols() != x.cols()) throw data_error("vn pool direction has wrong shape");
  const Eigen::Index size = x.rows() / (3 * groups), ch = x.cols();
  Mat out(3 * groups, ch);
  std::vector<int> arg(static_cast<std::size_t>(groups * ch), 0);
  Mat mean(3, ch);
  for (Eigen::Index g = 0; g < groups; ++g) {
    mean.setZero();
    for (Eigen::Index t = 0; t < size; ++t) mean += x.middleRows(3 * (g * size + t), 3);
    mean /= static_cast<double>(size);
    const Mat d = mean * dmat;
    for (Eigen::Index c = 0; c < ch; ++c) {
      Eigen::Index best = 0;
      double best_v = -std::numeric_limits<double>::infinity();
      for (Eigen::Index t = 0; t < size; ++t) {
        const Eigen::Index r = 3 * (g * size + t);
        const double v = x(r, c) * d(0, c) + x(r + 1, c) * d(1, c) + x(r + 2, c) * d(2, c);
        if (v > best_v) {
          best_v = v;
          best = t;
        }
      }
      arg[static_cast<std::size_t>(g * ch + c)] = static_cast<int>(best);
      const Eigen::Index r = 3 * (g * size + best);
      for (int s = 0; s < 3; ++s) out(3 * g + s, c) = x(r + s, c);
    }
  }
  if (arg_out) *arg_out = std::move(arg);
  return out;
}

/// Routes the pooled gradient to the selected elements. The selection is
/// piecewise constant, so the direction matrix receives no gradient.
inline void vn_pool_backward(const std::vector<int>& arg, Eigen::Index groups, const Mat& dout, Mat& dx) {
  const Eigen::Index size = dx.rows() / (3 * groups), ch = dx.cols();
  for (Eigen::Index g = 0; g < groups; ++g)
    for (Eigen::Index c = 0; c < ch; ++c) {
      const Eigen::Index r = 3 * (g * size + arg[static_cast<std::size_t>(g * ch + c)]);
      for (int s = 0; s < 3; ++s) dx(r + s, c) += dout(3 * g + s, c);
    }
}

/// Channel-mixing ReLU with learned directions, bound to a ParamSet entry.
struct VnRelu {
  int dir = -1;

  struct Cache {
    Mat x, k;
  };

  static VnRelu make(ParamSet& ps, const std::string& name, Eigen::Index ch) {
    return {ps.add(name + ".dir", ch, ch)};
  }
  void init(ParamSet& ps, Rng& rng) const { kaiming_uniform(ps[dir].value, ps[dir].value.rows(), rng); }

  Mat forward(const ParamSet& ps, const Mat& x, Cache* cache) const {
    Mat k;
    Mat out = vn_relu_forward(x, ps[dir].value, &k);
    if (cache) {
      cache->x = x;
      cache->k = std::move(k);
    }
    return out;
  }
  Mat backward(ParamSet& ps, const Cache& c, const Mat& dout) const {
    return vn_relu_backward(c.x, ps[dir].value, c.k, dout, ps[dir].grad);
  }
};

struct VnPool {
  int dir = -1;

  static VnPool make(ParamSet& ps, const std::string& name, Eigen::Index ch) {
    return {ps.add(name + ".dir", ch, ch)};
  }
  void init(ParamSet& ps, Rng& rng) const { kaiming_uniform(ps[dir].value, ps[dir].value.rows(), rng); }
};

}  // namespace edgegrasp::nn
