#pragma once

// Loop-nest reference implementations of the scalar network stages. They read
// parameter values by name and share no arithmetic with the library.

#include "edgegrasp/nn/params.hpp"
#include "oracles_geometry.hpp"

#include <string>
#include <vector>

namespace oracle {

using Rows = std::vector<std::vector<double>>;

inline double w(const edgegrasp::nn::ParamSet& ps, const std::string& name, long r, long c) {
  return ps.get(name).value(r, c);
}

/// relu(x W + b) computed entry by entry.
inline std::vector<double> dense(const edgegrasp::nn::ParamSet& ps, const std::string& layer,
                                 const std::vector<double>& x, bool activate) {
  const auto& wt = ps.get(layer + ".weight").value;
  std::vector<double> y(static_cast<std::size_t>(wt.cols()));
  for (long c = 0; c < wt.cols(); ++c) {
    double s = w(ps, layer + ".bias", 0, c);
    for (long d = 0; d < wt.rows(); ++d) s += x[static_cast<std::size_t>(d)] * wt(d, c);
    y[static_cast<std::size_t>(c)] = activate ? std::max(s, 0.0) : s;
  }
  return y;
}

inline Rows conv_layer(const edgegrasp::nn::ParamSet& ps, const std::string& name, const Rows& f,
                       const std::vector<V3>& pos, const std::vector<std::vector<long>>& nbrs, bool self_loop) {
  Rows out(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    std::vector<long> src;
    if (self_loop) src.push_back(static_cast<long>(i));
    for (long j : nbrs[i]) src.push_back(j);
    for (long j : src) {
      std::vector<double> x = f[static_cast<std::size_t>(j)];
      for (int d = 0; d < 3; ++d) x.push_back(pos[static_cast<std::size_t>(j)][d] - pos[i][d]);
      const auto h = dense(ps, name + ".lin2", dense(ps, name + ".lin1", x, true), true);
      if (out[i].empty()) out[i] = h;
      for (std::size_t c = 0; c < h.size(); ++c) out[i][c] = std::max(out[i][c], h[c]);
    }
  }
  return out;
}

inline Rows psi(const edgegrasp::nn::ParamSet& ps, int layers, const std::vector<V3>& pos,
                const std::vector<V3>& normals, int k, bool self_loop) {
  Rows f(pos.size());
  for (std::size_t i = 0; i < pos.size(); ++i)
    f[i] = {pos[i].x(), pos[i].y(), pos[i].z(), normals[i].x(), normals[i].y(), normals[i].z()};
  const auto nbrs = brute_knn(pos, k);
  for (int l = 0; l < layers; ++l) f = conv_layer(ps, "conv." + std::to_string(l), f, pos, nbrs, self_loop);
  return f;
}

inline std::vector<double> max_rows(const Rows& r) {
  std::vector<double> m = r.front();
  for (const auto& row : r)
    for (std::size_t c = 0; c < m.size(); ++c) m[c] = std::max(m[c], row[c]);
  return m;
}

inline std::vector<double> omega(const edgegrasp::nn::ParamSet& ps, const Rows& f, bool concat_stage1) {
  Rows first;
  for (const auto& row : f) first.push_back(dense(ps, "global.stage1", row, true));
  const auto h = max_rows(first);
  Rows second;
  for (std::size_t i = 0; i < f.size(); ++i) {
    std::vector<double> x = concat_stage1 ? first[i] : f[i];
    x.insert(x.end(), h.begin(), h.end());
    second.push_back(dense(ps, "global.stage2", x, true));
  }
  return max_rows(second);
}

inline double head(const edgegrasp::nn::ParamSet& ps, int layers, std::vector<double> x) {
  for (int l = 0; l < layers; ++l) x = dense(ps, "head." + std::to_string(l), x, l + 1 < layers);
  return 1.0 / (1.0 + std::exp(-x[0]));
}

}  // namespace oracle
