#pragma once

// Scalar-feature edge classifier: PointNetConv stack over the region graph,
// two-stage max-pooled global feature, per-edge feature [global, contact],
// and an MLP head.

#include "edgegrasp/nn/edge_net.hpp"

namespace edgegrasp::nn {

/// One PointNetConv layer: out_i = max over message sources j of
/// relu(relu([f_j, p_j - p_i] W1 + b1) W2 + b2).
struct ConvLayer {
  Linear lin1, lin2;
  Eigen::Index in = 0, width = 0;

  struct Cache {
    Mat features;   // N x in
    Mat z1, h1;     // M x width, per message
    Mat z2;         // M x width
    std::vector<int> arg;  // N x width, winning slot
  };

  static ConvLayer make(ParamSet& ps, const std::string& name, Eigen::Index in, Eigen::Index width) {
    ConvLayer l;
    l.in = in;
    l.width = width;
    l.lin1 = Linear::make(ps, name + ".lin1", in + 3, width);
    l.lin2 = Linear::make(ps, name + ".lin2", width, width);
    return l;
  }

  void init(ParamSet& ps, Rng& rng) const {
    lin1.init(ps, rng);
    lin2.init(ps, rng);
  }

  Mat forward(const ParamSet& ps, const Mat& f, const Mat& pos, const MessageGraph& g, Cache* cache) const {
    if (f.cols() != in || f.rows() != pos.rows()) throw data_error("conv layer input has wrong shape");
    const Mat& w1 = lin1.w(ps);
    const Mat a = f * w1.topRows(in);
    const Mat b = pos * w1.bottomRows(3);
    const RowVec b1 = ps[lin1.bias].value.row(0);
    const Eigen::Index n = f.rows(), k = g.slots, m = n * k;
    Mat z1(m, width);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index t = 0; t < k; ++t) {
        const int j = g.source[static_cast<std::size_t>(i * k + t)];
        z1.row(i * k + t) = a.row(j) + b.row(j) - b.row(i) + b1;
      }
    Mat h1 = relu(z1);
    Mat z2 = lin2.forward(ps, h1);
    Mat out = Mat::Zero(n, width);
    std::vector<int> arg(static_cast<std::size_t>(n * width), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      auto o = out.row(i);
      int* ai = arg.data() + i * width;
      for (Eigen::Index t = 0; t < k; ++t) {
        const auto zr = z2.row(i * k + t);
        for (Eigen::Index c = 0; c < width; ++c) {
          const double v = std::max(zr[c], 0.0);
          if (t == 0 || v > o[c]) {
            o[c] = v;
            ai[c] = static_cast<int>(t);
          }
        }
      }
    }
    if (cache) {
      cache->features = f;
      cache->z1 = std::move(z1);
      cache->h1 = std::move(h1);
      cache->z2 = std::move(z2);
      cache->arg = std::move(arg);
    }
    return out;
  }

  /// Returns dLoss/d(input features); positions are constants.
  Mat backward(ParamSet& ps, const Cache& cc, const Mat& pos, const MessageGraph& g, const Mat& dout) const {
    const Eigen::Index n = dout.rows(), k = g.slots, m = n * k;
    const Mat& w2 = lin2.w(ps);
    Mat& dw2 = ps[lin2.weight].grad;
    auto db2 = ps[lin2.bias].grad.row(0);
    Mat dh1 = Mat::Zero(m, width);
    // Only the winning message of each (node, channel) receives gradient.
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index c = 0; c < width; ++c) {
        const Eigen::Index msg = i * k + cc.arg[static_cast<std::size_t>(i * width + c)];
        if (cc.z2(msg, c) <= 0.0) continue;
        const double v = dout(i, c);
        if (v == 0.0) continue;
        dw2.col(c) += v * cc.h1.row(msg).transpose();
        db2[c] += v;
        dh1.row(msg) += v * w2.col(c).transpose();
      }
    }
    const Mat dz1 = relu_backward(cc.z1, dh1);
    ps[lin1.bias].grad.row(0) += dz1.colwise().sum();
    Mat da = Mat::Zero(n, width), db = Mat::Zero(n, width);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index t = 0; t < k; ++t) {
        const int j = g.source[static_cast<std::size_t>(i * k + t)];
        const auto r = dz1.row(i * k + t);
        da.row(j) += r;
        db.row(j) += r;
        db.row(i) -= r;
      }
    Mat& dw1 = ps[lin1.weight].grad;
    dw1.topRows(in).noalias() += cc.features.transpose() * da;
    dw1.bottomRows(3).noalias() += pos.transpose() * db;
    return da * lin1.w(ps).topRows(in).transpose();
  }
};

/// Pools relu(x W + b) over rows; one winning row per channel.
struct PooledLinear {
  Linear lin;

  struct Cache {
    Mat z;
    std::vector<int> arg;
  };

  RowVec forward(const ParamSet& ps, const Mat& x, Cache* cache) const {
    return forward_from_pre(lin.forward(ps, x), cache);
  }

  static RowVec forward_from_pre(Mat z, Cache* cache) {
    if (z.rows() == 0) throw data_error("cannot pool an empty set");
    RowVec out(z.cols());
    std::vector<int> arg(static_cast<std::size_t>(z.cols()), 0);
    for (Eigen::Index c = 0; c < z.cols(); ++c) {
      Eigen::Index best = 0;
      for (Eigen::Index r = 1; r < z.rows(); ++r)
        if (z(r, c) > z(best, c)) best = r;
      arg[static_cast<std::size_t>(c)] = static_cast<int>(best);
      out[c] = std::max(z(best, c), 0.0);
    }
    if (cache) {
      cache->z = std::move(z);
      cache->arg = std::move(arg);
    }
    return out;
  }
};

class ScalarEdgeNet : public EdgeNet {
 public:
  struct PsiCache {
    Mat pos;
    MessageGraph graph;
    std::vector<ConvLayer::Cache> layers;
  };
  struct OmegaCache {
    PooledLinear::Cache first, second;
    RowVec h;
  };
  struct Cache {
    PsiCache psi;
    Mat features;
    OmegaCache omega;
    RowVec global;
    Mat edges;
    Mlp::Cache head;
    std::vector<int> contacts;
  };

  ScalarEdgeNet(const ModelConfig& cfg, std::uint64_t seed) : EdgeNet(cfg) {
    if (cfg.kind != ModelKind::scalar) throw usage_error("scalar net needs a scalar config");
    Eigen::Index in = 6;
    for (std::size_t l = 0; l < cfg.conv_widths.size(); ++l) {
      convs_.push_back(ConvLayer::make(params_, "conv." + std::to_string(l), in, cfg.conv_widths[l]));
      in = cfg.conv_widths[l];
    }
    feat_ = in;
    omega1_.lin = Linear::make(params_, "global.stage1", feat_, cfg.omega1);
    const Eigen::Index second_in = (cfg.omega_concat_mlp1 ? cfg.omega1 : feat_) + cfg.omega1;
    omega2_.lin = Linear::make(params_, "global.stage2", second_in, cfg.omega2);
    std::vector<Eigen::Index> widths{cfg.omega2 + feat_};
    for (int w : cfg.head_widths) widths.push_back(w);
    widths.push_back(1);
    head_ = Mlp::make(params_, "head", widths, false);
    Rng rng(seed);
    initialize(rng);
  }

  void initialize(Rng& rng) {
    for (const auto& c : convs_) c.init(params_, rng);
    omega1_.lin.init(params_, rng);
    omega2_.lin.init(params_, rng);
    head_.init(params_, rng);
    // Output layer: U(+-1/sqrt(fan_in)) weights and a zero bias.
    const Linear& last = head_.layers.back();
    bias_uniform(params_[last.weight].value, last.in, rng);
    params_[last.bias].value.setZero();
  }

  Eigen::Index feature_width() const { return feat_; }
  Eigen::Index global_width() const { return omega2_.lin.out; }
  const std::vector<ConvLayer>& convs() const { return convs_; }

  /// Scaled centered coordinates (N x 3).
  Mat positions(const LocalRegion& r) const {
    Mat p(static_cast<Eigen::Index>(r.size()), 3);
    for (std::size_t i = 0; i < r.size(); ++i)
      p.row(static_cast<Eigen::Index>(i)) = cfg_.position_scale * r.centered_points[i].transpose();
    return p;
  }

  /// Per-point features after the conv stack (N x feature_width).
  Mat psi(const LocalRegion& region, PsiCache* cache) const {
    PsiCache local;
    PsiCache& c = cache ? *cache : local;
    c.pos = positions(region);
    c.graph = message_graph(region.centered_points, cfg_.k, cfg_.self_loop);
    Mat f(c.pos.rows(), 6);
    f.leftCols(3) = c.pos;
    for (std::size_t i = 0; i < region.size(); ++i)
      f.row(static_cast<Eigen::Index>(i)).tail(3) = region.normals[i].transpose();
    c.layers.resize(convs_.size());
    for (std::size_t l = 0; l < convs_.size(); ++l)
      f = convs_[l].forward(params_, f, c.pos, c.graph, cache ? &c.layers[l] : nullptr);
    require_finite(f, "point features");
    return f;
  }

  /// Global region feature from per-point features.
  RowVec omega(const Mat& f, OmegaCache* cache) const {
    if (f.rows() == 0) throw data_error("empty region");
    if (f.cols() != feat_) throw data_error("point features have wrong width");
    OmegaCache local;
    OmegaCache& c = cache ? *cache : local;
    c.h = omega1_.forward(params_, f, &c.first);
    const Mat& w2 = omega2_.lin.w(params_);
    const Eigen::Index lead = w2.rows() - c.h.cols();
    const RowVec shared = c.h * w2.bottomRows(c.h.cols()) + params_[omega2_.lin.bias].value.row(0);
    Mat z = (cfg_.omega_concat_mlp1 ? relu(c.first.z) : f) * w2.topRows(lead);
    z.rowwise() += shared;
    RowVec g = PooledLinear::forward_from_pre(std::move(z), &c.second);
    require_finite(g, "global feature");
    return g;
  }

  /// Rows [global, f_c] for each contact.
  Mat edge_features(const Mat& f, const RowVec& g, std::span<const int> contacts) const {
    Mat e(static_cast<Eigen::Index>(contacts.size()), g.cols() + f.cols());
    for (std::size_t r = 0; r < contacts.size(); ++r) {
      const int c = contacts[r];
      if (c < 0 || c >= f.rows()) throw data_error("contact index out of range");
      e.row(static_cast<Eigen::Index>(r)) << g, f.row(c);
    }
    return e;
  }

  Vec classify_logits(const Mat& edges, Mlp::Cache* cache) const {
    if (edges.cols() != head_.layers.front().in) throw data_error("edge features have wrong width");
    const Mat out = head_.forward(params_, edges, cache);
    require_finite(out, "logits");
    return out.col(0);
  }

  Vec logits(const LocalRegion& region, std::span<const int> contacts) const override {
    check_contacts(region, contacts);
    if (contacts.empty()) return Vec();
    const Mat f = psi(region, nullptr);
    const RowVec g = omega(f, nullptr);
    return classify_logits(edge_features(f, g, contacts), nullptr);
  }

  Vec accumulate_gradients(const LocalRegion& region, std::span<const int> contacts,
                           const Upstream& upstream) override {
    check_contacts(region, contacts);
    if (contacts.empty()) return Vec();
    Cache c;
    c.features = psi(region, &c.psi);
    c.global = omega(c.features, &c.omega);
    c.edges = edge_features(c.features, c.global, contacts);
    const Vec z = classify_logits(c.edges, &c.head);
    const Vec dz = upstream(z);
    if (dz.size() != z.size()) throw usage_error("upstream gradient has wrong length");
    backward(c, contacts, dz);
    return z;
  }

 private:
  void backward(const Cache& c, std::span<const int> contacts, const Vec& dz) {
    const Mat de = head_.backward(params_, c.head, Mat(dz));
    const Eigen::Index gw = c.global.cols();
    Mat df = Mat::Zero(c.features.rows(), feat_);
    for (std::size_t r = 0; r < contacts.size(); ++r)
      df.row(contacts[r]) += de.row(static_cast<Eigen::Index>(r)).tail(feat_);
    const RowVec dg = de.leftCols(gw).colwise().sum();
    omega_backward(c, dg, df);
    for (std::size_t l = convs_.size(); l-- > 0;)
      df = convs_[l].backward(params_, c.psi.layers[l], c.psi.pos, c.psi.graph, df);
  }

  void omega_backward(const Cache& c, const RowVec& dg, Mat& df) {
    const Mat& f = c.features;
    const auto& o = c.omega;
    const Mat& w2 = omega2_.lin.w(params_);
    Mat& dw2 = params_[omega2_.lin.weight].grad;
    auto db2 = params_[omega2_.lin.bias].grad.row(0);
    const Eigen::Index hw = o.h.cols();
    const Eigen::Index lead = w2.rows() - hw;
    RowVec dh = RowVec::Zero(hw);
    Mat dfirst;  // gradient w.r.t. relu(first-stage pre-activations)
    if (cfg_.omega_concat_mlp1) dfirst = Mat::Zero(f.rows(), hw);
    for (Eigen::Index ch = 0; ch < dg.cols(); ++ch) {
      const int r = o.second.arg[static_cast<std::size_t>(ch)];
      if (o.second.z(r, ch) <= 0.0 || dg[ch] == 0.0) continue;
      const double v = dg[ch];
      if (cfg_.omega_concat_mlp1) {
        dw2.col(ch).head(lead) += v * o.first.z.row(r).cwiseMax(0.0).transpose();
        dfirst.row(r) += v * w2.col(ch).head(lead).transpose();
      } else {
        dw2.col(ch).head(lead) += v * f.row(r).transpose();
        df.row(r) += v * w2.col(ch).head(lead).transpose();
      }
      dw2.col(ch).tail(hw) += v * o.h.transpose();
      db2[ch] += v;
      dh += v * w2.col(ch).tail(hw).transpose();
    }
    const Mat& w1 = omega1_.lin.w(params_);
    Mat& dw1 = params_[omega1_.lin.weight].grad;
    auto db1 = params_[omega1_.lin.bias].grad.row(0);
    for (Eigen::Index ch = 0; ch < hw; ++ch) {
      const int r = o.first.arg[static_cast<std::size_t>(ch)];
      if (o.first.z(r, ch) <= 0.0 || dh[ch] == 0.0) continue;
      const double v = dh[ch];
      dw1.col(ch) += v * f.row(r).transpose();
      db1[ch] += v;
      df.row(r) += v * w1.col(ch).transpose();
    }
    if (cfg_.omega_concat_mlp1) {
      const Mat dz1 = relu_backward(o.first.z, dfirst);
      omega1_.lin.backward(params_, f, dz1, nullptr);
      df.noalias() += dz1 * w1.transpose();
    }
  }

  std::vector<ConvLayer> convs_;
  Eigen::Index feat_ = 0;
  PooledLinear omega1_, omega2_;
  Mlp head_;
};

}  // namespace edgegrasp::nn
