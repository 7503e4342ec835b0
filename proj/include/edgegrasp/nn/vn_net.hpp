#pragma once

// Rotation-invariant edge classifier built from vector-neuron layers. The
// conv stack, global stages and per-edge feature are equivariant; a small
// equivariant network predicts a 3x3 frame per edge and projecting the edge
// feature onto it yields invariant inputs for a scalar MLP head.

#include "edgegrasp/nn/edge_net.hpp"
#include "edgegrasp/nn/vn_layers.hpp"

namespace edgegrasp::nn {

/// Equivariant PointNetConv: messages [f_j, p_j - p_i] pass through
/// linear, relu, linear, relu and are max-pooled per node.
struct VnConvLayer {
  Linear lin1, lin2;  // no bias
  VnRelu relu1, relu2;
  VnPool pool;
  Eigen::Index in = 0, width = 0;

  struct Cache {
    Mat features;  // 3N x in
    VnRelu::Cache r1, r2;
    Mat h1;
    std::vector<int> arg;
  };

  static VnConvLayer make(ParamSet& ps, const std::string& name, Eigen::Index in, Eigen::Index width) {
    VnConvLayer l;
    l.in = in;
    l.width = width;
    l.lin1 = Linear::make(ps, name + ".lin1", in + 1, width, false);
    l.relu1 = VnRelu::make(ps, name + ".relu1", width);
    l.lin2 = Linear::make(ps, name + ".lin2", width, width, false);
    l.relu2 = VnRelu::make(ps, name + ".relu2", width);
    l.pool = VnPool::make(ps, name + ".pool", width);
    return l;
  }

  void init(ParamSet& ps, Rng& rng) const {
    lin1.init(ps, rng);
    relu1.init(ps, rng);
    lin2.init(ps, rng);
    relu2.init(ps, rng);
    pool.init(ps, rng);
  }

  Mat forward(const ParamSet& ps, const Mat& f, const Mat& pos, const MessageGraph& g, Cache* cache) const {
    if (f.cols() != in || f.rows() != pos.rows()) throw data_error("vn conv layer input has wrong shape");
    const Mat& w1 = lin1.w(ps);
    const Mat a = f * w1.topRows(in);
    const Mat b = pos * w1.bottomRows(1);
    const Eigen::Index n = f.rows() / 3, k = g.slots, m = n * k;
    Mat z1(3 * m, width);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index t = 0; t < k; ++t) {
        const int j = g.source[static_cast<std::size_t>(i * k + t)];
        z1.middleRows(3 * (i * k + t), 3) = a.middleRows(3 * j, 3) + b.middleRows(3 * j, 3) - b.middleRows(3 * i, 3);
      }
    Cache local;
    Cache& c = cache ? *cache : local;
    Mat h1 = relu1.forward(ps, z1, cache ? &c.r1 : nullptr);
    const Mat h2 = relu2.forward(ps, h1 * lin2.w(ps), cache ? &c.r2 : nullptr);
    Mat out = vn_pool_forward(h2, n, ps[pool.dir].value, cache ? &c.arg : nullptr);
    if (cache) {
      c.features = f;
      c.h1 = std::move(h1);
    }
    return out;
  }

  Mat backward(ParamSet& ps, const Cache& c, const Mat& pos, const MessageGraph& g, const Mat& dout) const {
    const Eigen::Index n = dout.rows() / 3, k = g.slots;
    Mat dh2 = Mat::Zero(3 * n * k, width);
    vn_pool_backward(c.arg, n, dout, dh2);
    const Mat dz2 = relu2.backward(ps, c.r2, dh2);
    ps[lin2.weight].grad.noalias() += c.h1.transpose() * dz2;
    const Mat dz1 = relu1.backward(ps, c.r1, dz2 * lin2.w(ps).transpose());
    Mat da = Mat::Zero(3 * n, width), db = Mat::Zero(3 * n, width);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index t = 0; t < k; ++t) {
        const int j = g.source[static_cast<std::size_t>(i * k + t)];
        const auto r = dz1.middleRows(3 * (i * k + t), 3);
        da.middleRows(3 * j, 3) += r;
        db.middleRows(3 * j, 3) += r;
        db.middleRows(3 * i, 3) -= r;
      }
    Mat& dw1 = ps[lin1.weight].grad;
    dw1.topRows(in).noalias() += c.features.transpose() * da;
    dw1.bottomRows(1).noalias() += pos.transpose() * db;
    return da * lin1.w(ps).topRows(in).transpose();
  }
};

class VnEdgeNet : public EdgeNet {
 public:
  struct PsiCache {
    Mat pos;  // 3N x 1
    MessageGraph graph;
    std::vector<VnConvLayer::Cache> layers;
  };
  struct OmegaCache {
    VnRelu::Cache r1, r2;
    Mat h1;  // first-stage activations, 3N x omega1
    std::vector<int> arg1, arg2;
    Mat h;  // 3 x omega1
  };
  struct EdgeCache {
    Mat feat;  // 3E x edge_width
    VnRelu::Cache relu;
    Mat hidden;
    Mat raw_frame;  // 3E x 3, before unit normalization
    Mat frame;      // 3E x 3, unit channels
  };
  struct Cache {
    PsiCache psi;
    Mat features;
    OmegaCache omega;
    Mat global;
    EdgeCache edge;
    Mat invariant;
    Mlp::Cache head;
  };

  VnEdgeNet(const ModelConfig& cfg, std::uint64_t seed) : EdgeNet(cfg) {
    if (cfg.kind != ModelKind::vector_neuron) throw usage_error("vn net needs a vector_neuron config");
    Eigen::Index in = 2;
    for (std::size_t l = 0; l < cfg.conv_widths.size(); ++l) {
      convs_.push_back(VnConvLayer::make(params_, "conv." + std::to_string(l), in, cfg.conv_widths[l]));
      in = cfg.conv_widths[l];
    }
    feat_ = in;
    g1_ = Linear::make(params_, "global.stage1", feat_, cfg.omega1, false);
    g1_relu_ = VnRelu::make(params_, "global.stage1.relu", cfg.omega1);
    g1_pool_ = VnPool::make(params_, "global.stage1.pool", cfg.omega1);
    const Eigen::Index second_in = (cfg.omega_concat_mlp1 ? cfg.omega1 : feat_) + cfg.omega1;
    g2_ = Linear::make(params_, "global.stage2", second_in, cfg.omega2, false);
    g2_relu_ = VnRelu::make(params_, "global.stage2.relu", cfg.omega2);
    g2_pool_ = VnPool::make(params_, "global.stage2.pool", cfg.omega2);
    edge_w_ = cfg.omega2 + feat_;
    t1_ = Linear::make(params_, "frame.lin1", edge_w_, cfg.tnet_hidden, false);
    t_relu_ = VnRelu::make(params_, "frame.relu", cfg.tnet_hidden);
    t2_ = Linear::make(params_, "frame.lin2", cfg.tnet_hidden, 3, false);
    std::vector<Eigen::Index> widths{3 * edge_w_};
    for (int w : cfg.head_widths) widths.push_back(w);
    widths.push_back(1);
    head_ = Mlp::make(params_, "head", widths, false);
    Rng rng(seed);
    initialize(rng);
  }

  void initialize(Rng& rng) {
    for (const auto& c : convs_) c.init(params_, rng);
    g1_.init(params_, rng);
    g1_relu_.init(params_, rng);
    g1_pool_.init(params_, rng);
    g2_.init(params_, rng);
    g2_relu_.init(params_, rng);
    g2_pool_.init(params_, rng);
    t1_.init(params_, rng);
    t_relu_.init(params_, rng);
    t2_.init(params_, rng);
    head_.init(params_, rng);
    // Zero output layer: every edge starts at score 0.5.
    const Linear& last = head_.layers.back();
    params_[last.weight].value.setZero();
    params_[last.bias].value.setZero();
  }

  Eigen::Index feature_width() const { return feat_; }
  Eigen::Index edge_width() const { return edge_w_; }

  /// Two-channel input [scaled position, normal] in VN layout.
  Mat input_features(const LocalRegion& r) const {
    Mat f(3 * static_cast<Eigen::Index>(r.size()), 2);
    for (std::size_t i = 0; i < r.size(); ++i)
      for (int s = 0; s < 3; ++s) {
        f(3 * static_cast<Eigen::Index>(i) + s, 0) = cfg_.position_scale * r.centered_points[i][s];
        f(3 * static_cast<Eigen::Index>(i) + s, 1) = r.normals[i][s];
      }
    return f;
  }

  Mat psi(const LocalRegion& region, PsiCache* cache) const {
    PsiCache local;
    PsiCache& c = cache ? *cache : local;
    Mat f = input_features(region);
    c.pos = f.col(0);
    c.graph = message_graph(region.centered_points, cfg_.k, cfg_.self_loop);
    c.layers.resize(convs_.size());
    for (std::size_t l = 0; l < convs_.size(); ++l)
      f = convs_[l].forward(params_, f, c.pos, c.graph, cache ? &c.layers[l] : nullptr);
    require_finite(f, "point features");
    return f;
  }

  /// Global VN feature (3 x omega2) from per-point features.
  Mat omega(const Mat& f, OmegaCache* cache) const {
    if (f.rows() == 0) throw data_error("empty region");
    if (f.cols() != feat_) throw data_error("point features have wrong width");
    OmegaCache local;
    OmegaCache& c = cache ? *cache : local;
    const Eigen::Index n = f.rows() / 3;
    c.h1 = g1_relu_.forward(params_, f * g1_.w(params_), &c.r1);
    c.h = vn_pool_forward(c.h1, 1, params_[g1_pool_.dir].value, &c.arg1);
    const Mat& w2 = g2_.w(params_);
    const Eigen::Index hw = c.h.cols();
    const Mat shared = c.h * w2.bottomRows(hw);
    Mat z = (cfg_.omega_concat_mlp1 ? c.h1 : f) * w2.topRows(w2.rows() - hw);
    for (Eigen::Index i = 0; i < n; ++i) z.middleRows(3 * i, 3) += shared;
    const Mat h2 = g2_relu_.forward(params_, z, &c.r2);
    Mat g = vn_pool_forward(h2, 1, params_[g2_pool_.dir].value, &c.arg2);
    require_finite(g, "global feature");
    return g;
  }

  /// Per-edge VN feature [global, f_c] in VN layout (3E x edge_width).
  Mat edge_features(const Mat& f, const Mat& g, std::span<const int> contacts) const {
    const Eigen::Index e = static_cast<Eigen::Index>(contacts.size());
    Mat out(3 * e, g.cols() + f.cols());
    for (Eigen::Index r = 0; r < e; ++r) {
      const int c = contacts[static_cast<std::size_t>(r)];
      if (c < 0 || 3 * c >= f.rows()) throw data_error("contact index out of range");
      out.block(3 * r, 0, 3, g.cols()) = g;
      out.block(3 * r, g.cols(), 3, f.cols()) = f.middleRows(3 * c, 3);
    }
    return out;
  }

  /// Per-edge 3x3 frames in VN layout (3E x 3): rows 3e..3e+2 hold the
  /// spatial components of the three frame channels, each scaled to unit
  /// length so projections stay linear in the feature magnitude.
  Mat frames(const Mat& feat, EdgeCache* cache) const {
    EdgeCache local;
    EdgeCache& c = cache ? *cache : local;
    c.hidden = t_relu_.forward(params_, feat * t1_.w(params_), &c.relu);
    c.raw_frame = c.hidden * t2_.w(params_);
    Mat frame = c.raw_frame;
    for (Eigen::Index r = 0; r < frame.rows() / 3; ++r)
      for (Eigen::Index k = 0; k < 3; ++k) {
        auto v = frame.block(3 * r, k, 3, 1);
        v /= std::max(v.norm(), kVnDirectionFloor);
      }
    return frame;
  }

  /// Gradient through the unit normalization of frame channels.
  static Mat unit_frame_backward(const Mat& raw, const Mat& unit, const Mat& dunit) {
    Mat draw(raw.rows(), raw.cols());
    for (Eigen::Index r = 0; r < raw.rows() / 3; ++r)
      for (Eigen::Index k = 0; k < 3; ++k) {
        const Vec3 t = raw.block(3 * r, k, 3, 1);
        const Vec3 u = unit.block(3 * r, k, 3, 1);
        const Vec3 g = dunit.block(3 * r, k, 3, 1);
        const double n = t.norm();
        draw.block(3 * r, k, 3, 1) = n > kVnDirectionFloor ? Vec3((g - u * u.dot(g)) / n) : Vec3(g / kVnDirectionFloor);
      }
    return draw;
  }

  /// Row e holds flatten(F_e T_e^T) with F_e (channels x 3) and T_e (3 x 3).
  static Mat project(const Mat& feat, const Mat& frame) {
    const Eigen::Index e = feat.rows() / 3, w = feat.cols();
    Mat out(e, 3 * w);
    for (Eigen::Index r = 0; r < e; ++r) {
      const Mat p = feat.middleRows(3 * r, 3).transpose() * frame.middleRows(3 * r, 3);  // w x 3
      out.row(r) = Eigen::Map<const RowVec>(p.data(), 3 * w);
    }
    return out;
  }

  Mat invariant_features(const Mat& feat, EdgeCache* cache) const {
    if (feat.cols() != edge_w_) throw data_error("edge features have wrong width");
    const Mat frame = frames(feat, cache);
    if (cache) {
      cache->feat = feat;
      cache->frame = frame;
    }
    return project(feat, frame);
  }

  Vec classify_logits(const Mat& inv, Mlp::Cache* cache) const {
    if (inv.cols() != head_.layers.front().in) throw data_error("invariant features have wrong width");
    const Mat out = head_.forward(params_, inv, cache);
    require_finite(out, "logits");
    return out.col(0);
  }

  Vec logits(const LocalRegion& region, std::span<const int> contacts) const override {
    check_contacts(region, contacts);
    if (contacts.empty()) return Vec();
    const Mat f = psi(region, nullptr);
    const Mat g = omega(f, nullptr);
    return classify_logits(invariant_features(edge_features(f, g, contacts), nullptr), nullptr);
  }

  Vec accumulate_gradients(const LocalRegion& region, std::span<const int> contacts,
                           const Upstream& upstream) override {
    check_contacts(region, contacts);
    if (contacts.empty()) return Vec();
    Cache c;
    c.features = psi(region, &c.psi);
    c.global = omega(c.features, &c.omega);
    c.invariant = invariant_features(edge_features(c.features, c.global, contacts), &c.edge);
    const Vec z = classify_logits(c.invariant, &c.head);
    const Vec dz = upstream(z);
    if (dz.size() != z.size()) throw usage_error("upstream gradient has wrong length");
    backward(c, contacts, dz);
    return z;
  }

 private:
  void backward(const Cache& c, std::span<const int> contacts, const Vec& dz) {
    const Mat dinv = head_.backward(params_, c.head, Mat(dz));
    const auto& ec = c.edge;
    const Eigen::Index e = dinv.rows(), w = edge_w_;
    Mat dfeat(3 * e, w), dframe(3 * e, 3);
    for (Eigen::Index r = 0; r < e; ++r) {
      const Eigen::Map<const Mat> dp(dinv.row(r).data(), w, 3);  // w x 3, row-major like project()
      dfeat.middleRows(3 * r, 3) = ec.frame.middleRows(3 * r, 3) * dp.transpose();
      dframe.middleRows(3 * r, 3) = ec.feat.middleRows(3 * r, 3) * dp;
    }
    // Frame network.
    const Mat draw = unit_frame_backward(ec.raw_frame, ec.frame, dframe);
    params_[t2_.weight].grad.noalias() += ec.hidden.transpose() * draw;
    const Mat dz1 = t_relu_.backward(params_, ec.relu, draw * t2_.w(params_).transpose());
    params_[t1_.weight].grad.noalias() += ec.feat.transpose() * dz1;
    dfeat.noalias() += dz1 * t1_.w(params_).transpose();

    const Eigen::Index gw = c.global.cols();
    Mat dg = Mat::Zero(3, gw);
    Mat df = Mat::Zero(c.features.rows(), feat_);
    for (Eigen::Index r = 0; r < e; ++r) {
      dg += dfeat.block(3 * r, 0, 3, gw);
      df.middleRows(3 * contacts[static_cast<std::size_t>(r)], 3) += dfeat.block(3 * r, gw, 3, feat_);
    }
    omega_backward(c, dg, df);
    for (std::size_t l = convs_.size(); l-- > 0;)
      df = convs_[l].backward(params_, c.psi.layers[l], c.psi.pos, c.psi.graph, df);
  }

  void omega_backward(const Cache& c, const Mat& dg, Mat& df) {
    const auto& o = c.omega;
    const Mat& f = c.features;
    const Eigen::Index n = f.rows() / 3, hw = o.h.cols();
    Mat dh2 = Mat::Zero(3 * n, dg.cols());
    vn_pool_backward(o.arg2, 1, dg, dh2);
    const Mat dz = g2_relu_.backward(params_, o.r2, dh2);
    const Mat& w2 = g2_.w(params_);
    const Eigen::Index lead = w2.rows() - hw;
    Mat& dw2 = params_[g2_.weight].grad;
    const Mat& lead_in = cfg_.omega_concat_mlp1 ? o.h1 : f;
    dw2.topRows(lead).noalias() += lead_in.transpose() * dz;
    Mat dz_sum = Mat::Zero(3, dz.cols());
    for (Eigen::Index i = 0; i < n; ++i) dz_sum += dz.middleRows(3 * i, 3);
    dw2.bottomRows(hw).noalias() += o.h.transpose() * dz_sum;
    const Mat dh = dz_sum * w2.bottomRows(hw).transpose();
    const Mat dlead = dz * w2.topRows(lead).transpose();

    Mat dh1 = cfg_.omega_concat_mlp1 ? dlead : Mat::Zero(3 * n, hw);
    if (!cfg_.omega_concat_mlp1) df += dlead;
    vn_pool_backward(o.arg1, 1, dh, dh1);
    const Mat dz1 = g1_relu_.backward(params_, o.r1, dh1);
    params_[g1_.weight].grad.noalias() += f.transpose() * dz1;
    df.noalias() += dz1 * g1_.w(params_).transpose();
  }

  std::vector<VnConvLayer> convs_;
  Eigen::Index feat_ = 0, edge_w_ = 0;
  Linear g1_, g2_, t1_, t2_;
  VnRelu g1_relu_, g2_relu_, t_relu_;
  VnPool g1_pool_, g2_pool_;
  Mlp head_;
};

}  // namespace edgegrasp::nn
