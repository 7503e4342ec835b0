#pragma once

// Named parameter tensors, dense layers with hand-written reverse mode, and
// the Adam optimizer.

#include "edgegrasp/common.hpp"

#include <json.hpp>

#include <cmath>
#include <string>
#include <vector>

namespace edgegrasp::nn {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;
using RowVec = Eigen::RowVectorXd;

struct Tensor {
  std::string name;
  Mat value;
  Mat grad;
};

/// Ordered collection of trainable tensors. Indices are stable once added.
class ParamSet {
 public:
  int add(std::string name, Eigen::Index rows, Eigen::Index cols) {
    for (const auto& t : tensors_)
      if (t.name == name) throw usage_error("duplicate parameter '" + name + "'");
    tensors_.push_back({std::move(name), Mat::Zero(rows, cols), Mat::Zero(rows, cols)});
    return static_cast<int>(tensors_.size()) - 1;
  }

  Tensor& operator[](int i) { return tensors_[static_cast<std::size_t>(i)]; }
  const Tensor& operator[](int i) const { return tensors_[static_cast<std::size_t>(i)]; }
  std::size_t size() const { return tensors_.size(); }
  auto begin() { return tensors_.begin(); }
  auto end() { return tensors_.end(); }
  auto begin() const { return tensors_.begin(); }
  auto end() const { return tensors_.end(); }

  const Tensor& get(const std::string& name) const {
    for (const auto& t : tensors_)
      if (t.name == name) return t;
    throw usage_error("no parameter named '" + name + "'");
  }
  Tensor& get(const std::string& name) { return const_cast<Tensor&>(std::as_const(*this).get(name)); }

  std::size_t count() const {
    std::size_t n = 0;
    for (const auto& t : tensors_) n += static_cast<std::size_t>(t.value.size());
    return n;
  }

  void zero_grad() {
    for (auto& t : tensors_) t.grad.setZero();
  }

  Vec flat_values() const { return flatten([](const Tensor& t) -> const Mat& { return t.value; }); }
  Vec flat_grads() const { return flatten([](const Tensor& t) -> const Mat& { return t.grad; }); }

  void set_flat_values(const Vec& v) {
    if (static_cast<std::size_t>(v.size()) != count()) throw data_error("parameter vector has wrong length");
    Eigen::Index off = 0;
    for (auto& t : tensors_) {
      t.value = Eigen::Map<const Mat>(v.data() + off, t.value.rows(), t.value.cols());
      off += t.value.size();
    }
  }

  nlohmann::json shapes() const {
    auto j = nlohmann::json::array();
    for (const auto& t : tensors_) j.push_back({{"name", t.name}, {"shape", {t.value.rows(), t.value.cols()}}});
    return j;
  }

 private:
  template <class F>
  Vec flatten(F pick) const {
    Vec out(static_cast<Eigen::Index>(count()));
    Eigen::Index off = 0;
    for (const auto& t : tensors_) {
      const Mat& m = pick(t);
      out.segment(off, m.size()) = Eigen::Map<const Vec>(m.data(), m.size());
      off += m.size();
    }
    return out;
  }

  std::vector<Tensor> tensors_;
};

/// Kaiming-uniform for ReLU layers: U(-b, b), b = sqrt(6 / fan_in).
inline void kaiming_uniform(Mat& m, Eigen::Index fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(std::max<Eigen::Index>(fan_in, 1)));
  std::uniform_real_distribution<double> u(-bound, bound);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
}

inline void bias_uniform(Mat& m, Eigen::Index fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<Eigen::Index>(fan_in, 1)));
  std::uniform_real_distribution<double> u(-bound, bound);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
}

inline Mat relu(const Mat& z) { return z.cwiseMax(0.0); }

/// dZ = dY where Z > 0, else 0.
inline Mat relu_backward(const Mat& z, const Mat& dy) { return (z.array() > 0.0).select(dy, 0.0); }

/// Y = X W + b with W (in x out) and b (1 x out).
struct Linear {
  int weight = -1;
  int bias = -1;
  Eigen::Index in = 0, out = 0;

  static Linear make(ParamSet& ps, const std::string& name, Eigen::Index in, Eigen::Index out, bool with_bias = true) {
    Linear l;
    l.in = in;
    l.out = out;
    l.weight = ps.add(name + ".weight", in, out);
    if (with_bias) l.bias = ps.add(name + ".bias", 1, out);
    return l;
  }

  void init(ParamSet& ps, Rng& rng) const {
    kaiming_uniform(ps[weight].value, in, rng);
    if (bias >= 0) bias_uniform(ps[bias].value, in, rng);
  }

  const Mat& w(const ParamSet& ps) const { return ps[weight].value; }

  Mat forward(const ParamSet& ps, const Mat& x) const {
    if (x.cols() != in) throw data_error("linear layer input has wrong width");
    Mat y = x * ps[weight].value;
    if (bias >= 0) y.rowwise() += ps[bias].value.row(0);
    return y;
  }

  /// Accumulates parameter gradients; writes the input gradient when asked.
  void backward(ParamSet& ps, const Mat& x, const Mat& dy, Mat* dx) const {
    ps[weight].grad.noalias() += x.transpose() * dy;
    if (bias >= 0) ps[bias].grad.row(0) += dy.colwise().sum();
    if (dx) dx->noalias() = dy * ps[weight].value.transpose();
  }
};

/// Stack of Linear layers with ReLU after every layer except optionally the
/// last.
struct Mlp {
  std::vector<Linear> layers;
  bool relu_last = true;

  struct Cache {
    std::vector<Mat> inputs;  // input of each layer
    std::vector<Mat> pre;     // pre-activation of each layer
  };

  static Mlp make(ParamSet& ps, const std::string& name, const std::vector<Eigen::Index>& widths, bool relu_last) {
    Mlp m;
    m.relu_last = relu_last;
    for (std::size_t i = 0; i + 1 < widths.size(); ++i)
      m.layers.push_back(Linear::make(ps, name + "." + std::to_string(i), widths[i], widths[i + 1]));
    return m;
  }

  void init(ParamSet& ps, Rng& rng) const {
    for (const auto& l : layers) l.init(ps, rng);
  }

  bool activated(std::size_t i) const { return i + 1 < layers.size() || relu_last; }

  Mat forward(const ParamSet& ps, const Mat& x, Cache* cache) const {
    Mat h = x;
    if (cache) {
      cache->inputs.clear();
      cache->pre.clear();
    }
    for (std::size_t i = 0; i < layers.size(); ++i) {
      Mat z = layers[i].forward(ps, h);
      if (cache) {
        cache->inputs.push_back(std::move(h));
        cache->pre.push_back(z);
      }
      h = activated(i) ? relu(z) : std::move(z);
    }
    return h;
  }

  Mat backward(ParamSet& ps, const Cache& cache, const Mat& dy) const {
    Mat d = dy;
    for (std::size_t i = layers.size(); i-- > 0;) {
      if (activated(i)) d = relu_backward(cache.pre[i], d);
      Mat dx;
      layers[i].backward(ps, cache.inputs[i], d, &dx);
      d = std::move(dx);
    }
    return d;
  }
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam over a ParamSet.
class Adam {
 public:
  explicit Adam(const ParamSet& ps, AdamConfig cfg = {}) : cfg_(cfg) {
    for (const auto& t : ps) {
      m_.push_back(Mat::Zero(t.value.rows(), t.value.cols()));
      v_.push_back(Mat::Zero(t.value.rows(), t.value.cols()));
    }
  }

  void step(ParamSet& ps, double lr) {
    if (ps.size() != m_.size()) throw usage_error("optimizer state does not match parameters");
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < m_.size(); ++i) {
      auto& p = ps[static_cast<int>(i)];
      m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * p.grad;
      v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * p.grad.cwiseAbs2();
      p.value.array() -= lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + cfg_.eps);
    }
  }

  long steps() const { return t_; }
  void set_steps(long t) { t_ = t; }
  std::vector<Mat>& first_moment() { return m_; }
  std::vector<Mat>& second_moment() { return v_; }
  const std::vector<Mat>& first_moment() const { return m_; }
  const std::vector<Mat>& second_moment() const { return v_; }

 private:
  AdamConfig cfg_;
  std::vector<Mat> m_, v_;
  long t_ = 0;
};

inline double sigmoid(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

inline void require_finite(const Mat& m, const char* what) {
  if (!m.allFinite()) throw numeric_error(std::string("non-finite values in ") + what);
}

}  // namespace edgegrasp::nn
