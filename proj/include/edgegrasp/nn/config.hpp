#pragma once

#include "edgegrasp/common.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace edgegrasp::nn {

enum class ModelKind { scalar, vector_neuron };

inline const char* kind_name(ModelKind k) { return k == ModelKind::scalar ? "scalar" : "vector_neuron"; }

inline ModelKind parse_model_kind(const std::string& s) {
  if (s == "scalar") return ModelKind::scalar;
  if (s == "vn" || s == "vector_neuron") return ModelKind::vector_neuron;
  throw usage_error("model must be 'scalar' or 'vn', got '" + s + "'");
}

/// Architecture hyperparameters shared by both model kinds. Widths count
/// scalar features for the scalar model and 3-vector channels for the
/// vector-neuron model.
struct ModelConfig {
  ModelKind kind = ModelKind::scalar;
  int k = 16;
  bool self_loop = true;
  // Second global stage sees [first-stage point features, h] instead of
  // [conv features, h].
  bool omega_concat_mlp1 = false;
  std::vector<int> conv_widths{64, 128, 256};
  int omega1 = 512;
  int omega2 = 512;
  std::vector<int> head_widths{256, 128, 64};
  int tnet_hidden = 128;  // vector-neuron only
  // Centered coordinates are multiplied by this before the first layer; the
  // default maps the default crop radius (half the gripper width) to 1.
  double position_scale = 25.0;

  static ModelConfig defaults(ModelKind kind) {
    ModelConfig c;
    c.kind = kind;
    if (kind == ModelKind::vector_neuron) {
      c.conv_widths = {32, 64, 128};
      c.omega1 = 256;
      c.omega2 = 256;
      c.head_widths = {512, 128, 64};
      c.tnet_hidden = 128;
    }
    return c;
  }

  /// Every hidden width multiplied by `mult` (at least 1).
  ModelConfig scaled(double mult) const {
    if (!(mult > 0)) throw usage_error("width multiplier must be positive");
    auto s = [mult](int w) { return std::max(1, static_cast<int>(std::lround(w * mult))); };
    ModelConfig c = *this;
    for (auto& w : c.conv_widths) w = s(w);
    for (auto& w : c.head_widths) w = s(w);
    c.omega1 = s(omega1);
    c.omega2 = s(omega2);
    c.tnet_hidden = s(tnet_hidden);
    return c;
  }

  void validate() const {
    if (k < 1) throw usage_error("k must be positive");
    if (conv_widths.empty()) throw usage_error("need at least one conv layer");
    auto positive = [](int w) { return w > 0; };
    if (!std::all_of(conv_widths.begin(), conv_widths.end(), positive) ||
        !std::all_of(head_widths.begin(), head_widths.end(), positive) || omega1 < 1 || omega2 < 1 ||
        tnet_hidden < 1)
      throw usage_error("layer widths must be positive");
    if (!(position_scale > 0) || !std::isfinite(position_scale)) throw usage_error("position scale must be positive");
  }

  nlohmann::json to_json() const {
    return {{"kind", kind_name(kind)},         {"k", k},
            {"self_loop", self_loop},         {"omega_concat_mlp1", omega_concat_mlp1},
            {"conv_widths", conv_widths},     {"omega1", omega1},
            {"omega2", omega2},               {"head_widths", head_widths},
            {"tnet_hidden", tnet_hidden},     {"position_scale", position_scale}};
  }

  static ModelConfig from_json(const nlohmann::json& j) {
    try {
      ModelConfig c;
      c.kind = parse_model_kind(j.at("kind").get<std::string>());
      c.k = j.at("k").get<int>();
      c.self_loop = j.at("self_loop").get<bool>();
      c.omega_concat_mlp1 = j.at("omega_concat_mlp1").get<bool>();
      c.conv_widths = j.at("conv_widths").get<std::vector<int>>();
      c.omega1 = j.at("omega1").get<int>();
      c.omega2 = j.at("omega2").get<int>();
      c.head_widths = j.at("head_widths").get<std::vector<int>>();
      c.tnet_hidden = j.at("tnet_hidden").get<int>();
      c.position_scale = j.at("position_scale").get<double>();
      c.validate();
      return c;
    } catch (const nlohmann::json::exception& e) {
      throw data_error(std::string("bad model config: ") + e.what());
    }
  }
};

}  // namespace edgegrasp::nn
