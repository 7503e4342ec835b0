#pragma once

// Class-balanced binary cross-entropy on sigmoid scores.

#include "edgegrasp/nn/params.hpp"

#include <span>

namespace edgegrasp::nn {

inline constexpr double kProbClamp = 1e-7;

/// Per-edge weights B / (2 count_c); all ones when a class is absent.
inline std::vector<double> balanced_weights(std::span<const int> labels) {
  const std::size_t b = labels.size();
  std::size_t pos = 0;
  for (int y : labels) {
    if (y != 0 && y != 1) throw data_error("labels must be 0 or 1");
    pos += static_cast<std::size_t>(y);
  }
  const std::size_t neg = b - pos;
  std::vector<double> w(b, 1.0);
  if (pos == 0 || neg == 0) return w;
  const double wp = static_cast<double>(b) / (2.0 * static_cast<double>(pos));
  const double wn = static_cast<double>(b) / (2.0 * static_cast<double>(neg));
  for (std::size_t i = 0; i < b; ++i) w[i] = labels[i] ? wp : wn;
  return w;
}

inline double clamp_prob(double p) { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }

inline double bce_term(double p, int y) {
  const double q = clamp_prob(p);
  return y ? -std::log(q) : -std::log(1.0 - q);
}

/// Weighted mean BCE with per-edge `weights` normalized by `batch_size`.
inline double weighted_bce(std::span<const double> scores, std::span<const int> labels,
                           std::span<const double> weights, std::size_t batch_size) {
  if (scores.size() != labels.size() || weights.size() != labels.size())
    throw usage_error("scores, labels and weights differ in length");
  if (batch_size == 0) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) s += weights[i] * bce_term(scores[i], labels[i]);
  return s / static_cast<double>(batch_size);
}

inline double balanced_bce_loss(std::span<const double> scores, std::span<const int> labels) {
  const auto w = balanced_weights(labels);
  return weighted_bce(scores, labels, w, labels.size());
}

/// d(weight * bce(sigmoid(z), y) / batch_size) / dz; zero where the clamp is
/// active.
inline double bce_logit_grad(double logit, int y, double weight, std::size_t batch_size) {
  const double p = sigmoid(logit);
  if (p < kProbClamp || p > 1.0 - kProbClamp) return 0.0;
  return weight * (p - static_cast<double>(y)) / static_cast<double>(batch_size);
}

}  // namespace edgegrasp::nn
