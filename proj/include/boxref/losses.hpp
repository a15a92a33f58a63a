#pragma once

#include <cmath>
#include <stdexcept>

#include "boxref/tensor.hpp"

namespace boxref {

struct LossConfig {
  double lambda_mask = 1000.0;
  void validate() const {
    if (lambda_mask < 0) throw std::invalid_argument("lambda_mask must be nonnegative");
  }
};

/// Mean squared error over all components, in normalized box units.
template <typename T>
T box_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  if (!pred.same_shape(target)) throw std::invalid_argument("box_loss: shape mismatch");
  double acc = 0;
  for (std::size_t i = 0; i < pred.numel(); ++i) {
    const double d = static_cast<double>(pred[i]) - target[i];
    acc += d * d;
  }
  return static_cast<T>(acc / static_cast<double>(pred.numel()));
}

template <typename T>
Tensor<T> box_loss_grad(const Tensor<T>& pred, const Tensor<T>& target) {
  Tensor<T> g(pred.shape());
  const T scale = T(2) / static_cast<T>(pred.numel());
  for (std::size_t i = 0; i < pred.numel(); ++i) g[i] = scale * (pred[i] - target[i]);
  return g;
}

/// Mean per-pixel binary cross-entropy; probabilities clamped to [eps, 1-eps].
template <typename T>
T mask_loss(const Tensor<T>& probs, const Tensor<T>& target, double eps = 1e-7) {
  if (!probs.same_shape(target)) throw std::invalid_argument("mask_loss: shape mismatch");
  double acc = 0;
  for (std::size_t i = 0; i < probs.numel(); ++i) {
    const double p = std::clamp(static_cast<double>(probs[i]), eps, 1.0 - eps);
    const double t = target[i];
    acc -= t * std::log(p) + (1.0 - t) * std::log(1.0 - p);
  }
  return static_cast<T>(acc / static_cast<double>(probs.numel()));
}

/// Gradient of mean BCE w.r.t. the pre-sigmoid logits: (p - t) / count.
template <typename T>
Tensor<T> mask_loss_grad_logits(const Tensor<T>& probs, const Tensor<T>& target) {
  Tensor<T> g(probs.shape());
  const T inv = T(1) / static_cast<T>(probs.numel());
  for (std::size_t i = 0; i < probs.numel(); ++i) g[i] = (probs[i] - target[i]) * inv;
  return g;
}

inline double total_loss(double box_l, double mask_l, const LossConfig& cfg) {
  return box_l + cfg.lambda_mask * mask_l;
}

}  // namespace boxref
