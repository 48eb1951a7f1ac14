#ifndef DEPTHPOSE_SGD_HPP_
#define DEPTHPOSE_SGD_HPP_

#include <cmath>
#include <stdexcept>
#include <string>

#include "depthpose/params.hpp"

namespace depthpose {

/**
 * Momentum SGD hyperparameters. The defaults read the published decay and
 * momentum values as 5e-4 and 0.9; the learning rate is normally overridden
 * per epoch by the training schedule.
 */
struct SgdConfig {
  double learning_rate = 0.1;
  double momentum = 0.9;
  double weight_decay = 5e-4;

  void validate() const {
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
      throw std::invalid_argument("sgd: learning rate must be >= 0");
    }
    if (!(momentum >= 0.0 && momentum < 1.0)) {
      throw std::invalid_argument("sgd: momentum must lie in [0, 1)");
    }
    if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) {
      throw std::invalid_argument("sgd: weight decay must be >= 0");
    }
  }
};

class NonFiniteGradient : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

template <typename T>
void momentum_update(Tensor<T>& w, Tensor<T>& v, const Tensor<T>& g,
                     const SgdConfig& cfg) {
  const T lr = static_cast<T>(cfg.learning_rate);
  const T mu = static_cast<T>(cfg.momentum);
  const T wd = static_cast<T>(cfg.weight_decay);
  T* wp = w.data();
  T* vp = v.data();
  const T* gp = g.data();
  for (std::size_t i = 0, n = w.size(); i < n; ++i) {
    vp[i] = mu * vp[i] - lr * (gp[i] + wd * wp[i]);
    wp[i] += vp[i];
  }
}

}  // namespace detail

/// v <- momentum * v - lr * (g + decay * w);  w <- w + v.
/// Gradients are validated for every layer before any parameter changes.
template <typename T>
void sgd_step(NetworkParams<T>& params, const Gradients<T>& grads,
              const SgdConfig& cfg) {
  cfg.validate();
  if (grads.size() != params.layers.size()) {
    throw ShapeError("sgd_step: " + std::to_string(grads.size()) +
                     " gradient entries for " +
                     std::to_string(params.layers.size()) + " layers");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    const auto& layer = params.layers[i];
    require_shape(grads[i].d_weights.shape(), layer.weights.shape(),
                  "sgd_step " + layer.name + " weights");
    require_shape(grads[i].d_bias.shape(), layer.bias.shape(),
                  "sgd_step " + layer.name + " bias");
    if (!grads[i].d_weights.all_finite() || !grads[i].d_bias.all_finite()) {
      throw NonFiniteGradient("sgd_step: non-finite gradient in layer " +
                              layer.name);
    }
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    auto& layer = params.layers[i];
    detail::momentum_update(layer.weights, layer.momentum_w, grads[i].d_weights,
                            cfg);
    detail::momentum_update(layer.bias, layer.momentum_b, grads[i].d_bias, cfg);
  }
}

}  // namespace depthpose

#endif  // DEPTHPOSE_SGD_HPP_
