#ifndef DEPTHPOSE_PARAMS_HPP_
#define DEPTHPOSE_PARAMS_HPP_

#include <cstddef>
#include <string>
#include <vector>

#include "depthpose/tensor.hpp"

namespace depthpose {

/// One trainable layer: weights, bias and their momentum buffers.
template <typename T>
struct ParamLayer {
  std::string name;
  Tensor<T> weights;
  Tensor<T> bias;
  Tensor<T> momentum_w;
  Tensor<T> momentum_b;

  ParamLayer() = default;
  ParamLayer(std::string layer_name, Tensor<T> w, Tensor<T> b)
      : name(std::move(layer_name)),
        weights(std::move(w)),
        bias(std::move(b)),
        momentum_w(weights.shape()),
        momentum_b(bias.shape()) {}

  std::size_t parameter_count() const { return weights.size() + bias.size(); }
};

/// Ordered collection of trainable layers.
template <typename T>
struct NetworkParams {
  std::vector<ParamLayer<T>> layers;

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.parameter_count();
    return n;
  }
};

template <typename T>
struct ParamGrads {
  Tensor<T> d_weights;
  Tensor<T> d_bias;
};

template <typename T>
using Gradients = std::vector<ParamGrads<T>>;

template <typename T>
Gradients<T> zero_gradients(const NetworkParams<T>& params) {
  Gradients<T> g;
  g.reserve(params.layers.size());
  for (const auto& l : params.layers) {
    g.push_back({Tensor<T>(l.weights.shape()), Tensor<T>(l.bias.shape())});
  }
  return g;
}

template <typename T>
void accumulate(Gradients<T>& into, const Gradients<T>& g) {
  if (into.size() != g.size()) {
    throw ShapeError("gradient sets differ in layer count");
  }
  for (std::size_t i = 0; i < g.size(); ++i) {
    accumulate(into[i].d_weights, g[i].d_weights);
    accumulate(into[i].d_bias, g[i].d_bias);
  }
}

template <typename To, typename From>
NetworkParams<To> params_cast(const NetworkParams<From>& p) {
  NetworkParams<To> out;
  for (const auto& l : p.layers) {
    ParamLayer<To> c(l.name, tensor_cast<To>(l.weights),
                     tensor_cast<To>(l.bias));
    c.momentum_w = tensor_cast<To>(l.momentum_w);
    c.momentum_b = tensor_cast<To>(l.momentum_b);
    out.layers.push_back(std::move(c));
  }
  return out;
}

}  // namespace depthpose

#endif  // DEPTHPOSE_PARAMS_HPP_
