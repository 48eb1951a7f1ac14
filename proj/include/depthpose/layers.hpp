#ifndef DEPTHPOSE_LAYERS_HPP_
#define DEPTHPOSE_LAYERS_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "depthpose/tensor.hpp"

namespace depthpose {

/// Gradients of a parameterized layer. d_input is left empty when the caller
/// asked the backward pass to skip it.
template <typename T>
struct LayerGrads {
  Tensor<T> d_weights;
  Tensor<T> d_bias;
  Tensor<T> d_input;
};

namespace detail {

template <typename T>
void check_conv_shapes(const Tensor<T>& input, const Tensor<T>& weights,
                       const Tensor<T>& bias) {
  require_rank(input.shape(), 3, "conv2d input");
  require_rank(weights.shape(), 4, "conv2d weights");
  require_rank(bias.shape(), 1, "conv2d bias");
  if (weights.extent(1) != input.extent(0)) {
    throw ShapeError("conv2d: input " + shape_string(input.shape()) +
                     " has " + std::to_string(input.extent(0)) +
                     " channels but weights " +
                     shape_string(weights.shape()) + " expect " +
                     std::to_string(weights.extent(1)));
  }
  if (weights.extent(2) != weights.extent(3)) {
    throw ShapeError("conv2d: kernel must be square, weights " +
                     shape_string(weights.shape()));
  }
  if (weights.extent(2) > input.extent(1) ||
      weights.extent(3) > input.extent(2)) {
    throw ShapeError("conv2d: kernel of weights " +
                     shape_string(weights.shape()) +
                     " larger than input " + shape_string(input.shape()));
  }
  if (bias.extent(0) != weights.extent(0)) {
    throw ShapeError("conv2d: bias " + shape_string(bias.shape()) +
                     " does not match weights " +
                     shape_string(weights.shape()));
  }
}

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatrixMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;

/// Patch matrix [C_in*k*k, Ho*Wo]: row (c,i,j) holds input[c, y+i, x+j] for
/// every output position (y, x).
template <typename T>
RowMatrix<T> im2col(const Tensor<T>& input, std::size_t k) {
  const std::size_t c_in = input.extent(0), h = input.extent(1),
                    w = input.extent(2);
  const std::size_t ho = h - k + 1, wo = w - k + 1;
  RowMatrix<T> cols(c_in * k * k, ho * wo);
  T* dst = cols.data();
  for (std::size_t c = 0; c < c_in; ++c) {
    const T* plane = input.data() + c * h * w;
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j < k; ++j) {
        for (std::size_t y = 0; y < ho; ++y) {
          const T* src = plane + (y + i) * w + j;
          std::copy(src, src + wo, dst);
          dst += wo;
        }
      }
    }
  }
  return cols;
}

/// Adjoint of im2col: scatter-adds patch-matrix rows back into an image.
template <typename T>
void col2im_add(const RowMatrix<T>& cols, std::size_t k, Tensor<T>& image) {
  const std::size_t c_in = image.extent(0), h = image.extent(1),
                    w = image.extent(2);
  const std::size_t ho = h - k + 1, wo = w - k + 1;
  const T* src = cols.data();
  for (std::size_t c = 0; c < c_in; ++c) {
    T* plane = image.data() + c * h * w;
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j < k; ++j) {
        for (std::size_t y = 0; y < ho; ++y) {
          T* dst = plane + (y + i) * w + j;
          for (std::size_t x = 0; x < wo; ++x) dst[x] += src[x];
          src += wo;
        }
      }
    }
  }
}

}  // namespace detail

/**
 * Valid (unpadded) stride-1 2-D convolution.
 *
 *   out[o,y,x] = bias[o] + sum_{c,i,j} input[c,y+i,x+j] * weights[o,c,i,j]
 *
 * input is [C_in,H,W], weights [C_out,C_in,k,k], bias [C_out]; the result is
 * [C_out,H-k+1,W-k+1]. Lowered to one matrix product over the patch matrix.
 */
template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const Tensor<T>& weights,
                         const Tensor<T>& bias) {
  detail::check_conv_shapes(input, weights, bias);
  const std::size_t h = input.extent(1), w = input.extent(2);
  const std::size_t c_out = weights.extent(0), k = weights.extent(2);
  const std::size_t ho = h - k + 1, wo = w - k + 1;
  const std::size_t patch = weights.size() / c_out;

  const detail::RowMatrix<T> cols = detail::im2col(input, k);
  Tensor<T> out({c_out, ho, wo});
  detail::MatrixMap<T> out_m(out.data(), c_out, ho * wo);
  detail::ConstMatrixMap<T> w_m(weights.data(), c_out, patch);
  out_m.noalias() = w_m * cols;
  for (std::size_t o = 0; o < c_out; ++o) out_m.row(o).array() += bias[o];
  return out;
}

/// Adjoint of conv2d_forward. Pass need_input_grad = false for a first layer
/// whose input gradient is never consumed.
template <typename T>
LayerGrads<T> conv2d_backward(const Tensor<T>& input, const Tensor<T>& weights,
                              const Tensor<T>& upstream,
                              bool need_input_grad = true) {
  require_rank(input.shape(), 3, "conv2d input");
  require_rank(weights.shape(), 4, "conv2d weights");
  if (weights.extent(1) != input.extent(0) ||
      weights.extent(2) != weights.extent(3) ||
      weights.extent(2) > input.extent(1) ||
      weights.extent(3) > input.extent(2)) {
    throw ShapeError("conv2d_backward: weights " +
                     shape_string(weights.shape()) +
                     " incompatible with input " +
                     shape_string(input.shape()));
  }
  const std::size_t h = input.extent(1), w = input.extent(2);
  const std::size_t c_out = weights.extent(0), k = weights.extent(2);
  const std::size_t ho = h - k + 1, wo = w - k + 1;
  const std::size_t patch = weights.size() / c_out;
  require_shape(upstream.shape(), {c_out, ho, wo}, "conv2d_backward upstream");

  LayerGrads<T> g{Tensor<T>(weights.shape()), Tensor<T>({c_out}), {}};
  detail::ConstMatrixMap<T> up_m(upstream.data(), c_out, ho * wo);
  const detail::RowMatrix<T> cols = detail::im2col(input, k);

  detail::MatrixMap<T> dw_m(g.d_weights.data(), c_out, patch);
  dw_m.noalias() = up_m * cols.transpose();
  for (std::size_t o = 0; o < c_out; ++o) g.d_bias[o] = up_m.row(o).sum();

  if (need_input_grad) {
    g.d_input = Tensor<T>(input.shape());
    detail::ConstMatrixMap<T> w_m(weights.data(), c_out, patch);
    const detail::RowMatrix<T> d_cols = w_m.transpose() * up_m;
    detail::col2im_add(d_cols, k, g.d_input);
  }
  return g;
}

/// Flat input offsets of each pooling window's winner, plus the input shape
/// needed to scatter gradients back.
struct PoolIndices {
  Shape input_shape;
  std::vector<std::size_t> argmax;
};

template <typename T>
struct PoolResult {
  Tensor<T> output;
  PoolIndices indices;
};

/// 2x2 stride-2 max pooling. Ties go to the first element in scan order.
template <typename T>
PoolResult<T> maxpool2_forward(const Tensor<T>& input) {
  require_rank(input.shape(), 3, "maxpool2 input");
  const std::size_t c = input.extent(0), h = input.extent(1),
                    w = input.extent(2);
  if (h % 2 != 0 || w % 2 != 0) {
    throw ShapeError("maxpool2: spatial extents must be even, got " +
                     shape_string(input.shape()));
  }
  const std::size_t ho = h / 2, wo = w / 2;
  PoolResult<T> r{Tensor<T>({c, ho, wo}), {input.shape(), {}}};
  r.indices.argmax.resize(c * ho * wo);
  std::size_t n = 0;
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < ho; ++y) {
      for (std::size_t x = 0; x < wo; ++x, ++n) {
        const std::size_t base = (ch * h + 2 * y) * w + 2 * x;
        const std::size_t cand[4] = {base, base + 1, base + w, base + w + 1};
        std::size_t best = cand[0];
        for (int q = 1; q < 4; ++q) {
          if (input[cand[q]] > input[best]) best = cand[q];
        }
        r.output[n] = input[best];
        r.indices.argmax[n] = best;
      }
    }
  }
  return r;
}

template <typename T>
Tensor<T> maxpool2_backward(const PoolIndices& indices,
                            const Tensor<T>& upstream) {
  if (upstream.size() != indices.argmax.size()) {
    throw ShapeError("maxpool2_backward: upstream " +
                     shape_string(upstream.shape()) + " has " +
                     std::to_string(upstream.size()) + " values for " +
                     std::to_string(indices.argmax.size()) + " windows");
  }
  Tensor<T> d_input(indices.input_shape);
  for (std::size_t n = 0; n < upstream.size(); ++n) {
    const std::size_t at = indices.argmax[n];
    if (at >= d_input.size()) {
      throw std::out_of_range("maxpool2_backward: argmax index " +
                              std::to_string(at) + " outside input " +
                              shape_string(indices.input_shape));
    }
    d_input[at] += upstream[n];
  }
  return d_input;
}

template <typename T>
Tensor<T> tanh_forward(const Tensor<T>& input) {
  Tensor<T> out = input;
  for (T& v : out.values()) v = std::tanh(v);
  return out;
}

/// Takes the forward *output*: d/dx tanh(x) = 1 - tanh(x)^2.
template <typename T>
Tensor<T> tanh_backward(const Tensor<T>& output, const Tensor<T>& upstream) {
  require_shape(upstream.shape(), output.shape(), "tanh_backward upstream");
  Tensor<T> d = upstream;
  for (std::size_t i = 0; i < d.size(); ++i) {
    d[i] *= T(1) - output[i] * output[i];
  }
  return d;
}

/// out = weights * input + bias, with input [n_in], weights [n_out,n_in].
template <typename T>
Tensor<T> dense_forward(const Tensor<T>& input, const Tensor<T>& weights,
                        const Tensor<T>& bias) {
  require_rank(input.shape(), 1, "dense input");
  require_rank(weights.shape(), 2, "dense weights");
  const std::size_t n_out = weights.extent(0), n_in = weights.extent(1);
  if (input.extent(0) != n_in || bias.shape() != Shape{n_out}) {
    throw ShapeError("dense: input " + shape_string(input.shape()) +
                     ", weights " + shape_string(weights.shape()) +
                     ", bias " + shape_string(bias.shape()) + " disagree");
  }
  Tensor<T> out({n_out});
  for (std::size_t o = 0; o < n_out; ++o) {
    const T* row = weights.data() + o * n_in;
    T acc = bias[o];
    for (std::size_t i = 0; i < n_in; ++i) acc += row[i] * input[i];
    out[o] = acc;
  }
  return out;
}

template <typename T>
LayerGrads<T> dense_backward(const Tensor<T>& input, const Tensor<T>& weights,
                             const Tensor<T>& upstream) {
  require_rank(weights.shape(), 2, "dense weights");
  const std::size_t n_out = weights.extent(0), n_in = weights.extent(1);
  require_shape(input.shape(), {n_in}, "dense_backward input");
  require_shape(upstream.shape(), {n_out}, "dense_backward upstream");

  LayerGrads<T> g{Tensor<T>(weights.shape()), upstream, Tensor<T>({n_in})};
  for (std::size_t o = 0; o < n_out; ++o) {
    const T u = upstream[o];
    const T* row = weights.data() + o * n_in;
    T* drow = g.d_weights.data() + o * n_in;
    for (std::size_t i = 0; i < n_in; ++i) {
      drow[i] = u * input[i];
      g.d_input[i] += u * row[i];
    }
  }
  return g;
}

}  // namespace depthpose

#endif  // DEPTHPOSE_LAYERS_HPP_
