#ifndef DEPTHPOSE_POSENET_HPP_
#define DEPTHPOSE_POSENET_HPP_

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "depthpose/layers.hpp"
#include "depthpose/params.hpp"
#include "depthpose/pose.hpp"
#include "depthpose/rng.hpp"
#include "depthpose/tensor.hpp"

namespace depthpose {

enum class LayerKind { Conv, Dense };

struct LayerPlan {
  std::string_view name;
  LayerKind kind;
  std::size_t in;      // input channels / features
  std::size_t out;     // filters / neurons
  std::size_t kernel;  // square kernel side, conv only
  bool pool_after;
};

/// The regression network: five valid convolutions and three dense layers,
/// every one followed by tanh, with 2x2 max pooling after the first three
/// convolutions.
inline constexpr std::size_t kInputSide = 64;
inline constexpr std::size_t kOutputCount = 3;
inline constexpr std::array<LayerPlan, 8> kArchitecture = {{
    {"conv1", LayerKind::Conv, 1, 30, 5, true},
    {"conv2", LayerKind::Conv, 30, 30, 5, true},
    {"conv3", LayerKind::Conv, 30, 30, 4, true},
    {"conv4", LayerKind::Conv, 30, 30, 3, false},
    {"conv5", LayerKind::Conv, 30, 120, 3, false},
    {"fc1", LayerKind::Dense, 120, 120, 0, false},
    {"fc2", LayerKind::Dense, 120, 84, 0, false},
    {"fc3", LayerKind::Dense, 84, 3, 0, false},
}};
inline constexpr std::size_t kConvLayers = 5;

/// Spatial side after the input and after every conv / pool stage.
constexpr std::array<std::size_t, 9> spatial_trace() {
  std::array<std::size_t, 9> t{};
  std::size_t n = 0, side = kInputSide;
  t[n++] = side;
  for (std::size_t i = 0; i < kConvLayers; ++i) {
    side = side - kArchitecture[i].kernel + 1;
    t[n++] = side;
    if (kArchitecture[i].pool_after) {
      side /= 2;
      t[n++] = side;
    }
  }
  return t;
}

constexpr bool architecture_closes() {
  constexpr auto t = spatial_trace();
  constexpr std::array<std::size_t, 9> expected = {64, 60, 30, 26, 13,
                                                   10, 5,  3,  1};
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] != expected[i]) return false;
  }
  std::size_t pools = 0;
  for (std::size_t i = 0; i < kConvLayers; ++i) {
    if (kArchitecture[i].pool_after) ++pools;
    if (i > 0 && kArchitecture[i].in != kArchitecture[i - 1].out) return false;
  }
  return pools == 3 && kArchitecture[kConvLayers].in ==
                           kArchitecture[kConvLayers - 1].out &&
         kArchitecture.back().out == kOutputCount;
}
static_assert(architecture_closes(),
              "architecture no longer maps 1x64x64 to 120x1x1 before fc1");

inline Shape weight_shape(const LayerPlan& l) {
  if (l.kind == LayerKind::Conv) return {l.out, l.in, l.kernel, l.kernel};
  return {l.out, l.in};
}

inline std::size_t fan_in(const LayerPlan& l) {
  return l.kind == LayerKind::Conv ? l.in * l.kernel * l.kernel : l.in;
}

/// FNV-1a over layer names and parameter shapes.
inline std::uint64_t fingerprint_of_shapes(
    const std::vector<std::pair<std::string, std::pair<Shape, Shape>>>&
        layers) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::string_view s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& [name, shapes] : layers) {
    mix(name);
    mix(":");
    mix(shape_string(shapes.first));
    mix(shape_string(shapes.second));
    mix(";");
  }
  return h;
}

inline std::uint64_t architecture_fingerprint() {
  std::vector<std::pair<std::string, std::pair<Shape, Shape>>> v;
  for (const auto& l : kArchitecture) {
    v.push_back({std::string(l.name), {weight_shape(l), Shape{l.out}}});
  }
  return fingerprint_of_shapes(v);
}

template <typename T>
std::uint64_t fingerprint_of(const NetworkParams<T>& p) {
  std::vector<std::pair<std::string, std::pair<Shape, Shape>>> v;
  for (const auto& l : p.layers) {
    v.push_back({l.name, {l.weights.shape(), l.bias.shape()}});
  }
  return fingerprint_of_shapes(v);
}

/// Throws naming the first layer that deviates from kArchitecture.
template <typename T>
void validate_params(const NetworkParams<T>& p) {
  if (p.layers.size() != kArchitecture.size()) {
    throw ShapeError("network has " + std::to_string(p.layers.size()) +
                     " layers, architecture expects " +
                     std::to_string(kArchitecture.size()));
  }
  for (std::size_t i = 0; i < kArchitecture.size(); ++i) {
    const auto& plan = kArchitecture[i];
    const auto& l = p.layers[i];
    const std::string name(plan.name);
    if (l.name != name) {
      throw ShapeError("layer " + std::to_string(i) + " is '" + l.name +
                       "', expected " + name);
    }
    require_shape(l.weights.shape(), weight_shape(plan), name + " weights");
    require_shape(l.bias.shape(), {plan.out}, name + " bias");
    require_shape(l.momentum_w.shape(), weight_shape(plan),
                  name + " weight momentum");
    require_shape(l.momentum_b.shape(), {plan.out}, name + " bias momentum");
  }
}

inline std::size_t architecture_parameter_count() {
  std::size_t n = 0;
  for (const auto& l : kArchitecture) {
    n += shape_volume(weight_shape(l)) + l.out;
  }
  return n;
}

/// Uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)], momentum zeroed.
template <typename T>
NetworkParams<T> build_network(std::uint64_t seed) {
  Rng rng(seed);
  NetworkParams<T> p;
  for (const auto& plan : kArchitecture) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in(plan)));
    Tensor<T> w(weight_shape(plan));
    Tensor<T> b({plan.out});
    for (T& v : w.values()) v = static_cast<T>(rng.uniform(-bound, bound));
    for (T& v : b.values()) v = static_cast<T>(rng.uniform(-bound, bound));
    p.layers.emplace_back(std::string(plan.name), std::move(w), std::move(b));
  }
  return p;
}

/// Everything backward() needs from one forward pass.
template <typename T>
struct ActivationCache {
  std::vector<Tensor<T>> inputs;       // per layer; dense inputs flattened
  std::vector<Tensor<T>> activations;  // tanh output, before pooling
  std::vector<PoolIndices> pools;      // empty argmax when not pooled
};

template <typename T>
struct ForwardPass {
  PoseNormalized prediction;
  ActivationCache<T> cache;
};

namespace detail {

template <typename T>
void check_patch(const Tensor<T>& patch) {
  require_shape(patch.shape(), {1, kInputSide, kInputSide}, "network input");
}

template <typename T>
PoseNormalized to_pose(const Tensor<T>& out) {
  return {static_cast<double>(out[0]), static_cast<double>(out[1]),
          static_cast<double>(out[2])};
}

template <typename T>
Tensor<T> run_network(const NetworkParams<T>& params, const Tensor<T>& patch,
                      ActivationCache<T>* cache) {
  validate_params(params);
  check_patch(patch);
  Tensor<T> x = patch;
  for (std::size_t i = 0; i < kArchitecture.size(); ++i) {
    const auto& plan = kArchitecture[i];
    const auto& layer = params.layers[i];
    if (plan.kind == LayerKind::Dense && x.rank() != 1) {
      x = std::move(x).reshaped({x.size()});
    }
    Tensor<T> z = plan.kind == LayerKind::Conv
                      ? conv2d_forward(x, layer.weights, layer.bias)
                      : dense_forward(x, layer.weights, layer.bias);
    Tensor<T> a = tanh_forward(z);
    if (cache) cache->inputs.push_back(std::move(x));
    if (plan.pool_after) {
      auto pooled = maxpool2_forward(a);
      x = std::move(pooled.output);
      if (cache) {
        cache->activations.push_back(std::move(a));
        cache->pools.push_back(std::move(pooled.indices));
      }
    } else {
      if (cache) {
        cache->activations.push_back(a);
        cache->pools.push_back({});
      }
      x = std::move(a);
    }
  }
  return x;
}

}  // namespace detail

/// Inference: returns normalized (pitch, roll, yaw), each in (-1, 1).
template <typename T>
PoseNormalized forward(const NetworkParams<T>& params, const Tensor<T>& patch) {
  return detail::to_pose(detail::run_network<T>(params, patch, nullptr));
}

template <typename T>
ForwardPass<T> forward_training(const NetworkParams<T>& params,
                                const Tensor<T>& patch) {
  ForwardPass<T> pass;
  const Tensor<T> out = detail::run_network(params, patch, &pass.cache);
  pass.prediction = detail::to_pose(out);
  return pass;
}

/// FNV-1a hash of every pooling argmax; identifies the smooth region of the
/// network function the cached pass was evaluated in.
template <typename T>
std::uint64_t pool_signature(const ActivationCache<T>& cache,
                             std::uint64_t h = 1469598103934665603ull) {
  for (const auto& p : cache.pools) {
    for (std::size_t i : p.argmax) {
      h ^= static_cast<std::uint64_t>(i);
      h *= 1099511628211ull;
    }
  }
  return h;
}

/// Gradients of a scalar loss with respect to every parameter, given
/// d_output = dL/d(prediction).
template <typename T>
Gradients<T> backward(const NetworkParams<T>& params,
                      const ActivationCache<T>& cache,
                      const PoseNormalized& d_output) {
  validate_params(params);
  const std::size_t n = kArchitecture.size();
  if (cache.inputs.size() != n || cache.activations.size() != n ||
      cache.pools.size() != n) {
    throw std::invalid_argument(
        "backward: activation cache does not match the network");
  }
  Gradients<T> grads(n);
  Tensor<T> d({kOutputCount});
  for (std::size_t k = 0; k < kOutputCount; ++k) {
    d[k] = static_cast<T>(d_output[k]);
  }
  for (std::size_t i = n; i-- > 0;) {
    const auto& plan = kArchitecture[i];
    const auto& layer = params.layers[i];
    if (plan.pool_after) d = maxpool2_backward(cache.pools[i], d);
    if (d.shape() != cache.activations[i].shape()) {
      d = std::move(d).reshaped(cache.activations[i].shape());
    }
    Tensor<T> dz = tanh_backward(cache.activations[i], d);
    LayerGrads<T> g =
        plan.kind == LayerKind::Conv
            ? conv2d_backward(cache.inputs[i], layer.weights, dz, i > 0)
            : dense_backward(cache.inputs[i], layer.weights, dz);
    grads[i] = {std::move(g.d_weights), std::move(g.d_bias)};
    d = std::move(g.d_input);
  }
  return grads;
}

// ---------------------------------------------------------------------------
// Parameter files
//
//   "DPOSENET"  u32 version  u64 fingerprint  u32 layer_count
//   per layer:  u32 name_len, name bytes,
//               weights: u32 rank, u32 dims[rank], f32 values
//               bias:    u32 rank, u32 dims[rank], f32 values
//
// All integers and floats little-endian.

inline constexpr char kParamMagic[8] = {'D', 'P', 'O', 'S', 'E', 'N', 'E', 'T'};
inline constexpr std::uint32_t kParamVersion = 1;

class ParamFileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void put_u32(std::vector<char>& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>(v >> (8 * i)));
}
inline void put_u64(std::vector<char>& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>(v >> (8 * i)));
}

template <typename T>
void put_tensor(std::vector<char>& buf, const Tensor<T>& t) {
  put_u32(buf, static_cast<std::uint32_t>(t.rank()));
  for (std::size_t e : t.shape()) put_u32(buf, static_cast<std::uint32_t>(e));
  for (T v : t.values()) put_u32(buf, std::bit_cast<std::uint32_t>(
                                          static_cast<float>(v)));
}

class ByteReader {
 public:
  explicit ByteReader(std::vector<char> bytes) : bytes_(std::move(bytes)) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= std::uint32_t(static_cast<unsigned char>(bytes_[pos_ + i]))
           << (8 * i);
    }
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    const std::uint64_t lo = u32();
    return lo | (std::uint64_t(u32()) << 32);
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s(bytes_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t position() const { return pos_; }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) {
      throw ParamFileError("truncated parameter file at byte " +
                           std::to_string(pos_));
    }
  }
  std::vector<char> bytes_;
  std::size_t pos_ = 0;
};

inline Tensor<float> read_tensor(ByteReader& r, const Shape& expected,
                                 const std::string& what) {
  const std::uint32_t rank = r.u32();
  if (rank == 0 || rank > 4) {
    throw ParamFileError(what + ": invalid rank " + std::to_string(rank));
  }
  Shape shape(rank);
  for (auto& e : shape) e = r.u32();
  if (shape != expected) {
    throw ParamFileError(what + ": shape " + shape_string(shape) +
                         " does not match architecture " +
                         shape_string(expected));
  }
  std::vector<float> values(shape_volume(shape));
  for (float& v : values) v = std::bit_cast<float>(r.u32());
  return Tensor<float>(std::move(shape), std::move(values));
}

}  // namespace detail

/// Writes weights and biases as float32; momentum is not persisted.
template <typename T>
void save_params(const NetworkParams<T>& params,
                 const std::filesystem::path& path) {
  std::vector<char> buf(std::begin(kParamMagic), std::end(kParamMagic));
  detail::put_u32(buf, kParamVersion);
  detail::put_u64(buf, fingerprint_of(params));
  detail::put_u32(buf, static_cast<std::uint32_t>(params.layers.size()));
  for (const auto& l : params.layers) {
    detail::put_u32(buf, static_cast<std::uint32_t>(l.name.size()));
    buf.insert(buf.end(), l.name.begin(), l.name.end());
    detail::put_tensor(buf, l.weights);
    detail::put_tensor(buf, l.bias);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ParamFileError("cannot open " + path.string() + " for writing");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw ParamFileError("write failed for " + path.string());
}

/// Loads and validates against kArchitecture; momentum buffers start at zero.
inline NetworkParams<float> load_params(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParamFileError("cannot open parameter file " + path.string());
  detail::ByteReader r{std::vector<char>(std::istreambuf_iterator<char>(in),
                                         std::istreambuf_iterator<char>())};
  if (r.str(sizeof kParamMagic) !=
      std::string(kParamMagic, sizeof kParamMagic)) {
    throw ParamFileError(path.string() + " is not a parameter file");
  }
  const std::uint32_t version = r.u32();
  if (version != kParamVersion) {
    throw ParamFileError("unsupported parameter file version " +
                         std::to_string(version));
  }
  const std::uint64_t fingerprint = r.u64();
  const std::uint32_t count = r.u32();
  if (count != kArchitecture.size()) {
    throw ParamFileError("parameter file has " + std::to_string(count) +
                         " layers, architecture expects " +
                         std::to_string(kArchitecture.size()));
  }
  NetworkParams<float> params;
  for (const auto& plan : kArchitecture) {
    const std::string expected_name(plan.name);
    const std::uint32_t name_len = r.u32();
    if (name_len > 64) throw ParamFileError("corrupt layer name length");
    const std::string name = r.str(name_len);
    if (name != expected_name) {
      throw ParamFileError("layer '" + name + "' found where " +
                           expected_name + " was expected");
    }
    Tensor<float> w =
        detail::read_tensor(r, weight_shape(plan), expected_name + " weights");
    Tensor<float> b =
        detail::read_tensor(r, {plan.out}, expected_name + " bias");
    params.layers.emplace_back(expected_name, std::move(w), std::move(b));
  }
  if (!r.at_end()) {
    throw ParamFileError("trailing bytes after layer data at byte " +
                         std::to_string(r.position()));
  }
  if (fingerprint != architecture_fingerprint()) {
    throw ParamFileError("architecture fingerprint mismatch");
  }
  return params;
}

}  // namespace depthpose

#endif  // DEPTHPOSE_POSENET_HPP_
