#ifndef DEPTHPOSE_FRAME_HPP_
#define DEPTHPOSE_FRAME_HPP_

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

#include "depthpose/tensor.hpp"

namespace depthpose {

/// Focal lengths in pixels. The principal point is taken to be the image
/// centre, ((W-1)/2, (H-1)/2), in pixel-centre coordinates.
struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;

  void validate() const {
    if (!(fx > 0.0) || !(fy > 0.0) || !std::isfinite(fx) ||
        !std::isfinite(fy)) {
      throw std::invalid_argument("camera focal lengths must be positive");
    }
  }
  friend bool operator==(const CameraIntrinsics&,
                         const CameraIntrinsics&) = default;
};

/// Depth image in millimetres; 0 marks an invalid measurement.
struct DepthFrame {
  std::string frame_id;
  CameraIntrinsics intrinsics;
  Tensor<float> depth;  // [height, width]

  DepthFrame() = default;
  DepthFrame(std::string id, CameraIntrinsics intr, Tensor<float> d)
      : frame_id(std::move(id)), intrinsics(intr), depth(std::move(d)) {
    require_rank(depth.shape(), 2, "depth frame");
    for (float v : depth.values()) {
      if (!(v >= 0.0f) || !std::isfinite(v)) {
        throw std::invalid_argument("depth frame " + frame_id +
                                    " holds a negative or non-finite value");
      }
    }
  }

  std::size_t width() const { return depth.extent(1); }
  std::size_t height() const { return depth.extent(0); }
  float at(std::size_t x, std::size_t y) const {
    return depth[y * width() + x];
  }
};

}  // namespace depthpose

#endif  // DEPTHPOSE_FRAME_HPP_
