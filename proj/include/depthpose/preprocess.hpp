#ifndef DEPTHPOSE_PREPROCESS_HPP_
#define DEPTHPOSE_PREPROCESS_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "depthpose/frame.hpp"
#include "depthpose/pose.hpp"
#include "depthpose/posenet.hpp"
#include "depthpose/rng.hpp"
#include "depthpose/tensor.hpp"

namespace depthpose {

inline constexpr double kGenericFaceWidthMm = 300.0;

struct CropSize {
  int width = 0;
  int height = 0;
  friend bool operator==(const CropSize&, const CropSize&) = default;
};

/// Face box extents w, h = f * R / Z, rounded to the nearest pixel.
inline CropSize crop_window(const CameraIntrinsics& intr, double face_width_mm,
                            double distance_mm) {
  intr.validate();
  if (!(distance_mm > 0.0) || !std::isfinite(distance_mm)) {
    throw std::invalid_argument("invalid subject distance");
  }
  if (!(face_width_mm > 0.0)) {
    throw std::invalid_argument("face width must be positive");
  }
  const auto side = [&](double f) {
    return std::max(1, static_cast<int>(std::lround(f * face_width_mm /
                                                    distance_mm)));
  };
  return {side(intr.fx), side(intr.fy)};
}

/// Crop rectangle centred on (xc, yc), in pixel-centre coordinates.
struct CropSpec {
  double xc = 0.0;
  double yc = 0.0;
  int width = 0;
  int height = 0;
};

inline CropSpec make_crop(const CameraIntrinsics& intr, double xc, double yc,
                          double distance_mm,
                          double face_width_mm = kGenericFaceWidthMm) {
  const CropSize s = crop_window(intr, face_width_mm, distance_mm);
  return {xc, yc, s.width, s.height};
}

class DegeneratePatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline float median_of(std::vector<float> v) {
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  const float upper = *mid;
  const float lower = *std::max_element(v.begin(), mid);
  return 0.5f * (lower + upper);
}

inline float max_valid_depth(const DepthFrame& f) {
  float m = 0.0f;
  for (float v : f.depth.values()) m = std::max(m, v);
  return m;
}

}  // namespace detail

/**
 * Crops the rectangle described by `crop` and resamples it bilinearly to
 * 1x64x64 (raw millimetres, not standardized).
 *
 * Pixels of the rectangle that fall outside the frame read as the largest
 * valid depth in the frame (the background). Invalid pixels (0) inside the
 * rectangle read as the median of the valid pixels it covers.
 */
inline Tensor<double> extract_patch(const DepthFrame& frame,
                                    const CropSpec& crop) {
  const double w = static_cast<double>(frame.width());
  const double h = static_cast<double>(frame.height());
  if (!(crop.xc >= 0.0 && crop.xc <= w - 1.0 && crop.yc >= 0.0 &&
        crop.yc <= h - 1.0)) {
    throw std::out_of_range("crop centre (" + std::to_string(crop.xc) + ", " +
                            std::to_string(crop.yc) + ") outside frame " +
                            frame.frame_id);
  }
  if (crop.width <= 0 || crop.height <= 0) {
    throw std::invalid_argument("crop extents must be positive");
  }
  const double left = crop.xc - crop.width / 2.0;
  const double top = crop.yc - crop.height / 2.0;

  // Pixel index range touched by the rectangle, clipped to the frame.
  const long x0 = std::max(0L, static_cast<long>(std::floor(left)));
  const long y0 = std::max(0L, static_cast<long>(std::floor(top)));
  const long x1 = std::min(static_cast<long>(frame.width()) - 1,
                           static_cast<long>(std::ceil(left + crop.width)));
  const long y1 = std::min(static_cast<long>(frame.height()) - 1,
                           static_cast<long>(std::ceil(top + crop.height)));
  std::vector<float> valid;
  for (long y = y0; y <= y1; ++y) {
    for (long x = x0; x <= x1; ++x) {
      const float v = frame.at(x, y);
      if (v > 0.0f) valid.push_back(v);
    }
  }
  if (valid.empty()) {
    throw DegeneratePatch("no valid depth inside crop of " + frame.frame_id);
  }
  const double hole_fill = detail::median_of(std::move(valid));
  const double background = detail::max_valid_depth(frame);

  const auto fetch = [&](long x, long y) -> double {
    if (x < 0 || y < 0 || x >= static_cast<long>(frame.width()) ||
        y >= static_cast<long>(frame.height())) {
      return background;
    }
    const float v = frame.at(x, y);
    return v > 0.0f ? v : hole_fill;
  };

  Tensor<double> patch({1, kInputSide, kInputSide});
  const double sx = crop.width / static_cast<double>(kInputSide);
  const double sy = crop.height / static_cast<double>(kInputSide);
  for (std::size_t v = 0; v < kInputSide; ++v) {
    const double py = top + (v + 0.5) * sy - 0.5;
    const double fy = std::floor(py);
    const double ty = py - fy;
    const long iy = static_cast<long>(fy);
    for (std::size_t u = 0; u < kInputSide; ++u) {
      const double px = left + (u + 0.5) * sx - 0.5;
      const double fx = std::floor(px);
      const double tx = px - fx;
      const long ix = static_cast<long>(fx);
      double top_row = fetch(ix, iy);
      double bottom_row = ty > 0.0 ? fetch(ix, iy + 1) : 0.0;
      if (tx > 0.0) {
        top_row = (1.0 - tx) * top_row + tx * fetch(ix + 1, iy);
        if (ty > 0.0) {
          bottom_row = (1.0 - tx) * bottom_row + tx * fetch(ix + 1, iy + 1);
        }
      }
      patch(0, v, u) = ty > 0.0 ? (1.0 - ty) * top_row + ty * bottom_row
                                : top_row;
    }
  }
  return patch;
}

inline constexpr double kMinPatchVariance = 1e-8;

/// Zero mean, unit population variance.
inline Tensor<double> standardize(const Tensor<double>& patch) {
  const double n = static_cast<double>(patch.size());
  double mean = 0.0;
  for (double v : patch.values()) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : patch.values()) var += (v - mean) * (v - mean);
  var /= n;
  if (!(var > kMinPatchVariance)) {
    throw DegeneratePatch("degenerate depth patch");
  }
  const double inv = 1.0 / std::sqrt(var);
  Tensor<double> out = patch;
  for (double& v : out.values()) v = (v - mean) * inv;
  return out;
}

/// Largest absolute angle (degrees) mapped to +-1.
struct AngleRange {
  double pitch_max = 90.0;
  double roll_max = 90.0;
  double yaw_max = 90.0;

  double operator[](std::size_t i) const {
    return i == 0 ? pitch_max : (i == 1 ? roll_max : yaw_max);
  }
  void validate() const {
    if (!(pitch_max > 0.0 && roll_max > 0.0 && yaw_max > 0.0)) {
      throw std::invalid_argument("angle ranges must be positive");
    }
  }
};

/// Out-of-range angles are clamped to the range, with a warning on stderr.
inline PoseNormalized normalize_angles(const PoseDegrees& deg,
                                       const AngleRange& range = {}) {
  range.validate();
  PoseNormalized n;
  for (std::size_t k = 0; k < 3; ++k) {
    double v = deg[k];
    if (std::abs(v) > range[k]) {
      std::clog << "warning: " << angle_name(k) << " " << v
                << " deg outside +-" << range[k] << ", clamped\n";
      v = std::clamp(v, -range[k], range[k]);
    }
    n[k] = v / range[k];
  }
  return n;
}

inline PoseDegrees denormalize_angles(const PoseNormalized& n,
                                      const AngleRange& range = {}) {
  range.validate();
  return {n.pitch * range.pitch_max, n.roll * range.roll_max,
          n.yaw * range.yaw_max};
}

// ---------------------------------------------------------------------------
// Augmentation

enum class AugmentKind {
  CornerTopLeft,
  CornerTopRight,
  CornerBottomLeft,
  CornerBottomRight,
  CenterJitter,
  EdgeTop,
  EdgeBottom,
  EdgeLeft,
  EdgeRight,
  NoisyTop,
  NoisyBottom,
  NoisyLeft,
  NoisyRight,
};

inline const char* augment_kind_name(AugmentKind k) {
  static const char* const kNames[] = {
      "corner_top_left", "corner_top_right", "corner_bottom_left",
      "corner_bottom_right", "center_jitter", "edge_top", "edge_bottom",
      "edge_left", "edge_right", "noisy_top", "noisy_bottom", "noisy_left",
      "noisy_right"};
  return kNames[static_cast<int>(k)];
}

struct AugmentOptions {
  /// Window shift of corner and edge crops, as a fraction of the extent.
  double offset_fraction = 0.1;
  /// Gaussian noise sigma as a fraction of the raw patch value range.
  double noise_sigma_fraction = 0.01;
};

struct AugmentedPatch {
  AugmentKind kind;
  CropSpec crop;
  Tensor<double> patch;  // standardized
};

/// Shifted copy of `crop`; dx, dy in units of the crop extent.
inline CropSpec shifted(const CropSpec& crop, double dx, double dy) {
  CropSpec c = crop;
  c.xc += dx * crop.width;
  c.yc += dy * crop.height;
  return c;
}

/**
 * Training-time variants of one crop: four corner-shifted windows, one
 * randomly jittered centre window, four edge-shifted windows and a noisy
 * copy of each edge window. Every variant is standardized last; variants
 * that come out degenerate are dropped. Shifted centres are clamped into
 * the frame.
 */
inline std::vector<AugmentedPatch> augment(const DepthFrame& frame,
                                           const CropSpec& crop,
                                           std::uint64_t seed,
                                           const AugmentOptions& opts = {}) {
  Rng rng(seed);
  const double d = opts.offset_fraction;
  const auto clamp_center = [&](CropSpec c) {
    c.xc = std::clamp(c.xc, 0.0, static_cast<double>(frame.width()) - 1.0);
    c.yc = std::clamp(c.yc, 0.0, static_cast<double>(frame.height()) - 1.0);
    return c;
  };

  struct Geometric {
    AugmentKind kind;
    double dx, dy;
  };
  const double jx = rng.uniform(-d / 2, d / 2);
  const double jy = rng.uniform(-d / 2, d / 2);
  const Geometric geometric[] = {
      {AugmentKind::CornerTopLeft, -d, -d},
      {AugmentKind::CornerTopRight, d, -d},
      {AugmentKind::CornerBottomLeft, -d, d},
      {AugmentKind::CornerBottomRight, d, d},
      {AugmentKind::CenterJitter, jx, jy},
      {AugmentKind::EdgeTop, 0.0, -d},
      {AugmentKind::EdgeBottom, 0.0, d},
      {AugmentKind::EdgeLeft, -d, 0.0},
      {AugmentKind::EdgeRight, d, 0.0},
  };

  std::vector<AugmentedPatch> out;
  std::vector<std::pair<CropSpec, Tensor<double>>> edges;
  for (const auto& g : geometric) {
    const CropSpec c = clamp_center(shifted(crop, g.dx, g.dy));
    Tensor<double> raw = extract_patch(frame, c);
    const bool is_edge = g.kind >= AugmentKind::EdgeTop;
    try {
      out.push_back({g.kind, c, standardize(raw)});
    } catch (const DegeneratePatch&) {
    }
    if (is_edge) edges.emplace_back(c, std::move(raw));
  }

  for (std::size_t e = 0; e < edges.size(); ++e) {
    auto& [c, raw] = edges[e];
    const auto [lo, hi] =
        std::minmax_element(raw.values().begin(), raw.values().end());
    const double sigma = opts.noise_sigma_fraction * (*hi - *lo);
    Tensor<double> noisy = raw;
    if (sigma > 0.0) {
      for (double& v : noisy.values()) v += sigma * rng.normal();
    }
    try {
      out.push_back({static_cast<AugmentKind>(
                         static_cast<int>(AugmentKind::NoisyTop) + e),
                     c, standardize(noisy)});
    } catch (const DegeneratePatch&) {
    }
  }
  return out;
}

}  // namespace depthpose

#endif  // DEPTHPOSE_PREPROCESS_HPP_
