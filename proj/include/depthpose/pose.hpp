#ifndef DEPTHPOSE_POSE_HPP_
#define DEPTHPOSE_POSE_HPP_

#include <array>
#include <ostream>

namespace depthpose {

struct Degrees {};
struct Normalized {};

/**
 * (pitch, roll, yaw) head orientation. The unit tag keeps degree-space and
 * normalized [-1, 1] triples from being mixed; conversion goes through
 * normalize_angles / denormalize_angles only.
 */
template <typename Unit>
struct PoseAngles {
  double pitch = 0.0;
  double roll = 0.0;
  double yaw = 0.0;

  static constexpr std::size_t kCount = 3;

  std::array<double, 3> as_array() const { return {pitch, roll, yaw}; }
  static PoseAngles from_array(const std::array<double, 3>& a) {
    return {a[0], a[1], a[2]};
  }

  double operator[](std::size_t i) const {
    return i == 0 ? pitch : (i == 1 ? roll : yaw);
  }
  double& operator[](std::size_t i) {
    return i == 0 ? pitch : (i == 1 ? roll : yaw);
  }

  friend PoseAngles operator-(const PoseAngles& a, const PoseAngles& b) {
    return {a.pitch - b.pitch, a.roll - b.roll, a.yaw - b.yaw};
  }
  friend PoseAngles operator+(const PoseAngles& a, const PoseAngles& b) {
    return {a.pitch + b.pitch, a.roll + b.roll, a.yaw + b.yaw};
  }
  friend PoseAngles operator*(double s, const PoseAngles& a) {
    return {s * a.pitch, s * a.roll, s * a.yaw};
  }
  friend PoseAngles operator-(const PoseAngles& a) {
    return {-a.pitch, -a.roll, -a.yaw};
  }
  friend bool operator==(const PoseAngles&, const PoseAngles&) = default;

  friend std::ostream& operator<<(std::ostream& os, const PoseAngles& p) {
    return os << "(pitch " << p.pitch << ", roll " << p.roll << ", yaw "
              << p.yaw << ')';
  }
};

using PoseDegrees = PoseAngles<Degrees>;
using PoseNormalized = PoseAngles<Normalized>;

inline const char* angle_name(std::size_t i) {
  static const char* const kNames[] = {"pitch", "roll", "yaw"};
  return kNames[i];
}

}  // namespace depthpose

#endif  // DEPTHPOSE_POSE_HPP_
