#ifndef DEPTHPOSE_DATA_HPP_
#define DEPTHPOSE_DATA_HPP_

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <numbers>
#include <istream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include "depthpose/frame.hpp"
#include "depthpose/pose.hpp"
#include "depthpose/rng.hpp"
#include "depthpose/tensor.hpp"

namespace depthpose {

/// Shortest decimal form that parses back to the same double.
inline std::string format_number(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw std::runtime_error("number formatting failed");
  return std::string(buf, end);
}

inline std::optional<double> parse_number(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
    return std::nullopt;
  }
  return v;
}

// ---------------------------------------------------------------------------
// 16-bit binary PGM

class PgmError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/**
 * Reads a binary (P5) PGM with maxval 65535, big-endian samples, as depth in
 * millimetres. Focal lengths come from a `# depth_mm fx=<fx> fy=<fy>`
 * comment; `fallback` is used when the comment is absent.
 */
inline DepthFrame read_pgm16(const std::filesystem::path& path,
                             std::optional<CameraIntrinsics> fallback = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PgmError("cannot open " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
  std::size_t pos = 0;
  const auto fail = [&](const std::string& msg) {
    return PgmError(path.string() + ": " + msg + " at byte " +
                    std::to_string(pos));
  };

  if (bytes.size() < 2 || bytes[0] != 'P') throw fail("not a PGM file");
  if (bytes[1] == '2') throw fail("binary PGM required (got ASCII P2)");
  if (bytes[1] != '5') throw fail("binary PGM required");
  pos = 2;

  std::optional<CameraIntrinsics> intr;
  const auto parse_comment = [&](std::string_view line) {
    std::istringstream ss{std::string(line)};
    std::string tag, tok;
    ss >> tag;
    if (tag != "depth_mm") return;
    CameraIntrinsics c;
    while (ss >> tok) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos) continue;
      const auto v = parse_number(std::string_view(tok).substr(eq + 1));
      if (!v) throw fail("malformed intrinsics comment");
      if (tok.compare(0, eq, "fx") == 0) c.fx = *v;
      if (tok.compare(0, eq, "fy") == 0) c.fy = *v;
    }
    intr = c;
  };
  const auto next_token = [&]() -> std::string {
    while (pos < bytes.size()) {
      const char c = bytes[pos];
      if (c == '#') {
        const auto eol = bytes.find('\n', pos);
        const auto stop = eol == std::string::npos ? bytes.size() : eol;
        std::string_view line(bytes.data() + pos + 1, stop - pos - 1);
        while (!line.empty() && line.front() == ' ') line.remove_prefix(1);
        parse_comment(line);
        pos = stop;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos;
      } else {
        break;
      }
    }
    const std::size_t start = pos;
    while (pos < bytes.size() &&
           !std::isspace(static_cast<unsigned char>(bytes[pos])) &&
           bytes[pos] != '#') {
      ++pos;
    }
    if (start == pos) throw fail("truncated header");
    return bytes.substr(start, pos - start);
  };
  const auto header_int = [&](const char* what) {
    const std::string tok = next_token();
    long v = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || ptr != tok.data() + tok.size() || v <= 0) {
      throw fail(std::string("invalid ") + what + " '" + tok + "'");
    }
    return static_cast<std::size_t>(v);
  };

  const std::size_t width = header_int("width");
  const std::size_t height = header_int("height");
  const std::size_t maxval = header_int("maxval");
  if (maxval != 65535) {
    throw fail("maxval must be 65535, got " + std::to_string(maxval));
  }
  if (pos >= bytes.size() ||
      !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    throw fail("missing separator before pixel data");
  }
  ++pos;
  const std::size_t need = width * height * 2;
  if (bytes.size() - pos < need) {
    pos = bytes.size();
    throw fail("truncated pixel data, expected " + std::to_string(need) +
               " bytes");
  }
  std::vector<float> depth(width * height);
  for (std::size_t i = 0; i < depth.size(); ++i) {
    const auto hi = static_cast<unsigned char>(bytes[pos + 2 * i]);
    const auto lo = static_cast<unsigned char>(bytes[pos + 2 * i + 1]);
    depth[i] = static_cast<float>((hi << 8) | lo);
  }
  if (!intr) intr = fallback;
  if (!intr) throw fail("missing '# depth_mm fx=.. fy=..' comment");
  return DepthFrame(path.stem().string(), *intr,
                    Tensor<float>({height, width}, std::move(depth)));
}

/// Depth values are rounded to whole millimetres; values outside
/// [0, 65535] are rejected.
inline void write_pgm16(const DepthFrame& frame,
                        const std::filesystem::path& path) {
  std::string out = "P5\n# depth_mm fx=" +
                    format_number(frame.intrinsics.fx) +
                    " fy=" + format_number(frame.intrinsics.fy) + "\n" +
                    std::to_string(frame.width()) + " " +
                    std::to_string(frame.height()) + "\n65535\n";
  out.reserve(out.size() + frame.depth.size() * 2);
  for (float v : frame.depth.values()) {
    const long q = std::lround(v);
    if (q < 0 || q > 65535) {
      throw PgmError("depth value " + std::to_string(v) +
                     " not representable in 16 bits");
    }
    out.push_back(static_cast<char>(q >> 8));
    out.push_back(static_cast<char>(q & 0xFF));
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw PgmError("cannot open " + path.string() + " for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw PgmError("write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// Annotations

struct Annotation {
  std::string frame_id;
  double xc = 0.0;
  double yc = 0.0;
  double z_mm = 0.0;
  PoseDegrees angles;

  friend bool operator==(const Annotation&, const Annotation&) = default;
};

inline constexpr std::array<std::string_view, 7> kAnnotationColumns = {
    "frame_id", "xc", "yc", "Z_mm", "pitch_deg", "roll_deg", "yaw_deg"};

class AnnotationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos
                                         ? std::string_view::npos
                                         : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() &&
         (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

}  // namespace detail

/// Parses the annotation CSV. Columns are located by header name; unknown
/// columns are ignored and row order is preserved.
inline std::vector<Annotation> parse_annotations(std::istream& in,
                                                 const std::string& source) {
  std::string line;
  if (!std::getline(in, line)) {
    throw AnnotationError(source + ": missing header line");
  }
  const auto header = detail::split_csv(line);
  std::array<std::size_t, 7> col{};
  for (std::size_t k = 0; k < kAnnotationColumns.size(); ++k) {
    auto it = std::find_if(header.begin(), header.end(), [&](auto h) {
      return detail::trim(h) == kAnnotationColumns[k];
    });
    if (it == header.end()) {
      throw AnnotationError(source + ": missing column '" +
                            std::string(kAnnotationColumns[k]) + "'");
    }
    col[k] = static_cast<std::size_t>(it - header.begin());
  }

  std::vector<Annotation> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_csv(line);
    if (fields.size() < header.size()) {
      throw AnnotationError(source + ":" + std::to_string(line_no) +
                            ": expected " + std::to_string(header.size()) +
                            " fields, got " + std::to_string(fields.size()));
    }
    const auto number = [&](std::size_t k) {
      const auto v = parse_number(fields[col[k]]);
      if (!v || !std::isfinite(*v)) {
        throw AnnotationError(source + ":" + std::to_string(line_no) +
                              ": non-numeric " +
                              std::string(kAnnotationColumns[k]) + " '" +
                              std::string(fields[col[k]]) + "'");
      }
      return *v;
    };
    Annotation a;
    a.frame_id = std::string(detail::trim(fields[col[0]]));
    a.xc = number(1);
    a.yc = number(2);
    a.z_mm = number(3);
    a.angles = {number(4), number(5), number(6)};
    if (!(a.z_mm > 0.0)) {
      throw AnnotationError(source + ":" + std::to_string(line_no) +
                            ": Z_mm must be positive");
    }
    rows.push_back(std::move(a));
  }
  return rows;
}

inline std::vector<Annotation> read_annotations(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw AnnotationError("cannot open " + path.string());
  return parse_annotations(in, path.string());
}

inline void write_annotations(std::span<const Annotation> rows,
                              const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw AnnotationError("cannot open " + path.string());
  for (std::size_t k = 0; k < kAnnotationColumns.size(); ++k) {
    out << (k ? "," : "") << kAnnotationColumns[k];
  }
  out << '\n';
  for (const auto& a : rows) {
    out << a.frame_id << ',' << format_number(a.xc) << ','
        << format_number(a.yc) << ',' << format_number(a.z_mm) << ','
        << format_number(a.angles.pitch) << ','
        << format_number(a.angles.roll) << ','
        << format_number(a.angles.yaw) << '\n';
  }
  if (!out) throw AnnotationError("write failed for " + path.string());
}

/// Subject key of a frame id: the text before the first '_' ("s03_f0012").
inline std::string subject_of(std::string_view frame_id) {
  return std::string(frame_id.substr(0, frame_id.find('_')));
}

// ---------------------------------------------------------------------------
// Siamese pair sampling

/// How "at least 30 degrees of difference" between two poses is read:
/// AnyAngle  - max_k |d_k| >= threshold (default),
/// AllAngles - min_k |d_k| >= threshold,
/// Sum       - sum_k |d_k| >= threshold.
enum class PairRule { AnyAngle, AllAngles, Sum };

inline constexpr double kPairThresholdDeg = 30.0;

inline bool pair_eligible(const PoseDegrees& a, const PoseDegrees& b,
                          PairRule rule = PairRule::AnyAngle,
                          double threshold_deg = kPairThresholdDeg) {
  const PoseDegrees d = a - b;
  const double p = std::abs(d.pitch), r = std::abs(d.roll), y = std::abs(d.yaw);
  switch (rule) {
    case PairRule::AnyAngle:
      return std::max({p, r, y}) >= threshold_deg;
    case PairRule::AllAngles:
      return std::min({p, r, y}) >= threshold_deg;
    case PairRule::Sum:
      return p + r + y >= threshold_deg;
  }
  return false;
}

struct IndexPair {
  std::size_t first = 0;
  std::size_t second = 0;
  friend bool operator==(const IndexPair&, const IndexPair&) = default;
};

/// Every eligible unordered pair (i < j), in lexicographic order.
inline std::vector<IndexPair> eligible_pairs(
    std::span<const PoseDegrees> angles, PairRule rule = PairRule::AnyAngle,
    double threshold_deg = kPairThresholdDeg) {
  std::vector<IndexPair> pool;
  for (std::size_t i = 0; i < angles.size(); ++i) {
    for (std::size_t j = i + 1; j < angles.size(); ++j) {
      if (pair_eligible(angles[i], angles[j], rule, threshold_deg)) {
        pool.push_back({i, j});
      }
    }
  }
  return pool;
}

class EmptyPairPool : public std::runtime_error {
 public:
  EmptyPairPool() : std::runtime_error("pair pool empty under 30° rule") {}
};

/**
 * Draws `count` pairs uniformly (with replacement) from the eligible pool.
 * The branch order inside each pair is randomized.
 */
inline std::vector<IndexPair> pair_sampler(std::span<const PoseDegrees> angles,
                                           std::size_t count,
                                           std::uint64_t seed,
                                           PairRule rule = PairRule::AnyAngle,
                                           double threshold_deg =
                                               kPairThresholdDeg) {
  const auto pool = eligible_pairs(angles, rule, threshold_deg);
  if (pool.empty()) throw EmptyPairPool();
  Rng rng(seed);
  std::vector<IndexPair> out;
  out.reserve(count);
  for (std::size_t n = 0; n < count; ++n) {
    IndexPair p = pool[rng.below(pool.size())];
    if (rng.next() & 1) std::swap(p.first, p.second);
    out.push_back(p);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic heads
//
// Camera frame: x right, y down, z along the optical axis (right-handed).
// Head frame at zero pose coincides with the camera frame; the face and nose
// point towards the camera (local -z). The head rotation is
//     R = Ry(yaw) * Rx(pitch) * Rz(roll),
// i.e. intrinsic yaw about the vertical axis, then pitch about the
// horizontal axis, then roll about the optical axis. Positive yaw turns the
// nose towards -x, positive pitch turns it towards +y (down).

using Vec3 = std::array<double, 3>;
using Mat3 = std::array<Vec3, 3>;

inline Mat3 matmul(const Mat3& a, const Mat3& b) {
  Mat3 c{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) c[i][j] += a[i][k] * b[k][j];
  return c;
}

inline Vec3 rotate(const Mat3& m, const Vec3& v) {
  return {m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
          m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
          m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2]};
}

inline Vec3 rotate_transposed(const Mat3& m, const Vec3& v) {
  return {m[0][0] * v[0] + m[1][0] * v[1] + m[2][0] * v[2],
          m[0][1] * v[0] + m[1][1] * v[1] + m[2][1] * v[2],
          m[0][2] * v[0] + m[1][2] * v[1] + m[2][2] * v[2]};
}

inline double radians(double deg) { return deg * std::numbers::pi / 180.0; }

inline Mat3 head_rotation(const PoseDegrees& pose) {
  const double cy = std::cos(radians(pose.yaw)), sy = std::sin(radians(pose.yaw));
  const double cp = std::cos(radians(pose.pitch)),
               sp = std::sin(radians(pose.pitch));
  const double cr = std::cos(radians(pose.roll)), sr = std::sin(radians(pose.roll));
  const Mat3 ry = {{{cy, 0, sy}, {0, 1, 0}, {-sy, 0, cy}}};
  const Mat3 rx = {{{1, 0, 0}, {0, cp, -sp}, {0, sp, cp}}};
  const Mat3 rz = {{{cr, -sr, 0}, {sr, cr, 0}, {0, 0, 1}}};
  return matmul(ry, matmul(rx, rz));
}

struct ImageSize {
  std::size_t width = 320;
  std::size_t height = 240;
};

struct Pixel {
  double u = 0.0;
  double v = 0.0;
};

/// Pinhole projection with the principal point at the image centre.
inline Pixel project(const CameraIntrinsics& intr, const ImageSize& size,
                     const Vec3& p) {
  return {(size.width - 1) / 2.0 + intr.fx * p[0] / p[2],
          (size.height - 1) / 2.0 + intr.fy * p[1] / p[2]};
}

inline constexpr float kBackgroundDepthMm = 3000.0f;

/// Ellipsoidal head with a conical nose, placed at `position` (mm).
struct SyntheticHeadSpec {
  Vec3 semi_axes = {75.0, 100.0, 90.0};  // x (width), y (height), z (depth)
  double nose_length = 25.0;             // apex distance in front of face
  double nose_radius = 14.0;             // cone radius where it meets face
  Vec3 position = {0.0, 0.0, 1000.0};
  PoseDegrees pose;

  void validate() const {
    for (double a : semi_axes) {
      if (!(a > 0.0)) throw std::invalid_argument("semi-axes must be positive");
    }
    if (!(nose_length > 0.0) || !(nose_radius > 0.0)) {
      throw std::invalid_argument("nose dimensions must be positive");
    }
    if (!(position[2] > semi_axes[2] + nose_length)) {
      throw std::invalid_argument("head must lie fully in front of the camera");
    }
  }

  /// Nose tip in the head frame.
  Vec3 nose_tip() const { return {0.0, 0.0, -(semi_axes[2] + nose_length)}; }
};

/// Head-frame point to camera frame: R p + t.
inline Vec3 head_to_camera(const SyntheticHeadSpec& spec, const Vec3& p) {
  const Vec3 r = rotate(head_rotation(spec.pose), p);
  return {r[0] + spec.position[0], r[1] + spec.position[1],
          r[2] + spec.position[2]};
}

namespace detail {

/// Smallest positive root of a t^2 + b t + c = 0 accepted by `ok`.
template <typename Accept>
std::optional<double> nearest_root(double a, double b, double c, Accept ok) {
  std::optional<double> best;
  const auto consider = [&](double t) {
    if (t > 0.0 && ok(t) && (!best || t < *best)) best = t;
  };
  if (std::abs(a) < 1e-14) {
    if (std::abs(b) > 1e-14) consider(-c / b);
    return best;
  }
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0) return best;
  const double s = std::sqrt(disc);
  consider((-b - s) / (2.0 * a));
  consider((-b + s) / (2.0 * a));
  return best;
}

}  // namespace detail

struct RenderedHead {
  DepthFrame frame;
  Annotation annotation;
};

/**
 * Ray-casts the head through a pinhole camera. Depth is the camera-z of the
 * nearest surface hit, rounded to whole millimetres; missed rays read
 * kBackgroundDepthMm. The annotation carries the exact pose, the projected
 * head centre and its distance.
 */
inline RenderedHead render_synthetic_head(const SyntheticHeadSpec& spec,
                                          const CameraIntrinsics& intr,
                                          const ImageSize& size,
                                          std::string frame_id = "synthetic") {
  spec.validate();
  intr.validate();
  const auto& ax = spec.semi_axes;
  const double reach =
      std::max({ax[0], ax[1], ax[2] + spec.nose_length});
  const Vec3& t = spec.position;
  const Pixel centre = project(intr, size, t);
  const double half_u = intr.fx * reach / (t[2] - reach);
  const double half_v = intr.fy * reach / (t[2] - reach);
  if (t[2] <= reach || centre.u - half_u < 0.0 ||
      centre.u + half_u > size.width - 1.0 || centre.v - half_v < 0.0 ||
      centre.v + half_v > size.height - 1.0) {
    throw std::invalid_argument("head projects outside the image");
  }

  const Mat3 rot = head_rotation(spec.pose);
  const Vec3 origin = rotate_transposed(rot, {-t[0], -t[1], -t[2]});

  // Nose cone: apex in front of the face, axis along +z (into the head),
  // reaching half-way into the ellipsoid so the base is always hidden.
  const Vec3 apex = spec.nose_tip();
  const double cone_height = spec.nose_length + 0.5 * ax[2];
  const double tan_half = spec.nose_radius / spec.nose_length;
  const double cos2 = 1.0 / (1.0 + tan_half * tan_half);
  const Vec3 q = {origin[0] - apex[0], origin[1] - apex[1],
                  origin[2] - apex[2]};

  const double cx = (size.width - 1) / 2.0, cy = (size.height - 1) / 2.0;
  Tensor<float> depth({size.height, size.width}, kBackgroundDepthMm);
  for (std::size_t v = 0; v < size.height; ++v) {
    for (std::size_t u = 0; u < size.width; ++u) {
      const Vec3 ray = {(u - cx) / intr.fx, (v - cy) / intr.fy, 1.0};
      const Vec3 d = rotate_transposed(rot, ray);

      double ea = 0, eb = 0, ec = -1.0;
      for (int k = 0; k < 3; ++k) {
        const double inv = 1.0 / (ax[k] * ax[k]);
        ea += d[k] * d[k] * inv;
        eb += 2.0 * origin[k] * d[k] * inv;
        ec += origin[k] * origin[k] * inv;
      }
      auto hit = detail::nearest_root(ea, eb, ec, [](double) { return true; });

      const double m0 = q[2], m1 = d[2];
      const double dd = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
      const double qd = q[0] * d[0] + q[1] * d[1] + q[2] * d[2];
      const double qq = q[0] * q[0] + q[1] * q[1] + q[2] * q[2];
      const auto cone = detail::nearest_root(
          m1 * m1 - cos2 * dd, 2.0 * (m0 * m1 - cos2 * qd),
          m0 * m0 - cos2 * qq, [&](double s) {
            const double along = m0 + s * m1;
            return along >= 0.0 && along <= cone_height;
          });
      if (cone && (!hit || *cone < *hit)) hit = cone;

      // ray z-component is 1, so the ray parameter is the camera depth.
      if (hit && *hit < kBackgroundDepthMm) {
        depth[v * size.width + u] = static_cast<float>(std::round(*hit));
      }
    }
  }

  RenderedHead out{DepthFrame(frame_id, intr, std::move(depth)),
                   {frame_id, centre.u, centre.v, t[2], spec.pose}};
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic datasets

/// Poses drawn uniformly from centre +- half_span per angle; a zero span
/// pins that angle.
struct PoseDistribution {
  PoseDegrees center;
  PoseDegrees half_span{60.0, 50.0, 75.0};
};

struct SyntheticDatasetOptions {
  std::size_t subjects = 12;
  std::size_t frames_per_subject = 200;
  PoseDistribution poses;
  ImageSize image;
  CameraIntrinsics intrinsics{287.5, 287.5};
  double distance_min_mm = 850.0;
  double distance_max_mm = 1150.0;
  double lateral_jitter_mm = 40.0;
  /// Relative per-subject variation of head and nose dimensions.
  double shape_jitter = 0.08;
  std::uint64_t seed = 1;
};

/// A depth frame with its annotation.
struct LabeledFrame {
  DepthFrame frame;
  Annotation annotation;
};

inline std::string synthetic_frame_id(std::size_t subject, std::size_t frame) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "s%02zu_f%04zu", subject, frame);
  return buf;
}

/// Head shape of one subject; every frame of the subject shares it.
inline SyntheticHeadSpec subject_shape(const SyntheticDatasetOptions& opts,
                                       std::size_t subject) {
  Rng rng(derive_seed(opts.seed, subject));
  SyntheticHeadSpec s;
  const auto jitter = [&](double v) {
    return v * (1.0 + rng.uniform(-opts.shape_jitter, opts.shape_jitter));
  };
  for (double& a : s.semi_axes) a = jitter(a);
  s.nose_length = jitter(s.nose_length);
  s.nose_radius = jitter(s.nose_radius);
  return s;
}

/// Renders one frame of one subject; deterministic in (seed, subject, frame).
inline LabeledFrame render_dataset_frame(const SyntheticDatasetOptions& opts,
                                           std::size_t subject,
                                           std::size_t frame) {
  SyntheticHeadSpec spec = subject_shape(opts, subject);
  Rng rng(derive_seed(derive_seed(opts.seed, subject), frame + 1));
  for (std::size_t k = 0; k < 3; ++k) {
    spec.pose[k] = opts.poses.center[k] +
                   (opts.poses.half_span[k] > 0.0
                        ? rng.uniform(-opts.poses.half_span[k],
                                      opts.poses.half_span[k])
                        : 0.0);
  }
  spec.position = {rng.uniform(-opts.lateral_jitter_mm, opts.lateral_jitter_mm),
                   rng.uniform(-opts.lateral_jitter_mm, opts.lateral_jitter_mm),
                   rng.uniform(opts.distance_min_mm, opts.distance_max_mm)};
  auto r = render_synthetic_head(spec, opts.intrinsics, opts.image,
                                 synthetic_frame_id(subject, frame));
  return {std::move(r.frame), std::move(r.annotation)};
}

inline std::vector<LabeledFrame> generate_frames(
    const SyntheticDatasetOptions& opts) {
  std::vector<LabeledFrame> out;
  out.reserve(opts.subjects * opts.frames_per_subject);
  for (std::size_t s = 0; s < opts.subjects; ++s) {
    for (std::size_t f = 0; f < opts.frames_per_subject; ++f) {
      out.push_back(render_dataset_frame(opts, s, f));
    }
  }
  return out;
}

inline constexpr std::string_view kAnnotationFile = "annotations.csv";

/// Writes <frame_id>.pgm for every frame plus annotations.csv into `dir`.
inline void generate_dataset(const SyntheticDatasetOptions& opts,
                             const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<Annotation> rows;
  rows.reserve(opts.subjects * opts.frames_per_subject);
  for (std::size_t s = 0; s < opts.subjects; ++s) {
    for (std::size_t f = 0; f < opts.frames_per_subject; ++f) {
      LabeledFrame fr = render_dataset_frame(opts, s, f);
      write_pgm16(fr.frame, dir / (fr.frame.frame_id + ".pgm"));
      rows.push_back(std::move(fr.annotation));
    }
  }
  write_annotations(rows, dir / kAnnotationFile);
}

/// Reads annotations.csv and the PGM named by every row.
inline std::vector<LabeledFrame> load_dataset(
    const std::filesystem::path& dir) {
  std::vector<LabeledFrame> out;
  for (auto& a : read_annotations(dir / kAnnotationFile)) {
    DepthFrame f = read_pgm16(dir / (a.frame_id + ".pgm"));
    out.push_back({std::move(f), std::move(a)});
  }
  return out;
}

}  // namespace depthpose

#endif  // DEPTHPOSE_DATA_HPP_
