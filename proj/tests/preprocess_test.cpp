#include <algorithm>
#include <cmath>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "depthpose/preprocess.hpp"

namespace depthpose {
namespace {

DepthFrame frame_from(std::size_t w, std::size_t h,
                      const std::function<float(std::size_t, std::size_t)>& f) {
  Tensor<float> d({h, w});
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) d[y * w + x] = f(x, y);
  return DepthFrame("test", {575.0, 575.0}, std::move(d));
}

// Asymmetric pattern with no mirror or translation symmetry.
float pattern(std::size_t x, std::size_t y) {
  return static_cast<float>(1000 + 3 * x + 7 * y + (x * y + 5 * x) % 13);
}

// Independent bilinear crop of an interior rectangle, then standardization.
Tensor<double> reference_crop(const DepthFrame& f, double xc, double yc,
                              double w, double h) {
  Tensor<double> out({1, 64, 64});
  double mean = 0.0;
  for (int v = 0; v < 64; ++v)
    for (int u = 0; u < 64; ++u) {
      const double px = xc - w / 2 + (u + 0.5) * w / 64 - 0.5;
      const double py = yc - h / 2 + (v + 0.5) * h / 64 - 0.5;
      const int x0 = static_cast<int>(std::floor(px));
      const int y0 = static_cast<int>(std::floor(py));
      const double ax = px - x0, ay = py - y0;
      const auto at = [&](int x, int y) { return double(f.at(x, y)); };
      const double val = (1 - ay) * ((1 - ax) * at(x0, y0) + ax * at(x0 + 1, y0)) +
                         ay * ((1 - ax) * at(x0, y0 + 1) + ax * at(x0 + 1, y0 + 1));
      out(0, v, u) = val;
      mean += val;
    }
  mean /= 4096.0;
  double var = 0.0;
  for (double v : out.values()) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / 4096.0);
  for (double& v : out.values()) v = (v - mean) / sd;
  return out;
}

TEST(CropWindowTest, KnownDistances) {
  const CameraIntrinsics intr{575.0, 575.0};
  EXPECT_EQ(crop_window(intr, 300.0, 1150.0), (CropSize{150, 150}));
  EXPECT_EQ(crop_window(intr, 300.0, 575.0), (CropSize{300, 300}));
}

TEST(CropWindowTest, HalvesWhenDistanceDoubles) {
  const CameraIntrinsics intr{575.0, 540.0};
  for (double z = 500.0; z < 2000.0; z += 37.0) {
    const auto a = crop_window(intr, 300.0, z);
    const auto b = crop_window(intr, 300.0, 2.0 * z);
    EXPECT_LE(std::abs(2 * b.width - a.width), 1);
    EXPECT_LE(std::abs(2 * b.height - a.height), 1);
  }
}

TEST(CropWindowTest, RejectsInvalidDistance) {
  const CameraIntrinsics intr{575.0, 575.0};
  EXPECT_THROW(crop_window(intr, 300.0, 0.0), std::invalid_argument);
  EXPECT_THROW(crop_window(intr, 300.0, -5.0), std::invalid_argument);
  EXPECT_THROW(crop_window({0.0, 575.0}, 300.0, 1000.0), std::invalid_argument);
}

TEST(ExtractPatchTest, ConstantFrame) {
  const auto f = frame_from(200, 150, [](auto, auto) { return 1234.0f; });
  const auto p = extract_patch(f, {100, 75, 90, 70});
  ASSERT_EQ(p.shape(), (Shape{1, 64, 64}));
  for (double v : p.values()) EXPECT_EQ(v, 1234.0);
}

TEST(ExtractPatchTest, SixtyFourCropIsIdentity) {
  const auto f = frame_from(200, 150, pattern);
  const auto p = extract_patch(f, {100, 80, 64, 64});
  for (std::size_t v = 0; v < 64; ++v)
    for (std::size_t u = 0; u < 64; ++u) {
      ASSERT_EQ(p(0, v, u), f.at(68 + u, 48 + v));
    }
}

TEST(ExtractPatchTest, LinearRampIsExact) {
  const auto f = frame_from(300, 300, [](std::size_t x, std::size_t y) {
    return static_cast<float>(500 + 2 * x + 3 * y);
  });
  const double xc = 150.3, yc = 140.7;
  const auto p = extract_patch(f, {xc, yc, 128, 128});
  for (std::size_t v = 0; v < 64; ++v)
    for (std::size_t u = 0; u < 64; ++u) {
      const double px = xc - 64 + (u + 0.5) * 2 - 0.5;
      const double py = yc - 64 + (v + 0.5) * 2 - 0.5;
      ASSERT_NEAR(p(0, v, u), 500 + 2 * px + 3 * py, 1e-6);
    }
}

TEST(ExtractPatchTest, HolesReadAsMedianOfCoveredPixels) {
  const auto f = frame_from(100, 100, [](std::size_t x, std::size_t y) {
    const bool hole = x >= 40 && x < 50 && y >= 40 && y < 50;
    return hole ? 0.0f : static_cast<float>(1000 + x + (y % 7));
  });
  // 32x32 crop centred at (45, 45) touches pixels 29..61 in both axes.
  std::vector<float> valid;
  for (std::size_t y = 29; y <= 61; ++y)
    for (std::size_t x = 29; x <= 61; ++x)
      if (f.at(x, y) > 0.0f) valid.push_back(f.at(x, y));
  std::sort(valid.begin(), valid.end());
  const std::size_t n = valid.size();
  const double median =
      n % 2 ? valid[n / 2] : 0.5 * (double(valid[n / 2 - 1]) + valid[n / 2]);
  const auto p = extract_patch(f, {45, 45, 32, 32});
  // Output (30, 30) samples (43.75, 43.75): all four neighbours are holes.
  EXPECT_NEAR(p(0, 30, 30), median, 1e-3);
}

TEST(ExtractPatchTest, OutsideFrameReadsAsBackground) {
  const auto f = frame_from(100, 100, [](std::size_t x, std::size_t) {
    return static_cast<float>(1000 + x);
  });
  const auto p = extract_patch(f, {0, 50, 40, 40});
  EXPECT_EQ(p(0, 32, 0), 1099.0);
  EXPECT_GT(p(0, 32, 40), 1000.0);
  EXPECT_LT(p(0, 32, 40), 1020.0);
}

TEST(ExtractPatchTest, RejectsCentreOutsideFrame) {
  const auto f = frame_from(100, 80, pattern);
  EXPECT_THROW(extract_patch(f, {50, 95, 40, 40}), std::out_of_range);
  EXPECT_THROW(extract_patch(f, {-1, 20, 40, 40}), std::out_of_range);
}

TEST(ExtractPatchTest, AllInvalidIsDegenerate) {
  const auto f = frame_from(100, 80, [](auto, auto) { return 0.0f; });
  EXPECT_THROW(extract_patch(f, {50, 40, 40, 40}), DegeneratePatch);
}

TEST(StandardizeTest, MeanZeroVarianceOne) {
  Tensor<double> t({1, 64, 64});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<double>(i + 1);
  const auto s = standardize(t);
  double mean = 0.0, var = 0.0;
  for (double v : s.values()) mean += v;
  mean /= s.size();
  for (double v : s.values()) var += (v - mean) * (v - mean);
  var /= s.size();
  EXPECT_NEAR(mean, 0.0, 1e-12);
  EXPECT_NEAR(var, 1.0, 1e-12);
}

TEST(StandardizeTest, IdempotentAndAffineInvariant) {
  std::mt19937_64 g(1);
  std::normal_distribution<double> n(700.0, 40.0);
  Tensor<double> t({1, 64, 64});
  for (double& v : t.values()) v = n(g);
  const auto s = standardize(t);
  const auto ss = standardize(s);
  Tensor<double> affine = t;
  for (double& v : affine.values()) v = 3.5 * v + 120.0;
  const auto sa = standardize(affine);
  for (std::size_t i = 0; i < t.size(); ++i) {
    EXPECT_NEAR(ss[i], s[i], 1e-6);
    EXPECT_NEAR(sa[i], s[i], 1e-9);
  }
}

TEST(StandardizeTest, ConstantPatchIsDegenerate) {
  EXPECT_THROW(standardize(Tensor<double>({1, 64, 64}, 5.0)), DegeneratePatch);
}

TEST(AngleNormalizationTest, Examples) {
  EXPECT_EQ(normalize_angles({0, 0, 0}), (PoseNormalized{0, 0, 0}));
  EXPECT_EQ(normalize_angles({90, -45, 45}, {90, 90, 90}),
            (PoseNormalized{1.0, -0.5, 0.5}));
}

TEST(AngleNormalizationTest, RoundTrip) {
  std::mt19937_64 g(2);
  const AngleRange range{60, 50, 75};
  for (int i = 0; i < 100; ++i) {
    const PoseDegrees d{std::uniform_real_distribution<double>(-60, 60)(g),
                        std::uniform_real_distribution<double>(-50, 50)(g),
                        std::uniform_real_distribution<double>(-75, 75)(g)};
    const auto back = denormalize_angles(normalize_angles(d, range), range);
    for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(back[k], d[k], 1e-12);
  }
}

TEST(AngleNormalizationTest, ClampsWithWarning) {
  std::ostringstream captured;
  auto* old = std::clog.rdbuf(captured.rdbuf());
  const auto n = normalize_angles({120, 0, -100});
  std::clog.rdbuf(old);
  EXPECT_EQ(n, (PoseNormalized{1.0, 0.0, -1.0}));
  EXPECT_NE(captured.str().find("pitch"), std::string::npos);
  EXPECT_NE(captured.str().find("yaw"), std::string::npos);
}

class AugmentTest : public ::testing::Test {
 protected:
  DepthFrame frame_ = frame_from(320, 240, pattern);
  CropSpec crop_{160, 120, 100, 80};
};

TEST_F(AugmentTest, ThirteenVariantsInOrder) {
  const auto set = augment(frame_, crop_, 5);
  ASSERT_EQ(set.size(), 13u);
  for (std::size_t i = 0; i < set.size(); ++i) {
    EXPECT_EQ(static_cast<std::size_t>(set[i].kind), i);
    EXPECT_EQ(set[i].patch.shape(), (Shape{1, 64, 64}));
  }
}

TEST_F(AugmentTest, DeterministicForSeed) {
  const auto a = augment(frame_, crop_, 9);
  const auto b = augment(frame_, crop_, 9);
  const auto c = augment(frame_, crop_, 10);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].patch, b[i].patch);
  EXPECT_NE(a[4].patch, c[4].patch);    // centre jitter
  EXPECT_NE(a[9].patch, c[9].patch);    // noise
  EXPECT_EQ(a[0].patch, c[0].patch);    // corners are fixed
}

TEST_F(AugmentTest, ZeroNoiseCopiesEdges) {
  const auto set = augment(frame_, crop_, 3, {0.1, 0.0});
  for (std::size_t e = 0; e < 4; ++e) {
    EXPECT_EQ(set[9 + e].patch, set[5 + e].patch);
    EXPECT_NE(set[9 + e].patch, augment(frame_, crop_, 3)[9 + e].patch);
  }
}

TEST_F(AugmentTest, CornerCropsMatchReferenceCropper) {
  const auto set = augment(frame_, crop_, 1);
  const auto centre = reference_crop(frame_, crop_.xc, crop_.yc, crop_.width,
                                     crop_.height);
  const double sx[4] = {-1, 1, -1, 1}, sy[4] = {-1, -1, 1, 1};
  for (int k = 0; k < 4; ++k) {
    const auto want = reference_crop(frame_, crop_.xc + sx[k] * 0.1 * crop_.width,
                                     crop_.yc + sy[k] * 0.1 * crop_.height,
                                     crop_.width, crop_.height);
    double max_diff = 0.0, diff_from_centre = 0.0;
    for (std::size_t i = 0; i < want.size(); ++i) {
      max_diff = std::max(max_diff, std::abs(set[k].patch[i] - want[i]));
      diff_from_centre =
          std::max(diff_from_centre, std::abs(set[k].patch[i] - centre[i]));
    }
    EXPECT_LT(max_diff, 1e-9) << augment_kind_name(set[k].kind);
    EXPECT_GT(diff_from_centre, 1e-2) << augment_kind_name(set[k].kind);
  }
}

TEST_F(AugmentTest, NoiseScalesWithRange) {
  const auto set = augment(frame_, crop_, 4, {0.1, 0.05});
  double rms = 0.0;
  for (std::size_t i = 0; i < set[5].patch.size(); ++i) {
    const double d = set[9].patch[i] - set[5].patch[i];
    rms += d * d;
  }
  rms = std::sqrt(rms / set[5].patch.size());
  EXPECT_GT(rms, 0.05);
  EXPECT_LT(rms, 0.5);
}

}  // namespace
}  // namespace depthpose
