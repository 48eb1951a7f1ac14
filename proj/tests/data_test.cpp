#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <map>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "depthpose/data.hpp"
#include "depthpose/preprocess.hpp"
#include "oracles.hpp"

namespace depthpose {
namespace {

std::string file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::filesystem::path& p, const std::string& s) {
  std::ofstream(p, std::ios::binary) << s;
}

TEST(PgmTest, RoundTripIncludingExtremes) {
  const auto dir = oracle::scratch_dir("pgm_roundtrip");
  Tensor<float> d({3, 4});
  const float values[] = {0, 1, 255, 256, 1000, 65535, 12345, 2, 3, 4, 500, 0};
  std::copy(std::begin(values), std::end(values), d.values().begin());
  const DepthFrame f("frame", {575.0, 574.5}, d);
  write_pgm16(f, dir / "frame.pgm");
  const auto back = read_pgm16(dir / "frame.pgm");
  EXPECT_EQ(back.frame_id, "frame");
  EXPECT_EQ(back.intrinsics, f.intrinsics);
  EXPECT_EQ(back.depth, f.depth);
}

TEST(PgmTest, HandBuiltBigEndianFile) {
  const auto dir = oracle::scratch_dir("pgm_hand");
  std::string bytes = "P5\n2 2\n65535\n";
  for (unsigned char c : {0x01, 0x02, 0xFF, 0xFF, 0x00, 0x00, 0x00, 0x07})
    bytes.push_back(static_cast<char>(c));
  write_bytes(dir / "h.pgm", bytes);
  const auto f = read_pgm16(dir / "h.pgm", CameraIntrinsics{500, 500});
  EXPECT_EQ(f.at(0, 0), 258.0f);
  EXPECT_EQ(f.at(1, 0), 65535.0f);
  EXPECT_EQ(f.at(0, 1), 0.0f);
  EXPECT_EQ(f.at(1, 1), 7.0f);
  EXPECT_EQ(f.intrinsics, (CameraIntrinsics{500, 500}));
}

TEST(PgmTest, RejectsAsciiVariant) {
  const auto dir = oracle::scratch_dir("pgm_ascii");
  write_bytes(dir / "a.pgm", "P2\n2 1\n65535\n1 2\n");
  try {
    read_pgm16(dir / "a.pgm", CameraIntrinsics{1, 1});
    FAIL() << "ASCII PGM accepted";
  } catch (const PgmError& e) {
    EXPECT_NE(std::string(e.what()).find("binary PGM required"),
              std::string::npos);
  }
}

TEST(PgmTest, RejectsTruncationAndBadHeaders) {
  const auto dir = oracle::scratch_dir("pgm_bad");
  write_bytes(dir / "t.pgm", std::string("P5\n2 2\n65535\n") + "abcdef");
  EXPECT_THROW(read_pgm16(dir / "t.pgm", CameraIntrinsics{1, 1}), PgmError);
  write_bytes(dir / "m.pgm", std::string("P5\n1 1\n255\n") + "a");
  EXPECT_THROW(read_pgm16(dir / "m.pgm", CameraIntrinsics{1, 1}), PgmError);
  write_bytes(dir / "i.pgm", std::string("P5\n1 1\n65535\n") + "ab");
  EXPECT_THROW(read_pgm16(dir / "i.pgm"), PgmError);  // no intrinsics
  EXPECT_THROW(read_pgm16(dir / "missing.pgm"), PgmError);
}

TEST(PgmTest, RejectsUnrepresentableDepth) {
  const auto dir = oracle::scratch_dir("pgm_range");
  const DepthFrame f("x", {1, 1}, Tensor<float>({1, 1}, 70000.0f));
  EXPECT_THROW(write_pgm16(f, dir / "x.pgm"), PgmError);
}

TEST(AnnotationTest, HeaderOnlyIsEmpty) {
  std::istringstream in("frame_id,xc,yc,Z_mm,pitch_deg,roll_deg,yaw_deg\n");
  EXPECT_TRUE(parse_annotations(in, "a.csv").empty());
}

TEST(AnnotationTest, OneRowExact) {
  std::istringstream in(
      "frame_id,xc,yc,Z_mm,pitch_deg,roll_deg,yaw_deg\n"
      "s01_f0001,160.25,120.5,987.5,-12.5,3,44.75\n");
  const auto rows = parse_annotations(in, "a.csv");
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0], (Annotation{"s01_f0001", 160.25, 120.5, 987.5,
                                 {-12.5, 3.0, 44.75}}));
}

TEST(AnnotationTest, ColumnsLocatedByName) {
  std::istringstream in(
      "yaw_deg,frame_id,extra,Z_mm,xc,yc,roll_deg,pitch_deg\n"
      "1,a,zzz,900,2,3,4,5\n");
  const auto rows = parse_annotations(in, "a.csv");
  EXPECT_EQ(rows.at(0), (Annotation{"a", 2, 3, 900, {5, 4, 1}}));
}

TEST(AnnotationTest, WriteReadRoundTrip) {
  const auto dir = oracle::scratch_dir("csv_roundtrip");
  const std::vector<Annotation> rows = {
      {"s00_f0000", 1.0 / 3.0, 2.5, 1000.125, {-0.1, 0.2, 1e-7}},
      {"s01_f0003", 319, 0, 850, {60, -50, 75}}};
  write_annotations(rows, dir / "a.csv");
  EXPECT_EQ(read_annotations(dir / "a.csv"), rows);
}

TEST(AnnotationTest, OutOfFrameCentreParsesButCannotBeCropped) {
  std::istringstream in(
      "frame_id,xc,yc,Z_mm,pitch_deg,roll_deg,yaw_deg\n"
      "f,10,500,900,0,0,0\n");
  const auto rows = parse_annotations(in, "a.csv");
  ASSERT_EQ(rows.size(), 1u);
  const DepthFrame frame("f", {575, 575}, Tensor<float>({240, 320}, 900.0f));
  EXPECT_THROW(
      extract_patch(frame, make_crop(frame.intrinsics, rows[0].xc, rows[0].yc,
                                     rows[0].z_mm)),
      std::out_of_range);
}

TEST(AnnotationTest, ErrorsNameSourceAndLine) {
  const auto message = [](const std::string& text) {
    std::istringstream in(text);
    try {
      parse_annotations(in, "a.csv");
    } catch (const AnnotationError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  const std::string header = "frame_id,xc,yc,Z_mm,pitch_deg,roll_deg,yaw_deg\n";
  EXPECT_NE(message(header + "a,1,2,900,0,0,0\nb,1,x,900,0,0,0\n")
                .find("a.csv:3"),
            std::string::npos);
  EXPECT_NE(message(header + "a,1,2\n").find("a.csv:2"), std::string::npos);
  EXPECT_NE(message(header + "a,1,2,-5,0,0,0\n").find("Z_mm"),
            std::string::npos);
  EXPECT_NE(message("frame_id,xc,yc\n").find("Z_mm"), std::string::npos);
  EXPECT_NE(message("").find("header"), std::string::npos);
}

TEST(SubjectTest, PrefixBeforeUnderscore) {
  EXPECT_EQ(subject_of("s03_f0012"), "s03");
  EXPECT_EQ(subject_of("plain"), "plain");
}

TEST(PairRuleTest, Examples) {
  EXPECT_TRUE(pair_eligible({0, 0, 0}, {35, 0, 0}));
  EXPECT_FALSE(pair_eligible({10, 10, 10}, {20, 20, 20}));
  EXPECT_TRUE(pair_eligible({0, 0, 0}, {0, 0, -30}));
  EXPECT_FALSE(pair_eligible({0, 0, 0}, {35, 0, 0}, PairRule::AllAngles));
  EXPECT_TRUE(pair_eligible({0, 0, 0}, {10, 10, 10}, PairRule::Sum));
}

std::vector<PoseDegrees> random_poses(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  std::uniform_real_distribution<double> p(-60, 60), r(-50, 50), y(-75, 75);
  std::vector<PoseDegrees> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back({p(g), r(g), y(g)});
  return out;
}

TEST(PairSamplerTest, PoolMatchesBruteForce) {
  const auto poses = random_poses(60, 1);
  std::vector<IndexPair> want;
  for (std::size_t i = 0; i < poses.size(); ++i)
    for (std::size_t j = i + 1; j < poses.size(); ++j) {
      double m = 0.0;
      for (std::size_t k = 0; k < 3; ++k)
        m = std::max(m, std::abs(poses[i][k] - poses[j][k]));
      if (m >= 30.0) want.push_back({i, j});
    }
  EXPECT_EQ(eligible_pairs(poses), want);
}

TEST(PairSamplerTest, UniformOverEligiblePool) {
  const auto poses = random_poses(100, 2);
  const auto pool = eligible_pairs(poses);
  ASSERT_GT(pool.size(), 100u);
  const std::size_t draws = 100 * pool.size();
  const auto pairs = pair_sampler(poses, draws, 5);
  ASSERT_EQ(pairs.size(), draws);
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> counts;
  std::size_t swapped = 0;
  for (const auto& p : pairs) {
    ASSERT_NE(p.first, p.second);
    ASSERT_TRUE(pair_eligible(poses[p.first], poses[p.second]));
    if (p.first > p.second) ++swapped;
    ++counts[{std::min(p.first, p.second), std::max(p.first, p.second)}];
  }
  EXPECT_EQ(counts.size(), pool.size());
  const double expected = static_cast<double>(draws) / pool.size();
  double chi2 = 0.0;
  for (const auto& [key, c] : counts) chi2 += (c - expected) * (c - expected) / expected;
  const double dof = static_cast<double>(pool.size() - 1);
  EXPECT_LT(std::abs(chi2 - dof), 5.0 * std::sqrt(2.0 * dof));
  EXPECT_NEAR(static_cast<double>(swapped) / draws, 0.5,
              5.0 * std::sqrt(0.25 / draws));
}

TEST(PairSamplerTest, DeterministicForSeed) {
  const auto poses = random_poses(30, 3);
  EXPECT_EQ(pair_sampler(poses, 100, 9), pair_sampler(poses, 100, 9));
  EXPECT_NE(pair_sampler(poses, 100, 9), pair_sampler(poses, 100, 10));
}

TEST(PairSamplerTest, EmptyPoolThrows) {
  const std::vector<PoseDegrees> poses(5, PoseDegrees{1, 2, 3});
  EXPECT_THROW(pair_sampler(poses, 10, 1), EmptyPairPool);
  EXPECT_THROW(pair_sampler(std::vector<PoseDegrees>{}, 10, 1), EmptyPairPool);
}

const CameraIntrinsics kIntr{287.5, 287.5};
const ImageSize kSize{320, 240};

std::pair<std::size_t, std::size_t> argmin_depth(const DepthFrame& f) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < f.depth.size(); ++i)
    if (f.depth[i] < f.depth[best]) best = i;
  return {best % f.width(), best / f.width()};
}

TEST(RendererTest, FrontalNoseIsNearestAtImageCentre) {
  const auto r = render_synthetic_head(SyntheticHeadSpec{}, kIntr, kSize);
  EXPECT_DOUBLE_EQ(r.annotation.xc, 159.5);
  EXPECT_DOUBLE_EQ(r.annotation.yc, 119.5);
  EXPECT_DOUBLE_EQ(r.annotation.z_mm, 1000.0);
  const auto [x, y] = argmin_depth(r.frame);
  EXPECT_LE(std::abs(x - 159.5), 1.0);
  EXPECT_LE(std::abs(y - 119.5), 1.0);
  // Nearest pixel centres sit half a pixel off the cone apex at 885 mm.
  EXPECT_GE(r.frame.at(x, y), 885.0f);
  EXPECT_LE(r.frame.at(x, y), 890.0f);
  EXPECT_EQ(r.frame.at(0, 0), kBackgroundDepthMm);
}

TEST(RendererTest, OppositeYawsAreMirrorImages) {
  SyntheticHeadSpec a, b;
  a.pose = {10, 0, 35};
  b.pose = {10, 0, -35};
  const auto ra = render_synthetic_head(a, kIntr, kSize);
  const auto rb = render_synthetic_head(b, kIntr, kSize);
  std::size_t mismatched = 0;
  for (std::size_t y = 0; y < kSize.height; ++y)
    for (std::size_t x = 0; x < kSize.width; ++x) {
      const float d = std::abs(ra.frame.at(x, y) -
                               rb.frame.at(kSize.width - 1 - x, y));
      if (d > 1.0f) ++mismatched;
    }
  EXPECT_LE(mismatched, kSize.width * kSize.height / 1000);
}

TEST(RendererTest, NoseTipAtHandComputedPixel) {
  SyntheticHeadSpec spec;
  spec.pose = {0, 0, 30};
  const auto r = render_synthetic_head(spec, kIntr, kSize);
  // Tip (0, 0, -115) turned 30 deg: (-57.5, 0, -99.593) -> z = 900.407 mm,
  // u = 159.5 + 287.5 * (-57.5 / 900.407) = 141.140.
  const auto [x, y] = argmin_depth(r.frame);
  EXPECT_LE(std::abs(x - 141.140), 1.5);
  EXPECT_LE(std::abs(y - 119.5), 1.0);
  EXPECT_NEAR(r.frame.at(x, y), 900.4, 3.0);
}

TEST(RendererTest, RejectsHeadBehindCamera) {
  SyntheticHeadSpec spec;
  spec.position = {0, 0, 50};
  EXPECT_THROW(render_synthetic_head(spec, kIntr, kSize), std::invalid_argument);
}

TEST(SyntheticDatasetTest, FilesAreByteDeterministic) {
  SyntheticDatasetOptions opts;
  opts.subjects = 2;
  opts.frames_per_subject = 3;
  opts.seed = 17;
  const auto a = oracle::scratch_dir("dataset_a");
  const auto b = oracle::scratch_dir("dataset_b");
  generate_dataset(opts, a);
  generate_dataset(opts, b);
  std::size_t files = 0;
  for (const auto& e : std::filesystem::directory_iterator(a)) {
    EXPECT_EQ(file_bytes(e.path()), file_bytes(b / e.path().filename()))
        << e.path().filename();
    ++files;
  }
  EXPECT_EQ(files, 7u);
  const auto loaded = load_dataset(a);
  ASSERT_EQ(loaded.size(), 6u);
  EXPECT_EQ(loaded[4].annotation.frame_id, "s01_f0001");
  EXPECT_EQ(loaded[4].frame.depth,
            render_dataset_frame(opts, 1, 1).frame.depth);
}

TEST(SyntheticDatasetTest, PinnedPoseDistribution) {
  SyntheticDatasetOptions opts;
  opts.subjects = 1;
  opts.frames_per_subject = 5;
  opts.poses = {{5, -10, 20}, {0, 0, 0}};
  for (const auto& f : generate_frames(opts)) {
    EXPECT_EQ(f.annotation.angles, (PoseDegrees{5, -10, 20}));
  }
}

TEST(SyntheticDatasetTest, YawCoversConfiguredSpan) {
  SyntheticDatasetOptions opts;
  opts.subjects = 1;
  opts.frames_per_subject = 500;
  double lo = 1e9, hi = -1e9;
  for (std::size_t i = 0; i < opts.frames_per_subject; ++i) {
    const double yaw = render_dataset_frame(opts, 0, i).annotation.angles.yaw;
    lo = std::min(lo, yaw);
    hi = std::max(hi, yaw);
  }
  EXPECT_GE(lo, -75.0);
  EXPECT_LE(hi, 75.0);
  EXPECT_GE(hi - lo, 0.95 * 150.0);
}

}  // namespace
}  // namespace depthpose
