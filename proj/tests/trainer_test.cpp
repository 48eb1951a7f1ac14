#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "depthpose/config.hpp"
#include "depthpose/trainer.hpp"
#include "oracles.hpp"

namespace depthpose {
namespace {

SyntheticDatasetOptions small_data(std::size_t subjects, std::size_t frames) {
  SyntheticDatasetOptions opts;
  opts.subjects = subjects;
  opts.frames_per_subject = frames;
  opts.seed = 3;
  return opts;
}

std::vector<PatchSample> small_samples(std::size_t subjects, std::size_t frames,
                                       bool augmentation = false) {
  const auto frames_ = generate_frames(small_data(subjects, frames));
  TrainConfig cfg;
  return prepare_samples(frames_, cfg, augmentation).samples;
}

TrainConfig quick_config() {
  TrainConfig cfg;
  cfg.batch_size = 8;
  cfg.lr_initial = 3e-3;
  cfg.lr_final = 3e-5;
  cfg.epochs = 2;
  cfg.pairs_per_epoch = 8;
  cfg.augmentation = false;
  return cfg;
}

void expect_same_params(const NetworkParams<float>& a,
                        const NetworkParams<float>& b) {
  ASSERT_EQ(a.layers.size(), b.layers.size());
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    EXPECT_EQ(a.layers[i].weights, b.layers[i].weights) << a.layers[i].name;
    EXPECT_EQ(a.layers[i].bias, b.layers[i].bias) << a.layers[i].name;
  }
}

TEST(ScheduleTest, EndpointsAndMonotonic) {
  TrainConfig cfg;
  cfg.epochs = 50;
  EXPECT_EQ(lr_at(0, cfg), 0.1);
  EXPECT_EQ(lr_at(49, cfg), 1e-3);
  EXPECT_NEAR(lr_at(40, cfg), 1e-2, 1e-15);
  for (std::size_t e = 1; e < cfg.epochs; ++e) {
    EXPECT_LE(lr_at(e, cfg), lr_at(e - 1, cfg));
  }
  EXPECT_THROW(lr_at(50, cfg), std::out_of_range);
  cfg.epochs = 1;
  EXPECT_EQ(lr_at(0, cfg), 0.1);
}

TEST(TrainConfigTest, Validation) {
  TrainConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.batch_size = 7;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg.siamese = false;
  EXPECT_NO_THROW(cfg.validate());
  cfg.lr_final = 1.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

class TrainerTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    samples_ = new std::vector<PatchSample>(small_samples(2, 6));
  }
  static void TearDownTestSuite() { delete samples_; }
  static std::vector<PatchSample>* samples_;
};
std::vector<PatchSample>* TrainerTest::samples_ = nullptr;

TEST_F(TrainerTest, ZeroLearningRateLeavesParametersUnchanged) {
  TrainConfig cfg = quick_config();
  cfg.lr_initial = cfg.lr_final = 0.0;
  const auto init = build_network<float>(derive_seed(cfg.seed, 17));
  const auto r = train(cfg, *samples_);
  ASSERT_FALSE(r.diverged);
  expect_same_params(r.params, init);
}

TEST_F(TrainerTest, BaselineItemIsPlainL2Gradient) {
  const auto params = build_network<float>(4);
  const std::vector<TrainItem> items = {{3, 0, std::nullopt, 0}};
  const auto b = batch_gradients(params, *samples_, items);
  const auto& s = (*samples_)[3];
  const auto pass = forward_training(params, s.views[0]);
  const auto l = l2_loss(pass.prediction, s.target);
  const auto g = backward(params, pass.cache, l.d_prediction);
  EXPECT_EQ(b.loss.total, l.loss);
  EXPECT_EQ(b.loss.l_siam, 0.0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    EXPECT_EQ(b.grads[i].d_weights, g[i].d_weights);
    EXPECT_EQ(b.grads[i].d_bias, g[i].d_bias);
  }
}

TEST_F(TrainerTest, PairWithoutSiameseTermIsSumOfBranches) {
  const auto params = build_network<float>(5);
  const std::vector<TrainItem> pair = {{1, 0, 7, 0}};
  const std::vector<TrainItem> singles = {{1, 0, std::nullopt, 0},
                                          {7, 0, std::nullopt, 0}};
  const auto p = batch_gradients(params, *samples_, pair, {1.0, 1.0, 0.0});
  const auto s = batch_gradients(params, *samples_, singles);
  EXPECT_FLOAT_EQ(p.loss.total, s.loss.total);
  for (std::size_t l = 0; l < p.grads.size(); ++l)
    for (std::size_t i = 0; i < p.grads[l].d_weights.size(); ++i) {
      const float want = s.grads[l].d_weights[i];
      ASSERT_NEAR(p.grads[l].d_weights[i], want, 1e-6f * (1 + std::abs(want)));
    }
}

TEST_F(TrainerTest, BranchesReadOneParameterSet) {
  auto params = build_network<float>(5);
  const std::vector<TrainItem> pair = {{1, 0, 7, 0}};
  const auto before = batch_gradients(params, *samples_, pair);
  // Shift the pitch output bias: both branch losses must move.
  params.layers.back().bias[0] += 0.25f;
  const auto after = batch_gradients(params, *samples_, pair);
  EXPECT_NE(before.loss.l_cnn_1, after.loss.l_cnn_1);
  EXPECT_NE(before.loss.l_cnn_2, after.loss.l_cnn_2);
  const auto& a = (*samples_)[1];
  const auto& b = (*samples_)[7];
  EXPECT_FLOAT_EQ(after.loss.l_cnn_1,
                  l2_loss(forward(params, a.views[0]), a.target).loss);
  EXPECT_FLOAT_EQ(after.loss.l_cnn_2,
                  l2_loss(forward(params, b.views[0]), b.target).loss);
}

TEST_F(TrainerTest, LoggedTotalIsSumOfParts) {
  const auto r = train(quick_config(), *samples_);
  ASSERT_EQ(r.log.size(), 2u);
  for (const auto& e : r.log) {
    EXPECT_EQ(e.loss.total, e.loss.l_cnn_1 + e.loss.l_cnn_2 + e.loss.l_siam);
    EXPECT_GT(e.loss.l_siam, 0.0);
    EXPECT_NE(format_epoch_log(e).find("total="), std::string::npos);
  }
}

TEST_F(TrainerTest, ThreadCountDoesNotChangeResults) {
  const auto params = build_network<float>(6);
  const auto items =
      epoch_items(*samples_, [&] {
        std::vector<PoseDegrees> a;
        for (const auto& s : *samples_) a.push_back(s.angles);
        return a;
      }(), quick_config(), 0);
  const auto one = batch_gradients(params, *samples_, items, {}, 1);
  const auto four = batch_gradients(params, *samples_, items, {}, 4);
  EXPECT_EQ(one.loss.total, four.loss.total);
  for (std::size_t l = 0; l < one.grads.size(); ++l) {
    EXPECT_EQ(one.grads[l].d_weights, four.grads[l].d_weights);
  }
  TrainConfig cfg = quick_config();
  const auto a = train(cfg, *samples_);
  cfg.threads = 3;
  const auto b = train(cfg, *samples_);
  expect_same_params(a.params, b.params);
}

TEST_F(TrainerTest, EmptyPairPoolIsReported) {
  std::vector<PatchSample> same(samples_->begin(), samples_->begin() + 3);
  for (auto& s : same) s.angles = {1, 2, 3};
  EXPECT_THROW(train(quick_config(), same), EmptyPairPool);
}

TEST(SplitTest, HoldsOutWholeSubjects) {
  auto frames = generate_frames(small_data(5, 2));
  const auto [train, val] = split_by_subject(frames, 0.2);
  EXPECT_EQ(train.size(), 8u);
  EXPECT_EQ(val.size(), 2u);
  for (const auto& f : val) EXPECT_EQ(subject_of(f.annotation.frame_id), "s04");
  const auto [all, none] = split_by_subject(generate_frames(small_data(1, 3)), 0.5);
  EXPECT_EQ(all.size(), 3u);
  EXPECT_TRUE(none.empty());
}

TEST(ConfigTest, ParsesOverridesAndComments) {
  std::istringstream in(
      "# comment\n"
      "batch_size = 32\n"
      "lr_initial=0.05   # trailing\n"
      "\n"
      "siamese=false\n"
      "pair_rule=sum\n");
  const auto cfg = parse_config(in);
  EXPECT_EQ(cfg.batch_size, 32u);
  EXPECT_EQ(cfg.lr_initial, 0.05);
  EXPECT_FALSE(cfg.siamese);
  EXPECT_EQ(cfg.pair_rule, PairRule::Sum);
  EXPECT_EQ(cfg.momentum, 0.9);
}

TEST(ConfigTest, UnknownKeyNamesLine) {
  std::istringstream in("batch_size=8\n\nlearning_rate=0.1\n");
  try {
    parse_config(in, {}, "run.cfg");
    FAIL() << "unknown key accepted";
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("run.cfg:3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("learning_rate"), std::string::npos) << msg;
  }
  std::istringstream bad("epochs=ten\n");
  EXPECT_THROW(parse_config(bad), ConfigError);
}

TEST(ConfigTest, TextAndManifestRoundTrip) {
  TrainConfig cfg;
  cfg.weight_decay = 1.0 / 3.0;
  cfg.pair_threshold_deg = 25.5;
  cfg.seed = 123456789012345ULL;
  cfg.augmentation = false;
  std::istringstream in(config_text(cfg));
  EXPECT_EQ(config_text(parse_config(in)), config_text(cfg));
  const auto dir = oracle::scratch_dir("manifest");
  write_manifest(dir / "m.txt", cfg, "train --out x", {{"data", "d"}});
  EXPECT_EQ(config_text(load_manifest(dir / "m.txt")), config_text(cfg));
}

std::vector<PatchSample> stub_samples(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  std::uniform_real_distribution<double> u(-60, 60);
  std::vector<PatchSample> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i].frame_id = "s00_f" + std::to_string(i);
    out[i].angles = {u(g), u(g), u(g)};
  }
  return out;
}

TEST(EvaluationTest, PerfectPredictorScoresZero) {
  const auto samples = stub_samples(20, 1);
  const auto r =
      evaluate_with([](const PatchSample& s) { return s.angles; },
                    std::span<const PatchSample>(samples));
  EXPECT_EQ(r.mae, (PoseDegrees{0, 0, 0}));
  EXPECT_EQ(r.per_frame.size(), 20u);
}

TEST(EvaluationTest, ConstantOffsetPredictor) {
  const auto samples = stub_samples(20, 2);
  const auto r = evaluate_with(
      [](const PatchSample& s) { return s.angles + PoseDegrees{1, -2, 3}; },
      std::span<const PatchSample>(samples));
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_NEAR(r.mae[k], k + 1.0, 1e-12);
    EXPECT_NEAR(r.stddev[k], 0.0, 1e-12);
  }
  std::size_t binned = 0;
  for (const auto& b : r.angle_bins[2]) binned += b.count;
  EXPECT_EQ(binned, 20u);
}

TEST(EvaluationTest, CsvRowsReproduceSummary) {
  const auto samples = stub_samples(37, 3);
  std::mt19937_64 g(9);
  std::normal_distribution<double> noise(0.0, 5.0);
  std::vector<PoseDegrees> preds;
  for (const auto& s : samples)
    preds.push_back(s.angles + PoseDegrees{noise(g), noise(g), noise(g)});
  std::size_t i = 0;
  const auto r = evaluate_with([&](const PatchSample&) { return preds[i++]; },
                               std::span<const PatchSample>(samples));
  const auto dir = oracle::scratch_dir("eval_csv");
  write_per_frame_csv(r, dir / "per_frame.csv");
  std::ifstream in(dir / "per_frame.csv");
  std::string line;
  std::getline(in, line);
  PoseDegrees sum;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    ASSERT_EQ(f.size(), 10u);
    for (std::size_t k = 0; k < 3; ++k) {
      const double gt = std::stod(f[1 + k]), pred = std::stod(f[4 + k]);
      EXPECT_NEAR(std::stod(f[7 + k]), std::abs(pred - gt), 1e-9);
      sum[k] += std::stod(f[7 + k]);
    }
    ++rows;
  }
  ASSERT_EQ(rows, 37u);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(sum[k] / rows, r.mae[k], 1e-9);
}

TEST(EvaluationTest, ResultIndependentOfFrameOrder) {
  std::vector<FrameResult> rows;
  std::mt19937_64 g(4);
  std::uniform_real_distribution<double> u(-70, 70);
  for (int i = 0; i < 101; ++i)
    rows.push_back(score_frame(std::to_string(i), {u(g), u(g), u(g)},
                               {u(g), u(g), u(g)}));
  const auto a = summarize(rows);
  std::shuffle(rows.begin(), rows.end(), g);
  const auto b = summarize(rows);
  EXPECT_EQ(a.mae, b.mae);
  EXPECT_EQ(a.stddev, b.stddev);
  EXPECT_EQ(summary_json(a).dump(), summary_json(b).dump());
}

TEST(PredictTest, DeterministicAndReportsBadCrops) {
  const auto params = build_network<float>(8);
  const auto frame = render_dataset_frame(small_data(1, 1), 0, 0);
  const auto& a = frame.annotation;
  const auto p1 = predict(params, frame.frame, a.xc, a.yc, a.z_mm);
  const auto p2 = predict(params, frame.frame, a.xc, a.yc, a.z_mm);
  ASSERT_TRUE(p1.angles && p2.angles);
  EXPECT_EQ(*p1.angles, *p2.angles);
  EXPECT_GT(p1.latency_ms, 0.0);
  const auto bad = predict(params, frame.frame, -10.0, a.yc, a.z_mm);
  EXPECT_FALSE(bad.angles);
  EXPECT_FALSE(bad.error.empty());
}

TEST(PredictTest, FittedModelRecoversTrainingPose) {
  auto data = small_data(1, 8);
  data.poses = {{20, -10, 30}, {0, 0, 0}};
  const auto frames = generate_frames(data);
  TrainConfig cfg = quick_config();
  cfg.siamese = false;
  cfg.epochs = 25;
  cfg.pairs_per_epoch = 16;
  const auto samples = prepare_samples(frames, cfg, false).samples;
  const auto r = train(cfg, samples);
  ASSERT_FALSE(r.diverged);
  const auto& a = frames[0].annotation;
  const auto p = predict(r.params, frames[0].frame, a.xc, a.yc, a.z_mm, cfg);
  ASSERT_TRUE(p.angles);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_NEAR((*p.angles)[k], a.angles[k], 3.0) << angle_name(k);
  }
}

}  // namespace
}  // namespace depthpose
