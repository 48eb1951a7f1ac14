#ifndef DEPTHPOSE_TRAINER_HPP_
#define DEPTHPOSE_TRAINER_HPP_

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "depthpose/data.hpp"
#include "depthpose/grad_check.hpp"
#include "depthpose/losses.hpp"
#include "depthpose/posenet.hpp"
#include "depthpose/preprocess.hpp"
#include "depthpose/rng.hpp"
#include "depthpose/sgd.hpp"

namespace depthpose {

struct TrainConfig {
  std::size_t batch_size = 64;  // images; a Siamese batch holds half as many pairs
  double momentum = 0.9;
  double weight_decay = 5e-4;
  double lr_initial = 1e-1;
  double lr_final = 1e-3;
  std::size_t epochs = 50;
  std::size_t pairs_per_epoch = 512;
  std::uint64_t seed = 1;
  bool augmentation = true;
  bool siamese = true;
  PairRule pair_rule = PairRule::AnyAngle;
  double pair_threshold_deg = kPairThresholdDeg;
  LossWeights loss_weights;
  AngleRange angle_range;
  AugmentOptions augment;
  double face_width_mm = kGenericFaceWidthMm;
  /// Abort when a batch loss exceeds this multiple of the first batch loss.
  double divergence_factor = 10.0;
  double validation_fraction = 0.1;
  /// Worker threads for per-sample passes; results do not depend on it.
  std::size_t threads = 1;

  void validate() const {
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (siamese && (batch_size < 2 || batch_size % 2 != 0)) {
      throw std::invalid_argument(
          "batch_size must be even and >= 2 in Siamese mode");
    }
    if (!(lr_initial >= 0.0) || !(lr_final >= 0.0) || lr_final > lr_initial) {
      throw std::invalid_argument("need 0 <= lr_final <= lr_initial");
    }
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (pairs_per_epoch < 1) {
      throw std::invalid_argument("pairs_per_epoch must be >= 1");
    }
    if (threads < 1) throw std::invalid_argument("threads must be >= 1");
    SgdConfig{lr_initial, momentum, weight_decay}.validate();
    angle_range.validate();
  }
};

/**
 * Three-stage decade schedule: lr_initial for the first 70% of epochs, the
 * geometric mean of lr_initial and lr_final for the next 20%, lr_final for
 * the rest. The last epoch always runs at lr_final when there are at least
 * two epochs.
 */
inline double lr_at(std::size_t epoch, const TrainConfig& cfg) {
  const std::size_t n = cfg.epochs;
  if (epoch >= n) throw std::out_of_range("epoch beyond schedule");
  const double mid = std::sqrt(cfg.lr_initial * cfg.lr_final);
  if (n >= 2 && epoch == n - 1) return cfg.lr_final;
  if (epoch * 10 < n * 7) return cfg.lr_initial;
  if (epoch * 10 < n * 9) return mid;
  return cfg.lr_final;
}

// ---------------------------------------------------------------------------
// Samples

/// A preprocessed frame: standardized network inputs plus its labels.
struct PatchSample {
  std::string frame_id;
  std::string subject;
  PoseDegrees angles;
  PoseNormalized target;
  std::vector<Tensor<float>> views;  // views[0] is the unaugmented patch
};

struct PrepareResult {
  std::vector<PatchSample> samples;
  std::vector<std::string> skipped;  // frame ids whose patch failed
};

inline CropSpec crop_for(const LabeledFrame& f, double face_width_mm) {
  return make_crop(f.frame.intrinsics, f.annotation.xc, f.annotation.yc,
                   f.annotation.z_mm, face_width_mm);
}

inline Tensor<float> network_input(const DepthFrame& frame,
                                   const CropSpec& crop) {
  return tensor_cast<float>(standardize(extract_patch(frame, crop)));
}

/// Crop, resize and standardize one frame; `index` seeds its augmentation.
/// Returns nullopt when no valid patch can be built.
inline std::optional<PatchSample> prepare_sample(const LabeledFrame& f,
                                                 std::size_t index,
                                                 const TrainConfig& cfg,
                                                 bool with_augmentation) {
  PatchSample s;
  s.frame_id = f.annotation.frame_id;
  s.subject = subject_of(s.frame_id);
  s.angles = f.annotation.angles;
  s.target = normalize_angles(s.angles, cfg.angle_range);
  try {
    const CropSpec crop = crop_for(f, cfg.face_width_mm);
    s.views.push_back(network_input(f.frame, crop));
    if (with_augmentation) {
      for (auto& a :
           augment(f.frame, crop, derive_seed(cfg.seed, index), cfg.augment)) {
        s.views.push_back(tensor_cast<float>(a.patch));
      }
    }
  } catch (const DegeneratePatch&) {
    return std::nullopt;
  } catch (const std::out_of_range&) {
    return std::nullopt;
  }
  return s;
}

inline PrepareResult prepare_samples(std::span<const LabeledFrame> frames,
                                     const TrainConfig& cfg,
                                     bool with_augmentation) {
  PrepareResult r;
  r.samples.reserve(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    auto s = prepare_sample(frames[i], i, cfg, with_augmentation);
    if (s) {
      r.samples.push_back(std::move(*s));
    } else {
      r.skipped.push_back(frames[i].annotation.frame_id);
    }
  }
  return r;
}

/// Holds out the last round(fraction * subjects) subjects (sorted by key,
/// at least one when there are two or more subjects).
inline std::pair<std::vector<LabeledFrame>, std::vector<LabeledFrame>>
split_by_subject(std::vector<LabeledFrame> frames, double fraction) {
  std::set<std::string> subjects;
  for (const auto& f : frames) subjects.insert(subject_of(f.annotation.frame_id));
  std::size_t held = 0;
  if (subjects.size() >= 2 && fraction > 0.0) {
    held = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::lround(fraction * subjects.size())));
    held = std::min(held, subjects.size() - 1);
  }
  std::set<std::string> holdout(std::prev(subjects.end(), held),
                                subjects.end());
  std::vector<LabeledFrame> train, val;
  for (auto& f : frames) {
    (holdout.count(subject_of(f.annotation.frame_id)) ? val : train)
        .push_back(std::move(f));
  }
  return {std::move(train), std::move(val)};
}

// ---------------------------------------------------------------------------
// Evaluation

struct FrameResult {
  std::string frame_id;
  PoseDegrees gt;
  PoseDegrees pred;
  PoseDegrees abs_err;
};

struct AngleBin {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 0;
  double mean_abs_error = 0.0;
};

struct EvalReport {
  PoseDegrees mae;
  PoseDegrees stddev;
  std::vector<FrameResult> per_frame;
  /// Per angle: mean absolute error of that angle, binned by its true value.
  std::array<std::vector<AngleBin>, 3> angle_bins;
  std::size_t excluded = 0;
};

namespace detail {

/// Sum in ascending order so the result does not depend on input order.
inline double ordered_sum(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

}  // namespace detail

inline EvalReport summarize(std::vector<FrameResult> rows,
                            std::size_t excluded = 0,
                            const AngleRange& range = {},
                            double bin_width_deg = 10.0) {
  EvalReport r;
  r.excluded = excluded;
  const double n = static_cast<double>(rows.size());
  for (std::size_t k = 0; k < 3; ++k) {
    std::vector<double> errs;
    errs.reserve(rows.size());
    for (const auto& f : rows) errs.push_back(f.abs_err[k]);
    if (!rows.empty()) {
      const double mean = detail::ordered_sum(errs) / n;
      std::vector<double> sq;
      sq.reserve(errs.size());
      for (double e : errs) sq.push_back((e - mean) * (e - mean));
      r.mae[k] = mean;
      r.stddev[k] = std::sqrt(detail::ordered_sum(std::move(sq)) / n);
    }

    const double lim = range[k];
    const auto nbins =
        static_cast<std::size_t>(std::ceil(2.0 * lim / bin_width_deg));
    std::vector<std::vector<double>> bucket(nbins);
    for (const auto& f : rows) {
      const double g = std::clamp(f.gt[k], -lim, lim);
      auto b = static_cast<std::size_t>(std::floor((g + lim) / bin_width_deg));
      b = std::min(b, nbins - 1);
      bucket[b].push_back(f.abs_err[k]);
    }
    for (std::size_t b = 0; b < nbins; ++b) {
      AngleBin bin;
      bin.lo = -lim + b * bin_width_deg;
      bin.hi = std::min(lim, bin.lo + bin_width_deg);
      bin.count = bucket[b].size();
      if (bin.count) {
        bin.mean_abs_error =
            detail::ordered_sum(std::move(bucket[b])) / bin.count;
      }
      r.angle_bins[k].push_back(bin);
    }
  }
  r.per_frame = std::move(rows);
  return r;
}

inline FrameResult score_frame(std::string frame_id, const PoseDegrees& gt,
                               const PoseDegrees& pred) {
  FrameResult f{std::move(frame_id), gt, pred, {}};
  for (std::size_t k = 0; k < 3; ++k) f.abs_err[k] = std::abs(pred[k] - gt[k]);
  return f;
}

/// Scores any predictor (sample -> degrees) over prepared samples.
template <typename Predictor>
EvalReport evaluate_with(Predictor&& predict_degrees,
                         std::span<const PatchSample> samples,
                         const AngleRange& range = {}) {
  std::vector<FrameResult> rows;
  rows.reserve(samples.size());
  for (const auto& s : samples) {
    rows.push_back(score_frame(s.frame_id, s.angles, predict_degrees(s)));
  }
  return summarize(std::move(rows), 0, range);
}

/// Network predictions on the unaugmented view, denormalized to degrees.
template <typename T>
EvalReport evaluate(const NetworkParams<T>& params,
                    std::span<const PatchSample> samples,
                    const AngleRange& range = {}) {
  return evaluate_with(
      [&](const PatchSample& s) {
        return denormalize_angles(
            forward(params, tensor_cast<T>(s.views.at(0))), range);
      },
      samples, range);
}

/// Full pipeline from annotated frames; frames whose patch cannot be built
/// are excluded and counted.
template <typename T>
EvalReport evaluate_frames(const NetworkParams<T>& params,
                           std::span<const LabeledFrame> frames,
                           const TrainConfig& cfg) {
  PrepareResult prepared = prepare_samples(frames, cfg, false);
  EvalReport r = evaluate(params, std::span<const PatchSample>(prepared.samples),
                          cfg.angle_range);
  r.excluded = prepared.skipped.size();
  return r;
}

inline void write_per_frame_csv(const EvalReport& r,
                                const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << "frame_id,gt_pitch,gt_roll,gt_yaw,pred_pitch,pred_roll,pred_yaw,"
         "err_pitch,err_roll,err_yaw\n";
  for (const auto& f : r.per_frame) {
    out << f.frame_id;
    for (const auto* p : {&f.gt, &f.pred, &f.abs_err}) {
      for (std::size_t k = 0; k < 3; ++k) out << ',' << format_number((*p)[k]);
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

inline nlohmann::json pose_json(const PoseDegrees& p) {
  return {{"pitch", p.pitch}, {"roll", p.roll}, {"yaw", p.yaw}};
}

inline nlohmann::json summary_json(const EvalReport& r) {
  nlohmann::json j;
  j["frames"] = r.per_frame.size();
  j["excluded"] = r.excluded;
  j["mae_degrees"] = pose_json(r.mae);
  j["std_degrees"] = pose_json(r.stddev);
  for (std::size_t k = 0; k < 3; ++k) {
    auto& bins = j["angle_bins"][angle_name(k)];
    bins = nlohmann::json::array();
    for (const auto& b : r.angle_bins[k]) {
      bins.push_back({{"lo", b.lo},
                      {"hi", b.hi},
                      {"count", b.count},
                      {"mean_abs_error", b.mean_abs_error}});
    }
  }
  return j;
}

inline void write_summary_json(const EvalReport& r,
                               const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << summary_json(r).dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Training

struct EpochLog {
  std::size_t epoch = 0;
  double lr = 0.0;
  LossBreakdown loss;  // mean per pair (per image in baseline mode)
  std::optional<PoseDegrees> validation_mae;
  double seconds = 0.0;
};

inline std::string format_epoch_log(const EpochLog& e) {
  std::ostringstream os;
  os << std::setprecision(9) << "epoch=" << e.epoch << " lr=" << e.lr
     << " l_cnn_1=" << e.loss.l_cnn_1 << " l_cnn_2=" << e.loss.l_cnn_2
     << " l_siam=" << e.loss.l_siam << " total=" << e.loss.total;
  if (e.validation_mae) {
    os << " val_mae_pitch=" << e.validation_mae->pitch
       << " val_mae_roll=" << e.validation_mae->roll
       << " val_mae_yaw=" << e.validation_mae->yaw;
  }
  os << " seconds=" << std::setprecision(4) << e.seconds;
  return os.str();
}

struct TrainResult {
  NetworkParams<float> params;
  std::vector<EpochLog> log;
  bool diverged = false;
  std::string divergence_reason;
};

/// One training unit: a pair of (sample, view) in Siamese mode, or a single
/// (sample, view) with second == nullopt in baseline mode.
struct TrainItem {
  std::size_t first = 0;
  std::size_t first_view = 0;
  std::optional<std::size_t> second;
  std::size_t second_view = 0;
};

struct BatchResult {
  Gradients<float> grads;
  LossBreakdown loss;  // summed over the batch
  std::size_t units = 0;
};

namespace detail {

struct ItemOutcome {
  Gradients<float> grads;
  LossBreakdown loss;
};

template <typename T>
ItemOutcome run_item(const NetworkParams<T>& params,
                     std::span<const PatchSample> samples, const TrainItem& item,
                     const LossWeights& weights) {
  const PatchSample& a = samples[item.first];
  auto pass_a = forward_training(params, a.views.at(item.first_view));
  ItemOutcome out;
  if (!item.second) {
    const L2Result l = l2_loss(pass_a.prediction, a.target);
    out.loss.l_cnn_1 = weights.cnn_1 * l.loss;
    out.loss.total = out.loss.l_cnn_1;
    out.grads = backward(params, pass_a.cache, weights.cnn_1 * l.d_prediction);
    return out;
  }
  const PatchSample& b = samples[*item.second];
  auto pass_b = forward_training(params, b.views.at(item.second_view));
  const CombinedResult c = combined_loss(
      {pass_a.prediction, pass_b.prediction, a.target, b.target}, weights);
  out.loss = c.breakdown;
  // Both branches share one parameter set, so their gradients add.
  out.grads = backward(params, pass_a.cache, c.d_f1);
  accumulate(out.grads, backward(params, pass_b.cache, c.d_f2));
  return out;
}

}  // namespace detail

/**
 * Summed loss and gradient of a batch. Items are reduced in index order, so
 * the result is bitwise independent of the thread count.
 */
template <typename T>
BatchResult batch_gradients(const NetworkParams<T>& params,
                            std::span<const PatchSample> samples,
                            std::span<const TrainItem> items,
                            const LossWeights& weights = {},
                            std::size_t threads = 1) {
  BatchResult r;
  r.grads = zero_gradients(params);
  r.units = items.size();
  if (threads <= 1 || items.size() < 2) {
    for (const auto& it : items) {
      const auto o = detail::run_item(params, samples, it, weights);
      accumulate(r.grads, o.grads);
      r.loss += o.loss;
    }
    return r;
  }
  std::vector<detail::ItemOutcome> outcomes(items.size());
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < items.size(); i += threads) {
          outcomes[i] = detail::run_item(params, samples, items[i], weights);
        }
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  for (const auto& o : outcomes) {
    accumulate(r.grads, o.grads);
    r.loss += o.loss;
  }
  return r;
}

/// Training units of one epoch, in batch order.
inline std::vector<TrainItem> epoch_items(std::span<const PatchSample> samples,
                                          std::span<const PoseDegrees> angles,
                                          const TrainConfig& cfg,
                                          std::size_t epoch) {
  Rng rng(derive_seed(cfg.seed, 1000003 + epoch));
  const auto pick_view = [&](std::size_t s) -> std::size_t {
    const std::size_t n = samples[s].views.size();
    return cfg.augmentation && n > 1 ? rng.below(n) : 0;
  };
  std::vector<TrainItem> items;
  if (cfg.siamese) {
    for (const auto& p :
         pair_sampler(angles, cfg.pairs_per_epoch, rng.next(), cfg.pair_rule,
                      cfg.pair_threshold_deg)) {
      TrainItem it{p.first, 0, p.second, 0};
      it.first_view = pick_view(p.first);
      it.second_view = pick_view(p.second);
      items.push_back(it);
    }
  } else {
    for (std::size_t n = 0; n < 2 * cfg.pairs_per_epoch; ++n) {
      const std::size_t s = rng.below(samples.size());
      items.push_back({s, pick_view(s), std::nullopt, 0});
    }
  }
  return items;
}

/**
 * SGD with momentum over the configured epochs. In Siamese mode both
 * branches run through the same parameters and the combined loss is
 * minimized; with siamese off this is plain L2 regression on single images.
 * Validation MAE is logged per epoch when `validation` is non-empty.
 * `on_epoch` sees every log entry as it is produced.
 */
inline TrainResult train(
    const TrainConfig& cfg, std::span<const PatchSample> training,
    std::span<const PatchSample> validation = {},
    const std::function<void(const EpochLog&)>& on_epoch = {},
    std::optional<NetworkParams<float>> initial = std::nullopt) {
  cfg.validate();
  if (training.empty()) throw std::invalid_argument("training set is empty");
  std::vector<PoseDegrees> angles;
  for (const auto& s : training) angles.push_back(s.angles);
  if (cfg.siamese && eligible_pairs(angles, cfg.pair_rule,
                                    cfg.pair_threshold_deg).empty()) {
    throw EmptyPairPool();
  }

  TrainResult result;
  result.params = initial ? std::move(*initial)
                          : build_network<float>(derive_seed(cfg.seed, 17));
  validate_params(result.params);
  NetworkParams<float> last_good = result.params;
  const std::size_t per_batch = cfg.siamese ? cfg.batch_size / 2 : cfg.batch_size;
  std::optional<double> first_loss;

  for (std::size_t epoch = 0; epoch < cfg.epochs && !result.diverged; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    EpochLog log;
    log.epoch = epoch;
    log.lr = lr_at(epoch, cfg);
    const SgdConfig sgd{log.lr, cfg.momentum, cfg.weight_decay};
    const auto items = epoch_items(training, angles, cfg, epoch);

    LossBreakdown sum;
    for (std::size_t start = 0; start < items.size(); start += per_batch) {
      const std::size_t count = std::min(per_batch, items.size() - start);
      BatchResult b = batch_gradients(
          result.params, training,
          std::span<const TrainItem>(items).subspan(start, count),
          cfg.loss_weights, cfg.threads);
      const double batch_loss = b.loss.total / count;
      if (!first_loss) first_loss = batch_loss;
      if (!std::isfinite(batch_loss) ||
          batch_loss > cfg.divergence_factor * std::max(*first_loss, 1e-12)) {
        result.diverged = true;
        result.divergence_reason = "batch loss " + std::to_string(batch_loss) +
                                   " in epoch " + std::to_string(epoch);
        break;
      }
      try {
        sgd_step(result.params, b.grads, sgd);
      } catch (const NonFiniteGradient& e) {
        result.diverged = true;
        result.divergence_reason = e.what();
        break;
      }
      sum += b.loss;
    }
    if (result.diverged) {
      result.params = last_good;
      break;
    }
    const double n = static_cast<double>(items.size());
    log.loss.l_cnn_1 = sum.l_cnn_1 / n;
    log.loss.l_cnn_2 = sum.l_cnn_2 / n;
    log.loss.l_siam = sum.l_siam / n;
    log.loss.total = log.loss.l_cnn_1 + log.loss.l_cnn_2 + log.loss.l_siam;
    if (!validation.empty()) {
      log.validation_mae = evaluate(result.params, validation, cfg.angle_range).mae;
    }
    log.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    last_good = result.params;
    if (on_epoch) on_epoch(log);
    result.log.push_back(log);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Whole-network gradient check

/// Finite-difference check of the combined pair loss through both branches
/// of a freshly initialized double-precision network.
inline GradCheckReport pair_grad_check(std::uint64_t seed,
                                       const GradCheckOptions& opts = {},
                                       const LossWeights& weights = {}) {
  Rng rng(derive_seed(seed, 5));
  const auto random_patch = [&] {
    Tensor<double> t({1, kInputSide, kInputSide});
    for (auto& v : t.values()) v = rng.normal();
    return t;
  };
  const auto random_target = [&] {
    return PoseNormalized{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0),
                          rng.uniform(-1.0, 1.0)};
  };
  const Tensor<double> x1 = random_patch(), x2 = random_patch();
  const PoseNormalized y1 = random_target(), y2 = random_target();
  const ProbeFn probe = [&](const NetworkParams<double>& p) {
    const auto a = forward_training(p, x1);
    const auto b = forward_training(p, x2);
    return Probe{
        combined_loss({a.prediction, b.prediction, y1, y2}, weights)
            .breakdown.total,
        pool_signature(b.cache, pool_signature(a.cache))};
  };
  const GradientFn gradient = [&](const NetworkParams<double>& p) {
    auto a = forward_training(p, x1);
    auto b = forward_training(p, x2);
    const auto c =
        combined_loss({a.prediction, b.prediction, y1, y2}, weights);
    auto g = backward(p, a.cache, c.d_f1);
    accumulate(g, backward(p, b.cache, c.d_f2));
    return g;
  };
  return grad_check(build_network<double>(seed), probe, gradient, opts);
}

// ---------------------------------------------------------------------------
// Inference

struct Prediction {
  std::optional<PoseDegrees> angles;
  double latency_ms = 0.0;
  std::string error;
};

/// crop -> resize -> standardize -> forward -> denormalize, timed.
template <typename T>
Prediction predict(const NetworkParams<T>& params, const DepthFrame& frame,
                   double xc, double yc, double z_mm,
                   const TrainConfig& cfg = {}) {
  Prediction p;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    const CropSpec crop =
        make_crop(frame.intrinsics, xc, yc, z_mm, cfg.face_width_mm);
    const Tensor<T> input =
        tensor_cast<T>(standardize(extract_patch(frame, crop)));
    p.angles = denormalize_angles(forward(params, input), cfg.angle_range);
  } catch (const DegeneratePatch& e) {
    p.error = e.what();
  } catch (const std::out_of_range& e) {
    p.error = e.what();
  }
  p.latency_ms = std::chrono::duration<double, std::milli>(
                     std::chrono::steady_clock::now() - t0)
                     .count();
  return p;
}

// ---------------------------------------------------------------------------
// Siamese versus single-network comparison

struct ComparisonOptions {
  SyntheticDatasetOptions data;  // subjects = train + test
  std::size_t train_subjects = 10;
  TrainConfig train;
};

struct ComparisonResult {
  EvalReport siamese;
  EvalReport baseline;
  NetworkParams<float> siamese_params;
  NetworkParams<float> baseline_params;
  std::string table;
};

inline std::string comparison_table(const EvalReport& baseline,
                                    const EvalReport& siamese) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << "| Method          | Pitch         | Roll          | Yaw           |\n"
     << "|-----------------|---------------|---------------|---------------|\n";
  const auto row = [&](const char* name, const EvalReport& r) {
    os << "| " << std::left << std::setw(15) << name << " |";
    for (std::size_t k = 0; k < 3; ++k) {
      std::ostringstream cell;
      cell << std::fixed << std::setprecision(2) << r.mae[k] << " +- "
           << r.stddev[k];
      os << ' ' << std::setw(13) << cell.str() << " |";
    }
    os << '\n';
  };
  row("single network", baseline);
  row("siamese", siamese);
  return os.str();
}

/// Trains the same architecture with and without the Siamese loss on
/// identical data and reports test MAE side by side.
inline ComparisonResult compare_siamese_baseline(
    const ComparisonOptions& opts,
    const std::function<void(const std::string&, const EpochLog&)>& on_epoch =
        {}) {
  if (opts.train_subjects == 0 || opts.train_subjects >= opts.data.subjects) {
    throw std::invalid_argument("need at least one train and one test subject");
  }
  PrepareResult train_set, test_set;
  std::size_t index = 0;
  for (std::size_t subject = 0; subject < opts.data.subjects; ++subject) {
    const bool is_train = subject < opts.train_subjects;
    auto& dest = is_train ? train_set : test_set;
    for (std::size_t f = 0; f < opts.data.frames_per_subject; ++f, ++index) {
      const LabeledFrame frame = render_dataset_frame(opts.data, subject, f);
      auto s = prepare_sample(frame, index, opts.train,
                              is_train && opts.train.augmentation);
      if (s) {
        dest.samples.push_back(std::move(*s));
      } else {
        dest.skipped.push_back(frame.annotation.frame_id);
      }
    }
  }

  ComparisonResult r;
  const auto run = [&](bool siamese, const char* tag) {
    TrainConfig cfg = opts.train;
    cfg.siamese = siamese;
    auto res = train(cfg, train_set.samples, {}, [&](const EpochLog& e) {
      if (on_epoch) on_epoch(tag, e);
    });
    if (res.diverged) {
      throw std::runtime_error(std::string(tag) + " training diverged: " +
                               res.divergence_reason);
    }
    EvalReport rep = evaluate(res.params,
                              std::span<const PatchSample>(test_set.samples),
                              cfg.angle_range);
    rep.excluded = test_set.skipped.size();
    return std::make_pair(std::move(res.params), std::move(rep));
  };
  std::tie(r.baseline_params, r.baseline) = run(false, "single");
  std::tie(r.siamese_params, r.siamese) = run(true, "siamese");
  r.table = comparison_table(r.baseline, r.siamese);
  return r;
}

}  // namespace depthpose

#endif  // DEPTHPOSE_TRAINER_HPP_
