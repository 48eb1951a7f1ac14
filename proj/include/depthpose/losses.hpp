#ifndef DEPTHPOSE_LOSSES_HPP_
#define DEPTHPOSE_LOSSES_HPP_

#include "depthpose/pose.hpp"

namespace depthpose {

// All losses work on normalized angles. Gradients are with respect to the
// network predictions.

struct L2Result {
  double loss = 0.0;
  PoseNormalized d_prediction;
};

/// ||target - prediction||^2, gradient 2 (prediction - target).
inline L2Result l2_loss(const PoseNormalized& prediction,
                        const PoseNormalized& target) {
  L2Result r;
  for (std::size_t k = 0; k < 3; ++k) {
    const double diff = prediction[k] - target[k];
    r.loss += diff * diff;
    r.d_prediction[k] = 2.0 * diff;
  }
  return r;
}

/// Predictions and ground truth of the two branches of one training pair.
struct PairPrediction {
  PoseNormalized f1;
  PoseNormalized f2;
  PoseNormalized y1;
  PoseNormalized y2;
};

struct SiameseResult {
  double loss = 0.0;
  PoseNormalized d_f1;
  PoseNormalized d_f2;
};

/// ||(f1 - f2) - (y1 - y2)||^2: the prediction difference regressed onto the
/// ground-truth difference. d_f2 is exactly -d_f1.
inline SiameseResult siamese_loss(const PairPrediction& p) {
  SiameseResult r;
  for (std::size_t k = 0; k < 3; ++k) {
    const double residual = (p.f1[k] - p.f2[k]) - (p.y1[k] - p.y2[k]);
    r.loss += residual * residual;
    r.d_f1[k] = 2.0 * residual;
    r.d_f2[k] = -r.d_f1[k];
  }
  return r;
}

struct LossBreakdown {
  double l_cnn_1 = 0.0;
  double l_cnn_2 = 0.0;
  double l_siam = 0.0;
  double total = 0.0;

  LossBreakdown& operator+=(const LossBreakdown& o) {
    l_cnn_1 += o.l_cnn_1;
    l_cnn_2 += o.l_cnn_2;
    l_siam += o.l_siam;
    total = l_cnn_1 + l_cnn_2 + l_siam;
    return *this;
  }
};

/// Weights of the three terms; the plain sum is (1, 1, 1).
struct LossWeights {
  double cnn_1 = 1.0;
  double cnn_2 = 1.0;
  double siam = 1.0;
};

struct CombinedResult {
  LossBreakdown breakdown;
  PoseNormalized d_f1;
  PoseNormalized d_f2;
};

/// total = l_cnn_1 + l_cnn_2 + l_siam (weighted terms when weights differ
/// from one; the breakdown stores the weighted terms).
inline CombinedResult combined_loss(const PairPrediction& p,
                                    const LossWeights& w = {}) {
  const L2Result a = l2_loss(p.f1, p.y1);
  const L2Result b = l2_loss(p.f2, p.y2);
  const SiameseResult s = siamese_loss(p);
  CombinedResult r;
  r.breakdown.l_cnn_1 = w.cnn_1 * a.loss;
  r.breakdown.l_cnn_2 = w.cnn_2 * b.loss;
  r.breakdown.l_siam = w.siam * s.loss;
  r.breakdown.total =
      r.breakdown.l_cnn_1 + r.breakdown.l_cnn_2 + r.breakdown.l_siam;
  r.d_f1 = w.cnn_1 * a.d_prediction + w.siam * s.d_f1;
  r.d_f2 = w.cnn_2 * b.d_prediction + w.siam * s.d_f2;
  return r;
}

}  // namespace depthpose

#endif  // DEPTHPOSE_LOSSES_HPP_
