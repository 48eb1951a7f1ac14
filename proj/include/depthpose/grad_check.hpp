#ifndef DEPTHPOSE_GRAD_CHECK_HPP_
#define DEPTHPOSE_GRAD_CHECK_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "depthpose/params.hpp"
#include "depthpose/rng.hpp"

namespace depthpose {

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  /// Coordinates sampled per layer (weights and bias pooled); smaller layers
  /// are checked exhaustively.
  std::size_t coordinates_per_layer = 200;
  /// Magnitudes below this are compared as if they had this size, so that
  /// round-off on vanishing gradients is not reported as a relative error.
  double magnitude_floor = 1e-6;
  std::uint64_t seed = 7;
};

struct LayerCheck {
  std::string name;
  std::size_t coordinates = 0;
  /// Coordinates replaced because the perturbation crossed a kink.
  std::size_t kinks_skipped = 0;
  double max_relative_error = 0.0;
  bool passed = true;
};

struct GradCheckReport {
  std::vector<LayerCheck> layers;

  bool passed() const {
    return std::all_of(layers.begin(), layers.end(),
                       [](const LayerCheck& l) { return l.passed; });
  }
};

inline double relative_error(double analytic, double numeric, double floor) {
  const double scale =
      std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / scale;
}

/// Every index in [0, total) in seeded random order.
inline std::vector<std::size_t> coordinate_order(std::size_t total, Rng& rng) {
  std::vector<std::size_t> order(total);
  for (std::size_t i = 0; i < total; ++i) order[i] = i;
  for (std::size_t i = total; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  return order;
}

/// Loss value plus a signature of the piecewise-smooth region it was
/// evaluated in (for max pooling: the argmax pattern). Equal signatures at
/// w - h, w and w + h mean the difference quotient saw a smooth function.
struct Probe {
  double loss = 0.0;
  std::uint64_t region = 0;
};

using LossFn = std::function<double(const NetworkParams<double>&)>;
using ProbeFn = std::function<Probe(const NetworkParams<double>&)>;
using GradientFn =
    std::function<Gradients<double>(const NetworkParams<double>&)>;

/**
 * Compares analytic gradients against central finite differences
 * (L(w+h) - L(w-h)) / 2h on a sample of coordinates of every layer.
 * Coordinates whose perturbation changes the probe region are replaced by
 * fresh ones and counted in kinks_skipped. Mismatches are reported, never
 * thrown.
 */
inline GradCheckReport grad_check(NetworkParams<double> params,
                                  const ProbeFn& probe,
                                  const GradientFn& gradient,
                                  const GradCheckOptions& opts = {}) {
  const Gradients<double> analytic = gradient(params);
  const std::uint64_t home = probe(params).region;
  Rng rng(opts.seed);
  GradCheckReport report;

  for (std::size_t li = 0; li < params.layers.size(); ++li) {
    auto& layer = params.layers[li];
    const std::size_t nw = layer.weights.size();
    LayerCheck check{layer.name, 0, 0, 0.0, true};
    for (std::size_t idx : coordinate_order(nw + layer.bias.size(), rng)) {
      if (check.coordinates == opts.coordinates_per_layer) break;
      double& slot = idx < nw ? layer.weights[idx] : layer.bias[idx - nw];
      const double a = idx < nw ? analytic[li].d_weights[idx]
                                : analytic[li].d_bias[idx - nw];
      const double saved = slot;
      slot = saved + opts.step;
      const Probe up = probe(params);
      slot = saved - opts.step;
      const Probe down = probe(params);
      slot = saved;
      if (up.region != home || down.region != home) {
        ++check.kinks_skipped;
        continue;
      }
      ++check.coordinates;
      const double numeric = (up.loss - down.loss) / (2.0 * opts.step);
      double err = relative_error(a, numeric, opts.magnitude_floor);
      if (!std::isfinite(err)) err = HUGE_VAL;
      check.max_relative_error = std::max(check.max_relative_error, err);
    }
    check.passed = check.max_relative_error < opts.tolerance;
    report.layers.push_back(std::move(check));
  }
  return report;
}

/// For smooth losses: every point is in the same region.
inline GradCheckReport grad_check(NetworkParams<double> params,
                                  const LossFn& loss,
                                  const GradientFn& gradient,
                                  const GradCheckOptions& opts = {}) {
  return grad_check(
      std::move(params),
      ProbeFn([&loss](const NetworkParams<double>& p) {
        return Probe{loss(p), 0};
      }),
      gradient, opts);
}

}  // namespace depthpose

#endif  // DEPTHPOSE_GRAD_CHECK_HPP_
