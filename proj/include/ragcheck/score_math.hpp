#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

#include "ragcheck/error.hpp"

namespace ragcheck {

/// Maps the scorer head's scalar output to a score in (0,1).
/// Evaluated in the numerically stable branch for each sign, then kept off
/// the endpoints that large logits would round to.
inline double sigmoid_score(double logit) {
  if (!std::isfinite(logit)) throw ValidationError("sigmoid_score: non-finite logit");
  double s;
  if (logit >= 0) {
    s = 1.0 / (1.0 + std::exp(-logit));
  } else {
    double e = std::exp(logit);
    s = e / (1.0 + e);
  }
  return std::clamp(s, std::numeric_limits<double>::denorm_min(), std::nextafter(1.0, 0.0));
}

inline constexpr double kDefaultLossEps = 1e-6;

/// Pairwise ranking loss for a (positive, negative) statement pair:
/// -log(max(sigmoid(y_pos) - sigmoid(y_neg), eps)).
/// The clamp keeps the loss finite when the pair is mis-ordered.
inline double rlhf_pair_loss(double y_pos, double y_neg, double eps = kDefaultLossEps) {
  if (!(eps > 0.0 && eps < 1.0)) throw ValidationError("rlhf_pair_loss: eps must lie in (0,1)");
  double gap = sigmoid_score(y_pos) - sigmoid_score(y_neg);
  return -std::log(std::max(gap, eps));
}

}  // namespace ragcheck
