#pragma once

// Brute-force reference implementations shared by the unit and acceptance
// tests. Deliberately naive: plain loops, no sorting tricks.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <iterator>
#include <set>
#include <vector>

#include "authformer/rng.hpp"

namespace authformer::oracle {

struct Eer {
  double eer, threshold, frr, far;
};

inline Eer eer(const std::vector<double>& genuine, const std::vector<double>& impostor) {
  std::set<double> scores(genuine.begin(), genuine.end());
  scores.insert(impostor.begin(), impostor.end());
  std::set<double> thresholds{0.0, 1.0};
  for (auto it = scores.begin(); std::next(it) != scores.end(); ++it) thresholds.insert((*it + *std::next(it)) / 2.0);
  Eer best{0, 0, 0, 0};
  double best_gap = 1e9;
  for (double t : thresholds) {
    double rejected = 0, accepted = 0;
    for (double g : genuine) rejected += g < t ? 1 : 0;
    for (double s : impostor) accepted += s >= t ? 1 : 0;
    const double frr = rejected / genuine.size(), far = accepted / impostor.size();
    if (std::abs(far - frr) < best_gap) {
      best_gap = std::abs(far - frr);
      best = {(far + frr) / 2.0, t, frr, far};
    }
  }
  return best;
}

struct Classification {
  double accuracy, macro_recall, macro_f1;
};

/// Per-class TP/FP/FN counted directly from the label pairs.
inline Classification classification(const std::vector<std::size_t>& y_true, const std::vector<std::size_t>& y_pred,
                                     std::size_t num_classes) {
  double correct = 0, recall_sum = 0, f1_sum = 0;
  for (std::size_t i = 0; i < y_true.size(); ++i) correct += y_true[i] == y_pred[i] ? 1 : 0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
      if (y_true[i] == c && y_pred[i] == c) tp += 1;
      if (y_true[i] != c && y_pred[i] == c) fp += 1;
      if (y_true[i] == c && y_pred[i] != c) fn += 1;
    }
    const double recall = tp + fn > 0 ? tp / (tp + fn) : 0.0;
    const double precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    recall_sum += recall;
    f1_sum += precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
  }
  return {correct / y_true.size(), recall_sum / num_classes, f1_sum / num_classes};
}

/// Score lists of length 5..50. Scores are rounded to two decimals half the
/// time so ties and repeated values get exercised.
inline void random_score_lists(Rng& rng, std::vector<double>& genuine, std::vector<double>& impostor) {
  const bool coarse = rng.uniform() < 0.5;
  auto draw = [&](double centre) {
    double s = std::clamp(centre + 0.25 * rng.normal(), 0.0, 1.0);
    return coarse ? std::round(s * 100.0) / 100.0 : s;
  };
  genuine.resize(5 + rng.below(46));
  impostor.resize(5 + rng.below(46));
  for (auto& g : genuine) g = draw(0.65);
  for (auto& s : impostor) s = draw(0.35);
}

}  // namespace authformer::oracle
