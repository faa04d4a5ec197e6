#include "authformer/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "authformer/error.hpp"

namespace authformer {

ClassificationMetrics classification_metrics(std::span<const std::size_t> y_true, std::span<const std::size_t> y_pred,
                                             std::size_t num_classes) {
  if (y_true.size() != y_pred.size()) throw ValidationError("label and prediction counts differ");
  if (y_true.empty()) throw ValidationError("cannot score an empty split");
  if (num_classes == 0) throw ValidationError("num_classes must be positive");
  ClassificationMetrics m;
  m.num_classes = num_classes;
  m.confusion.assign(num_classes * num_classes, 0);
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    if (y_true[i] >= num_classes || y_pred[i] >= num_classes) {
      throw ValidationError("class index out of range at position " + std::to_string(i));
    }
    ++m.confusion[y_true[i] * num_classes + y_pred[i]];
  }
  std::size_t correct = 0;
  m.recall.resize(num_classes);
  m.precision.resize(num_classes);
  m.f1.resize(num_classes);
  m.support.resize(num_classes);
  for (std::size_t c = 0; c < num_classes; ++c) {
    const std::size_t tp = m.confusion[c * num_classes + c];
    std::size_t row = 0, col = 0;
    for (std::size_t k = 0; k < num_classes; ++k) {
      row += m.confusion[c * num_classes + k];
      col += m.confusion[k * num_classes + c];
    }
    correct += tp;
    m.support[c] = row;
    if (row == 0) m.absent_classes.push_back(c);
    m.recall[c] = row ? static_cast<double>(tp) / static_cast<double>(row) : 0.0;
    m.precision[c] = col ? static_cast<double>(tp) / static_cast<double>(col) : 0.0;
    const double denom = m.precision[c] + m.recall[c];
    m.f1[c] = denom > 0 ? 2.0 * m.precision[c] * m.recall[c] / denom : 0.0;
  }
  m.accuracy = static_cast<double>(correct) / static_cast<double>(y_true.size());
  for (std::size_t c = 0; c < num_classes; ++c) {
    m.macro_recall += m.recall[c];
    m.macro_f1 += m.f1[c];
  }
  m.macro_recall /= static_cast<double>(num_classes);
  m.macro_f1 /= static_cast<double>(num_classes);
  return m;
}

double false_reject_rate(std::span<const double> genuine, double threshold) {
  const auto n = std::count_if(genuine.begin(), genuine.end(), [&](double s) { return s < threshold; });
  return static_cast<double>(n) / static_cast<double>(genuine.size());
}

double false_accept_rate(std::span<const double> impostor, double threshold) {
  const auto n = std::count_if(impostor.begin(), impostor.end(), [&](double s) { return s >= threshold; });
  return static_cast<double>(n) / static_cast<double>(impostor.size());
}

EerResult compute_eer(std::span<const double> genuine, std::span<const double> impostor) {
  if (genuine.empty() || impostor.empty()) throw ValidationError("compute_eer needs non-empty score lists");
  auto in_range = [](double s) { return std::isfinite(s) && s >= 0.0 && s <= 1.0; };
  if (!std::all_of(genuine.begin(), genuine.end(), in_range) ||
      !std::all_of(impostor.begin(), impostor.end(), in_range)) {
    throw ValidationError("compute_eer: scores must lie in [0, 1]");
  }
  std::vector<double> gen(genuine.begin(), genuine.end());
  std::vector<double> imp(impostor.begin(), impostor.end());
  std::sort(gen.begin(), gen.end());
  std::sort(imp.begin(), imp.end());

  std::vector<double> all(gen);
  all.insert(all.end(), imp.begin(), imp.end());
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  std::vector<double> thresholds{0.0, 1.0};
  for (std::size_t i = 0; i + 1 < all.size(); ++i) thresholds.push_back((all[i] + all[i + 1]) / 2.0);
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  const double ng = static_cast<double>(gen.size());
  const double ni = static_cast<double>(imp.size());
  EerResult best;
  double best_gap = 2.0;
  for (double t : thresholds) {
    const auto rejected = std::lower_bound(gen.begin(), gen.end(), t) - gen.begin();
    const auto accepted = imp.end() - std::lower_bound(imp.begin(), imp.end(), t);
    const double frr = static_cast<double>(rejected) / ng;
    const double far = static_cast<double>(accepted) / ni;
    const double gap = std::abs(far - frr);
    if (gap < best_gap) {
      best_gap = gap;
      best = {(far + frr) / 2.0, t, 1.0 - frr, frr, far};
    }
  }
  return best;
}

}  // namespace authformer
