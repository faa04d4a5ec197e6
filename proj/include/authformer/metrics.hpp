#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace authformer {

struct ClassificationMetrics {
  double accuracy = 0;
  double macro_recall = 0;
  /// Unweighted mean of per-class F1.
  double macro_f1 = 0;
  std::size_t num_classes = 0;
  std::vector<std::size_t> confusion;  // row = true class, column = predicted
  std::vector<double> recall;
  std::vector<double> precision;
  std::vector<double> f1;
  std::vector<std::size_t> support;
  /// Classes with no true samples; their recall is reported as 0.
  std::vector<std::size_t> absent_classes;
};

ClassificationMetrics classification_metrics(std::span<const std::size_t> y_true, std::span<const std::size_t> y_pred,
                                             std::size_t num_classes);

struct EerResult {
  double eer = 0;
  double threshold = 0;
  double tar = 0;
  double frr = 0;
  double far = 0;
};

/// Fraction of genuine scores strictly below the threshold.
double false_reject_rate(std::span<const double> genuine, double threshold);
/// Fraction of impostor scores at or above the threshold.
double false_accept_rate(std::span<const double> impostor, double threshold);

/// Sweeps {0, 1} and every midpoint between consecutive distinct scores,
/// picks the lowest threshold minimizing |FAR - FRR| and reports
/// EER = (FAR + FRR) / 2 there. Scores must lie in [0, 1].
EerResult compute_eer(std::span<const double> genuine, std::span<const double> impostor);

struct MetricsReport {
  std::string combination;
  ClassificationMetrics classification;
  EerResult verification;
};

}  // namespace authformer
