#pragma once

// Multi-run experiments: the combination ablation and the encoder depth sweep,
// plus their CSV renderings.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "authformer/data_io.hpp"
#include "authformer/metrics.hpp"
#include "authformer/train.hpp"

namespace authformer {

struct AblationRow {
  std::string combination;
  double accuracy = 0;
  double macro_f1 = 0;
  double macro_recall = 0;
};

/// Trains and tests one model per ablation combination with identical
/// hyperparameters and seed; rows come back in table order. `jobs` > 1 trains
/// that many models concurrently.
std::vector<AblationRow> ablation_run(const Dataset& data, const TrainConfig& config, std::size_t jobs = 1);

struct DepthRow {
  std::size_t layers = 0;
  double accuracy = 0;
  double seconds_per_epoch = 0;
  std::size_t parameter_count = 0;
};

/// One training run per encoder depth, always serial so timings stay clean.
std::vector<DepthRow> depth_sweep(const Dataset& data, std::span<const std::size_t> layer_counts,
                                  const TrainConfig& config);

std::string ablation_csv(const std::vector<AblationRow>& rows);
std::string depth_csv(const std::vector<DepthRow>& rows);
std::string classification_csv(const std::string& combination, const ClassificationMetrics& metrics);
std::string verification_csv(const std::string& combination, const EerResult& result);

/// Fixed-width tables for terminal output.
std::string ablation_table(const std::vector<AblationRow>& rows);
std::string depth_table(const std::vector<DepthRow>& rows);

}  // namespace authformer
