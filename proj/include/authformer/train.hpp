#pragma once

// Training loop, optimizers and model-level evaluation.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "authformer/data_io.hpp"
#include "authformer/metrics.hpp"
#include "authformer/model.hpp"

namespace authformer {

enum class OptimizerKind { Adam, Sgd };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Adam;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double momentum = 0.9;  // sgd only
};

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 16;
  OptimizerConfig optimizer;
  std::uint64_t seed = 42;
  std::size_t layers = 2;
  Combination modalities = {Modality::Face, Modality::Fingerprint, Modality::Voice};

  void validate() const;
};

struct EpochLog {
  std::size_t epoch = 0;
  double mean_loss = 0;
  double seconds = 0;
};

/// Adam or SGD-with-momentum over every tensor in a ParamStore.
template <typename T>
class Optimizer {
 public:
  Optimizer(ParamStore<T>& params, OptimizerConfig config);
  /// Applies one update from the accumulated gradients; tensors without a
  /// gradient are left alone.
  void step();

 private:
  ParamStore<T>& params_;
  OptimizerConfig config_;
  std::vector<std::vector<double>> first_;
  std::vector<std::vector<double>> second_;
  std::size_t steps_ = 0;
};

/// Called after every epoch; useful for progress output.
using EpochCallback = std::function<void(const EpochLog&)>;

/// Minimizes mean cross-entropy over `train_ids`, shuffling with the config
/// seed each epoch. Throws DivergenceError on a non-finite batch loss.
template <typename T>
std::vector<EpochLog> train(AuthFormer<T>& model, const Dataset& data, std::span<const std::size_t> train_ids,
                            const TrainConfig& config, const EpochCallback& on_epoch = {});

/// Model geometry for a dataset and a training configuration.
ModelConfig model_config_for(const Dataset& data, const TrainConfig& config);

/// Builds a model seeded from config.seed and trains it on the dataset's
/// train split.
template <typename T>
AuthFormer<T> train_new_model(const Dataset& data, const TrainConfig& config, std::vector<EpochLog>* log = nullptr,
                              const EpochCallback& on_epoch = {});

template <typename T>
std::vector<std::size_t> predict_labels(const AuthFormer<T>& model, const Dataset& data,
                                        std::span<const std::size_t> ids, const Combination& modalities);

template <typename T>
ClassificationMetrics evaluate_classification(const AuthFormer<T>& model, const Dataset& data,
                                              std::span<const std::size_t> ids, const Combination& modalities);

struct VerificationScores {
  std::vector<double> genuine;
  std::vector<double> impostor;
};

/// For each sample, the softmax probability of the true class (genuine) and
/// of every other class (impostor).
template <typename T>
VerificationScores verification_scores(const AuthFormer<T>& model, const Dataset& data,
                                       std::span<const std::size_t> ids, const Combination& modalities);

}  // namespace authformer
