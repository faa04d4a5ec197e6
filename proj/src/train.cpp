#include "authformer/train.hpp"

#include <chrono>
#include <cmath>
#include <string>

#include "authformer/error.hpp"
#include "authformer/ops.hpp"

namespace authformer {

void TrainConfig::validate() const {
  if (batch_size == 0) throw ValidationError("batch size must be positive");
  if (layers == 0) throw ValidationError("encoder layers must be positive");
  if (!(optimizer.learning_rate >= 0.0)) throw ValidationError("learning rate must be >= 0");
  if (!(optimizer.beta1 >= 0.0 && optimizer.beta1 < 1.0 && optimizer.beta2 >= 0.0 && optimizer.beta2 < 1.0)) {
    throw ValidationError("adam betas must lie in [0, 1)");
  }
  if (!(optimizer.eps > 0.0)) throw ValidationError("adam eps must be positive");
  plan_route(modalities);
}

template <typename T>
Optimizer<T>::Optimizer(ParamStore<T>& params, OptimizerConfig config) : params_(params), config_(config) {
  for (const auto& [name, t] : params_.entries()) {
    first_.emplace_back(t.numel(), 0.0);
    if (config_.kind == OptimizerKind::Adam) second_.emplace_back(t.numel(), 0.0);
  }
}

template <typename T>
void Optimizer<T>::step() {
  ++steps_;
  const double lr = config_.learning_rate;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(steps_));
  auto& entries = params_.entries();
  for (std::size_t p = 0; p < entries.size(); ++p) {
    auto& tensor = entries[p].second;
    if (!tensor.has_grad()) continue;
    const auto grad = tensor.grad();
    auto data = tensor.mutable_data();
    auto& m = first_[p];
    if (config_.kind == OptimizerKind::Adam) {
      auto& v = second_[p];
      for (std::size_t i = 0; i < data.size(); ++i) {
        const double g = static_cast<double>(grad[i]);
        m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g;
        v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g * g;
        const double step = lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + config_.eps);
        data[i] = static_cast<T>(static_cast<double>(data[i]) - step);
      }
    } else {
      for (std::size_t i = 0; i < data.size(); ++i) {
        m[i] = config_.momentum * m[i] + static_cast<double>(grad[i]);
        data[i] = static_cast<T>(static_cast<double>(data[i]) - lr * m[i]);
      }
    }
  }
}

ModelConfig model_config_for(const Dataset& data, const TrainConfig& config) {
  ModelConfig mc;
  mc.num_classes = data.manifest.num_classes;
  mc.layers = config.layers;
  mc.modalities = canonical(config.modalities);
  for (auto m : mc.modalities) data.descriptor(m);
  // Geometry comes from every modality on disk, so unused branches still agree.
  for (const auto& d : data.manifest.modalities) {
    const auto& shape = d.shape;
    if (is_image(d.tag)) {
      mc.image_height = shape.at(1);
      mc.image_width = shape.at(2);
      mc.image_channels = shape.at(3);
    } else {
      mc.sequence_length = shape.at(1);
    }
  }
  return mc;
}

template <typename T>
std::vector<EpochLog> train(AuthFormer<T>& model, const Dataset& data, std::span<const std::size_t> train_ids,
                            const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  if (train_ids.empty()) throw ValidationError("empty training split");
  const Combination modalities = canonical(config.modalities);
  for (auto m : modalities) {
    if (!contains(model.config().modalities, m)) {
      throw ValidationError("model is not configured for '" + std::string(modality_name(m)) + "'");
    }
  }
  Optimizer<T> optimizer(model.params(), config.optimizer);
  Rng rng(config.seed ^ 0x5DEECE66Dull);
  std::vector<std::size_t> order(train_ids.begin(), train_ids.end());
  std::vector<EpochLog> log;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    rng.shuffle(std::span<std::size_t>(order));
    double total = 0.0;
    std::size_t batches = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      model.params().zero_grad();
      Tape<T> tape;
      TapeScope<T> scope(tape);
      std::vector<Tensor<T>> rows;
      std::vector<std::size_t> labels;
      for (std::size_t i = begin; i < end; ++i) {
        const auto logits = model.forward(data.sample<T>(order[i], modalities));
        rows.push_back(reshape(logits, {1, logits.numel()}));
        labels.push_back(data.label(order[i]));
      }
      const auto loss = cross_entropy_loss(concat(rows, 0), std::span<const std::size_t>(labels));
      const double value = static_cast<double>(loss.item());
      if (!std::isfinite(value)) {
        throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                              std::to_string(batches + 1));
      }
      tape.backward(loss);
      optimizer.step();
      total += value;
      ++batches;
    }
    model.params().zero_grad();
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
    log.push_back({epoch, total / static_cast<double>(batches), elapsed.count()});
    if (on_epoch) on_epoch(log.back());
  }
  return log;
}

template <typename T>
AuthFormer<T> train_new_model(const Dataset& data, const TrainConfig& config, std::vector<EpochLog>* log,
                              const EpochCallback& on_epoch) {
  config.validate();
  AuthFormer<T> model(model_config_for(data, config), config.seed);
  const auto ids = data.ids(SplitSide::Train);
  auto epochs = train(model, data, ids, config, on_epoch);
  if (log) *log = std::move(epochs);
  return model;
}

template <typename T>
std::vector<std::size_t> predict_labels(const AuthFormer<T>& model, const Dataset& data,
                                        std::span<const std::size_t> ids, const Combination& modalities) {
  std::vector<std::size_t> out;
  out.reserve(ids.size());
  for (auto id : ids) out.push_back(model.predict(model.embed(data.sample<T>(id, modalities))).label);
  return out;
}

template <typename T>
ClassificationMetrics evaluate_classification(const AuthFormer<T>& model, const Dataset& data,
                                              std::span<const std::size_t> ids, const Combination& modalities) {
  if (ids.empty()) throw ValidationError("empty evaluation split");
  std::vector<std::size_t> truth;
  for (auto id : ids) truth.push_back(data.label(id));
  const auto predicted = predict_labels(model, data, ids, modalities);
  return classification_metrics(truth, predicted, model.config().num_classes);
}

template <typename T>
VerificationScores verification_scores(const AuthFormer<T>& model, const Dataset& data,
                                       std::span<const std::size_t> ids, const Combination& modalities) {
  VerificationScores scores;
  for (auto id : ids) {
    const auto p = model.predict(model.embed(data.sample<T>(id, modalities)));
    const std::size_t truth = data.label(id);
    for (std::size_t c = 0; c < p.probabilities.size(); ++c) {
      (c == truth ? scores.genuine : scores.impostor).push_back(p.probabilities[c]);
    }
  }
  return scores;
}

#define AUTHFORMER_INSTANTIATE_TRAIN(T)                                                                         \
  template class Optimizer<T>;                                                                                  \
  template std::vector<EpochLog> train(AuthFormer<T>&, const Dataset&, std::span<const std::size_t>,            \
                                       const TrainConfig&, const EpochCallback&);                               \
  template AuthFormer<T> train_new_model(const Dataset&, const TrainConfig&, std::vector<EpochLog>*,            \
                                         const EpochCallback&);                                                 \
  template std::vector<std::size_t> predict_labels(const AuthFormer<T>&, const Dataset&,                        \
                                                   std::span<const std::size_t>, const Combination&);           \
  template ClassificationMetrics evaluate_classification(const AuthFormer<T>&, const Dataset&,                  \
                                                         std::span<const std::size_t>, const Combination&);     \
  template VerificationScores verification_scores(const AuthFormer<T>&, const Dataset&,                         \
                                                  std::span<const std::size_t>, const Combination&);

AUTHFORMER_INSTANTIATE_TRAIN(float)
AUTHFORMER_INSTANTIATE_TRAIN(double)

#undef AUTHFORMER_INSTANTIATE_TRAIN

}  // namespace authformer
