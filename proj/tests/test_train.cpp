#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "authformer/error.hpp"
#include "authformer/harness.hpp"
#include "authformer/ops.hpp"
#include "authformer/train.hpp"
#include "test_util.hpp"

using namespace authformer;
using authformer::testing::values;

namespace {

Dataset small_dataset(std::size_t classes = 2, std::size_t per_class = 8, double noise = 0.2) {
  SynthConfig c;
  c.num_classes = classes;
  c.samples_per_class = per_class;
  c.noise_level = noise;
  c.image_size = 16;
  c.sequence_length = 64;
  return generate_synthetic(c);
}

TrainConfig quick_config(std::size_t epochs) {
  TrainConfig c;
  c.epochs = epochs;
  c.batch_size = 4;
  c.layers = 1;
  return c;
}

template <typename T>
std::vector<std::vector<T>> snapshot(const AuthFormer<T>& m) {
  std::vector<std::vector<T>> out;
  for (const auto& [name, t] : m.params().entries()) out.push_back(values(t));
  return out;
}

}  // namespace

TEST(Optimizer, ZeroLearningRateLeavesWeightsAlone) {
  const auto data = small_dataset();
  auto cfg = quick_config(2);
  cfg.optimizer.learning_rate = 0.0;
  AuthFormer<double> model(model_config_for(data, cfg), cfg.seed);
  const auto before = snapshot(model);
  const auto ids = data.ids(SplitSide::Train);
  train(model, data, ids, cfg);
  EXPECT_EQ(snapshot(model), before);
}

TEST(Optimizer, AdamFirstStepMovesEachWeightByLearningRate) {
  ParamStore<double> store;
  auto& w = store.add("w", Tensor<double>({3}, {1.0, -2.0, 0.5}));
  std::vector<double> grads{0.3, -4.0, 1e-3};
  {
    Tape<double> tape;
    TapeScope<double> scope(tape);
    tape.backward(sum(mul(w, Tensor<double>({3}, grads))));
  }
  Optimizer<double> opt(store, {OptimizerKind::Adam, 0.01});
  opt.step();
  // bias-corrected first step is lr * g / (|g| + eps)
  const std::vector<double> start{1.0, -2.0, 0.5};
  for (std::size_t i = 0; i < 3; ++i)
    EXPECT_NEAR(w.data()[i], start[i] - 0.01 * grads[i] / (std::abs(grads[i]) + 1e-8), 1e-12);
}

TEST(Optimizer, SgdMomentumAccumulates) {
  ParamStore<double> store;
  auto& w = store.add("w", Tensor<double>({1}, {0.0}));
  OptimizerConfig cfg;
  cfg.kind = OptimizerKind::Sgd;
  cfg.learning_rate = 0.1;
  cfg.momentum = 0.5;
  Optimizer<double> opt(store, cfg);
  for (int step = 0; step < 2; ++step) {
    store.zero_grad();
    Tape<double> tape;
    TapeScope<double> scope(tape);
    tape.backward(sum(w));  // gradient 1
    opt.step();
  }
  // velocities 1 then 1.5
  EXPECT_NEAR(w.data()[0], -0.1 - 0.15, 1e-15);
}

TEST(Training, LossDecreasesOnTinyProblem) {
  const auto data = small_dataset();
  auto cfg = quick_config(5);
  cfg.optimizer.learning_rate = 3e-3;
  std::vector<EpochLog> log;
  train_new_model<double>(data, cfg, &log);
  ASSERT_EQ(log.size(), 5u);
  for (std::size_t e = 1; e < log.size(); ++e)
    EXPECT_LT(log[e].mean_loss, log[e - 1].mean_loss) << "epoch " << log[e].epoch;
}

TEST(Training, SameSeedSameTrajectory) {
  const auto data = small_dataset();
  const auto cfg = quick_config(2);
  std::vector<EpochLog> la, lb;
  const auto a = train_new_model<double>(data, cfg, &la);
  const auto b = train_new_model<double>(data, cfg, &lb);
  for (std::size_t e = 0; e < la.size(); ++e) EXPECT_EQ(la[e].mean_loss, lb[e].mean_loss);
  EXPECT_EQ(snapshot(a), snapshot(b));
  auto other = cfg;
  other.seed = 7;
  EXPECT_NE(snapshot(train_new_model<double>(data, other)), snapshot(a));
}

TEST(Training, NonFiniteLossNamesEpochAndBatch) {
  auto data = small_dataset();
  auto& voice = data.values.at(Modality::Voice);
  std::fill(voice.begin(), voice.end(), std::numeric_limits<float>::quiet_NaN());
  try {
    train_new_model<float>(data, quick_config(1));
    FAIL() << "expected DivergenceError";
  } catch (const DivergenceError& e) {
    EXPECT_NE(std::string(e.what()).find("epoch 1, batch 1"), std::string::npos) << e.what();
  }
}

TEST(Training, Rejections) {
  const auto data = small_dataset();
  auto cfg = quick_config(1);
  cfg.batch_size = 0;
  EXPECT_THROW(train_new_model<float>(data, cfg), ValidationError);
  cfg = quick_config(1);
  AuthFormer<float> model(model_config_for(data, cfg), 1);
  cfg.modalities = {Modality::Palmprint};
  const auto ids = data.ids(SplitSide::Train);
  EXPECT_THROW(train(model, data, ids, cfg), ValidationError);
  EXPECT_THROW(train(model, data, std::span<const std::size_t>{}, quick_config(1)), ValidationError);
}

TEST(Evaluation, VerificationScoreCounts) {
  const auto data = small_dataset(3, 4);
  const auto cfg = quick_config(1);
  AuthFormer<double> model(model_config_for(data, cfg), 3);
  const auto ids = data.ids(SplitSide::Test);
  const auto s = verification_scores(model, data, ids, cfg.modalities);
  EXPECT_EQ(s.genuine.size(), ids.size());
  EXPECT_EQ(s.impostor.size(), ids.size() * 2);

  // a zeroed head predicts the uniform distribution
  for (const char* name : {"head.weight", "head.bias"}) {
    auto t = model.params().get(name);
    for (auto& v : t.mutable_data()) v = 0;
  }
  const auto u = verification_scores(model, data, ids, cfg.modalities);
  for (double g : u.genuine) EXPECT_NEAR(g, 1.0 / 3.0, 1e-12);
  const auto m = evaluate_classification(model, data, ids, cfg.modalities);
  EXPECT_EQ(m.num_classes, 3u);
  EXPECT_THROW(evaluate_classification(model, data, std::span<const std::size_t>{}, cfg.modalities), ValidationError);
}

TEST(Depth, ParameterCountIsAffineInLayers) {
  const auto data = small_dataset();
  std::vector<std::size_t> counts;
  for (std::size_t layers = 1; layers <= 4; ++layers) {
    auto cfg = quick_config(0);
    cfg.layers = layers;
    counts.push_back(AuthFormer<float>(model_config_for(data, cfg), 1).parameter_count());
  }
  const auto step = counts[1] - counts[0];
  EXPECT_GT(step, 0u);
  for (std::size_t i = 2; i < counts.size(); ++i) EXPECT_EQ(counts[i] - counts[i - 1], step);
}

TEST(Harness, DepthSweepRowsAndCsv) {
  const auto data = small_dataset();
  const std::vector<std::size_t> layers{1, 2};
  const auto rows = depth_sweep(data, layers, quick_config(1));
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].layers, 1u);
  EXPECT_GT(rows[1].parameter_count, rows[0].parameter_count);
  const auto csv = depth_csv(rows);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "layers,accuracy,seconds_per_epoch,parameter_count");
  EXPECT_THROW(depth_sweep(data, std::span<const std::size_t>{}, quick_config(1)), ValidationError);
}

TEST(Harness, CsvFormatting) {
  ClassificationMetrics m;
  m.accuracy = 0.75;
  m.macro_recall = 0.75;
  m.macro_f1 = 11.0 / 15.0;
  EXPECT_EQ(classification_csv("Face & Voice", m),
            "combination,accuracy,macro_recall,macro_f1\n\"Face & Voice\",0.7500,0.7500,0.7333\n");
  EerResult e{0.0, 0.5, 1.0, 0.0, 0.0};
  EXPECT_EQ(verification_csv("Face", e), "combination,tar,frr,far,eer,threshold\n\"Face\",1.0000,0.0000,0.0000,0.0000,0.5000\n");
}

TEST(Training, EverySingleModalityOnSmallGeometry) {
  const auto data = small_dataset();
  for (auto m : kAllModalities) {
    auto cfg = quick_config(1);
    cfg.modalities = {m};
    std::vector<EpochLog> log;
    EXPECT_NO_THROW(train_new_model<float>(data, cfg, &log)) << modality_name(m);
    EXPECT_EQ(log.size(), 1u);
  }
}
