#include <gtest/gtest.h>

#include <set>

#include "authformer/error.hpp"
#include "authformer/model.hpp"
#include "authformer/ops.hpp"
#include "test_util.hpp"

using namespace authformer;
using authformer::testing::max_abs_diff;
using authformer::testing::random_tensor;
using authformer::testing::values;

namespace {

using Td = Tensor<double>;

ModelConfig all_modalities_config() {
  auto c = ModelConfig::tiny();
  c.modalities = {Modality::Face, Modality::Fingerprint, Modality::Palmprint, Modality::Voice};
  return c;
}

RawSample<double> random_sample(const ModelConfig& c, const Combination& combo, Rng& rng) {
  RawSample<double> s;
  for (auto m : combo) {
    if (is_image(m)) {
      auto px = random_tensor({c.image_height, c.image_width, c.image_channels}, rng);
      s.images.push_back({m, px});
    } else {
      s.sequence = SequenceSample<double>{random_tensor({c.sequence_length}, rng)};
    }
  }
  return s;
}

std::string route_error(const Combination& combo) {
  try {
    plan_route(combo);
  } catch (const ValidationError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(PlanRoute, RouteKinds) {
  EXPECT_EQ(plan_route({Modality::Face}), RoutePlan::SingleImage);
  EXPECT_EQ(plan_route({Modality::Voice}), RoutePlan::SingleSequence);
  EXPECT_EQ(plan_route({Modality::Fingerprint, Modality::Face, Modality::Voice}), RoutePlan::ImagePairPlusSequence);
  EXPECT_EQ(plan_route({Modality::Palmprint, Modality::Face}), RoutePlan::ImagePair);
  EXPECT_EQ(plan_route({Modality::Voice, Modality::Palmprint}), RoutePlan::ImagePlusSequence);
}

TEST(PlanRoute, Rejections) {
  EXPECT_NE(route_error({}).find("no modality provided"), std::string::npos);
  EXPECT_NE(route_error({Modality::Face, Modality::Fingerprint, Modality::Palmprint}).find("at most two image modalities"),
            std::string::npos);
  EXPECT_FALSE(route_error({Modality::Face, Modality::Face}).empty());
  EXPECT_FALSE(route_error({Modality::Voice, Modality::Voice}).empty());
}

TEST(PlanRoute, ThirteenRowsCoverEveryValidSubset) {
  const auto& rows = ablation_combinations();
  ASSERT_EQ(rows.size(), 13u);
  std::map<RoutePlan, int> per_route;
  std::set<Combination> seen;
  for (const auto& r : rows) {
    ++per_route[plan_route(r.modalities)];
    EXPECT_TRUE(seen.insert(canonical(r.modalities)).second) << r.label;
  }
  EXPECT_EQ(per_route[RoutePlan::SingleImage], 3);
  EXPECT_EQ(per_route[RoutePlan::SingleSequence], 1);
  EXPECT_EQ(per_route[RoutePlan::ImagePair], 3);
  EXPECT_EQ(per_route[RoutePlan::ImagePlusSequence], 3);
  EXPECT_EQ(per_route[RoutePlan::ImagePairPlusSequence], 3);
  // every non-empty subset of the four modalities is either a row or invalid
  int valid = 0;
  for (int mask = 1; mask < 16; ++mask) {
    Combination c;
    for (int b = 0; b < 4; ++b)
      if (mask & (1 << b)) c.push_back(kAllModalities[b]);
    if (route_error(c).empty()) {
      ++valid;
      EXPECT_TRUE(seen.count(canonical(c))) << combination_label(c);
    }
  }
  EXPECT_EQ(valid, 13);
  EXPECT_EQ(rows.front().label, "Palmprint & Finger & Voice");
  EXPECT_EQ(rows[2].label, "Finger & Face & Voice");
  EXPECT_EQ(rows.back().label, "Voice");
}

TEST(Combination, ParsingAndCanonicalOrder) {
  const auto c = parse_combination("voice,finger,Face");
  EXPECT_EQ(canonical(c), (Combination{Modality::Face, Modality::Fingerprint, Modality::Voice}));
  EXPECT_EQ(parse_combination("palm"), Combination{Modality::Palmprint});
  EXPECT_THROW(parse_combination("face,iris"), ValidationError);
  EXPECT_THROW(parse_combination("face,face"), ValidationError);
}

TEST(Bundle, FromEntriesSlots) {
  using TT = TaggedTokens<double>;
  EXPECT_THROW(ModalityBundle<double>::from_entries({}), ValidationError);
  EXPECT_THROW(ModalityBundle<double>::from_entries({TT{Modality::Face, Td::zeros({1, 1})},
                                                     TT{Modality::Fingerprint, Td::zeros({1, 1})},
                                                     TT{Modality::Palmprint, Td::zeros({1, 1})}}),
               ValidationError);
  const auto b = ModalityBundle<double>::from_entries(
      {TT{Modality::Voice, Td::zeros({1, 1})}, TT{Modality::Palmprint, Td::zeros({1, 1})}});
  EXPECT_TRUE(b.sequence.has_value());
  EXPECT_EQ(canonical(b.modalities()), (Combination{Modality::Palmprint, Modality::Voice}));
}

TEST(Model, EveryRowProducesClassLogits) {
  const auto c = all_modalities_config();
  AuthFormer<double> model(c, 5);
  Rng rng(1);
  for (const auto& row : ablation_combinations()) {
    const auto logits = model.forward(random_sample(c, row.modalities, rng));
    ASSERT_EQ(logits.shape(), (Shape{c.num_classes})) << row.label;
    for (double v : logits.data()) EXPECT_TRUE(std::isfinite(v)) << row.label;
  }
}

TEST(Model, ImageOrderIsCanonicalized) {
  const auto c = all_modalities_config();
  AuthFormer<double> model(c, 6);
  Rng rng(2);
  auto s = random_sample(c, {Modality::Face, Modality::Palmprint, Modality::Voice}, rng);
  const auto a = model.forward(s);
  std::swap(s.images[0], s.images[1]);
  const auto b = model.forward(s);
  EXPECT_LE(max_abs_diff(a, b), 1e-12);
}

TEST(Model, ClosedGateEqualsImagePairRoute) {
  auto c = ModelConfig::tiny();
  AuthFormer<double> model(c, 7);
  for (const char* name : {"grn.w5", "grn.b5"}) {
    auto t = model.params().get(name);
    for (auto& v : t.mutable_data()) v = 0;
  }
  Rng rng(3);
  const auto tri = random_sample(c, {Modality::Face, Modality::Fingerprint, Modality::Voice}, rng);
  RawSample<double> pair{tri.images, std::nullopt};
  EXPECT_LE(max_abs_diff(model.forward(tri), model.forward(pair)), 1e-12);
}

TEST(Model, RejectsUnconfiguredModalityAndBadShapes) {
  const auto c = ModelConfig::tiny();
  AuthFormer<double> model(c, 8);
  Rng rng(4);
  EXPECT_THROW(model.forward(random_sample(c, {Modality::Palmprint}, rng)), ValidationError);
  RawSample<double> bad;
  bad.images.push_back({Modality::Face, Td::zeros({4, 4, 1})});
  EXPECT_THROW(model.forward(bad), ValidationError);
  auto odd = ModelConfig::tiny();
  odd.heads = 3;
  EXPECT_THROW(AuthFormer<double>(odd, 1), ValidationError);
}

TEST(Model, SameSeedSameWeights) {
  const auto c = ModelConfig::tiny();
  AuthFormer<double> a(c, 9), b(c, 9), d(c, 10);
  ASSERT_EQ(a.params().size(), b.params().size());
  bool any_diff = false;
  for (std::size_t i = 0; i < a.params().size(); ++i) {
    EXPECT_EQ(values(a.params().entries()[i].second), values(b.params().entries()[i].second));
    any_diff |= values(a.params().entries()[i].second) != values(d.params().entries()[i].second);
  }
  EXPECT_TRUE(any_diff);
}

TEST(Predict, ArgmaxAndTies) {
  const auto p = predict_from_logits(Td({3}, {3, 1, 1}));
  EXPECT_EQ(p.label, 0u);
  double total = 0;
  for (double v : p.probabilities) total += v;
  EXPECT_NEAR(total, 1.0, 1e-12);
  EXPECT_EQ(predict_from_logits(Td({2}, {2, 2})).label, 0u);
  Rng rng(5);
  for (int t = 0; t < 20; ++t) {
    const auto x = random_tensor({6}, rng, 3.0);
    EXPECT_EQ(predict_from_logits(x).label, predict_from_logits(add(x, Td::scalar(rng.uniform(-50, 50)))).label);
  }
}
