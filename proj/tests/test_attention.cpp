#include <gtest/gtest.h>

#include <cmath>

#include "authformer/attention.hpp"
#include "authformer/error.hpp"
#include "authformer/ops.hpp"
#include "test_util.hpp"

using namespace authformer;
using authformer::testing::max_abs_diff;
using authformer::testing::random_tensor;
using authformer::testing::values;

namespace {

using Td = Tensor<double>;
constexpr std::size_t kD = 8;
constexpr std::size_t kHeads = 2;
constexpr double kEps = 1e-5;

MhaParams<double> random_mha(Rng& rng) {
  return {random_tensor({kD, kD}, rng, 0.4), random_tensor({kD, kD}, rng, 0.4), random_tensor({kD, kD}, rng, 0.4),
          random_tensor({kD, kD}, rng, 0.4), kHeads};
}

LayerNormParams<double> unit_ln() { return {Td::full({kD}, 1.0), Td::zeros({kD})}; }

MlpParams<double> random_mlp(Rng& rng) {
  return {random_tensor({kD, 2 * kD}, rng, 0.3), random_tensor({2 * kD}, rng, 0.1),
          random_tensor({2 * kD, kD}, rng, 0.3), random_tensor({kD}, rng, 0.1)};
}

GrnParams<double> random_grn(Rng& rng) {
  GrnParams<double> p;
  p.w1 = random_tensor({kD, kD}, rng, 0.4);
  p.b1 = random_tensor({kD}, rng, 0.1);
  p.w2 = random_tensor({kD, kD}, rng, 0.4);
  p.w3 = random_tensor({kD, kD}, rng, 0.4);
  p.b2 = random_tensor({kD}, rng, 0.1);
  p.w4 = random_tensor({kD, kD}, rng, 0.4);
  p.b4 = random_tensor({kD}, rng, 0.1);
  p.w5 = random_tensor({kD, kD}, rng, 0.4);
  p.b5 = random_tensor({kD}, rng, 0.1);
  p.ln = unit_ln();
  return p;
}

Td identity(std::size_t n) {
  auto t = Td::zeros({n, n});
  for (std::size_t i = 0; i < n; ++i) t.mutable_data()[i * n + i] = 1.0;
  return t;
}

double get(const Td& t, std::size_t r, std::size_t c) { return t.data()[r * t.dim(1) + c]; }

// Per-head attention with explicit loops.
std::vector<double> naive_attention(const Td& qs, const Td& ks, const Td& vs, const MhaParams<double>& p) {
  const auto q = matmul(qs, p.wq), k = matmul(ks, p.wk), v = matmul(vs, p.wv);
  const std::size_t nq = qs.dim(0), nk = ks.dim(0), dh = kD / p.heads;
  std::vector<double> concat(nq * kD, 0.0);
  for (std::size_t h = 0; h < p.heads; ++h)
    for (std::size_t i = 0; i < nq; ++i) {
      std::vector<double> s(nk);
      double mx = -1e300;
      for (std::size_t j = 0; j < nk; ++j) {
        double dot = 0;
        for (std::size_t c = 0; c < dh; ++c) dot += get(q, i, h * dh + c) * get(k, j, h * dh + c);
        s[j] = dot / std::sqrt(static_cast<double>(dh));
        mx = std::max(mx, s[j]);
      }
      double z = 0;
      for (auto& x : s) z += (x = std::exp(x - mx));
      for (std::size_t c = 0; c < dh; ++c) {
        double acc = 0;
        for (std::size_t j = 0; j < nk; ++j) acc += s[j] / z * get(v, j, h * dh + c);
        concat[i * kD + h * dh + c] = acc;
      }
    }
  return values(matmul(Td({nq, kD}, concat), p.wo));
}

}  // namespace

TEST(CrossMsa, MatchesNaiveLoop) {
  Rng rng(1);
  for (int trial = 0; trial < 10; ++trial) {
    const auto q = random_tensor({4, kD}, rng), k = random_tensor({6, kD}, rng), v = random_tensor({6, kD}, rng);
    const auto p = random_mha(rng);
    const auto got = cross_msa(q, k, v, p);
    const auto want = naive_attention(q, k, v, p);
    for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(got.data()[i], want[i], 1e-12);
  }
}

TEST(CrossMsa, WeightsAreRowStochastic) {
  Rng rng(2);
  const auto q = random_tensor({5, kD}, rng, 3.0), k = random_tensor({7, kD}, rng, 3.0);
  std::vector<Td> weights;
  cross_msa(q, k, k, random_mha(rng), &weights);
  ASSERT_EQ(weights.size(), kHeads);
  for (const auto& w : weights) {
    ASSERT_EQ(w.shape(), (Shape{5, 7}));
    for (std::size_t i = 0; i < 5; ++i) {
      double row = 0;
      for (std::size_t j = 0; j < 7; ++j) row += get(w, i, j);
      EXPECT_NEAR(row, 1.0, 1e-12);
    }
  }
}

TEST(CrossMsa, SingleKeyBroadcastsProjectedValue) {
  Rng rng(3);
  const auto q = random_tensor({4, kD}, rng), kv = random_tensor({1, kD}, rng);
  const auto p = random_mha(rng);
  const auto out = cross_msa(q, kv, kv, p);
  const auto expected = matmul(matmul(kv, p.wv), p.wo);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t c = 0; c < kD; ++c) EXPECT_NEAR(get(out, i, c), expected.data()[c], 1e-12);
}

TEST(CrossMsa, RejectsBadShapes) {
  Rng rng(4);
  const auto p = random_mha(rng);
  EXPECT_THROW(cross_msa(Td::zeros({4, kD}), Td::zeros({3, kD}), Td::zeros({2, kD}), p), ValidationError);
  auto odd = p;
  odd.heads = 3;
  EXPECT_THROW(cross_msa(Td::zeros({4, kD}), Td::zeros({4, kD}), Td::zeros({4, kD}), odd), ValidationError);
}

TEST(Encoder, ZeroOutputProjectionsArePassThrough) {
  Rng rng(5);
  const auto x = random_tensor({4, kD}, rng);
  std::vector<EncoderLayerParams<double>> layers(2);
  for (auto& l : layers) {
    l = {unit_ln(), random_mha(rng), unit_ln(), random_mlp(rng)};
    l.attn.wo = Td::zeros({kD, kD});
    l.mlp.w2 = Td::zeros({2 * kD, kD});
    l.mlp.b2 = Td::zeros({kD});
  }
  const auto y = self_attention_encoder<double>(x, layers, kEps);
  EXPECT_EQ(values(y), values(x));
}

TEST(Encoder, SingleTokenAttentionIsValuePath) {
  Rng rng(6);
  const auto x = random_tensor({1, kD}, rng);
  EncoderLayerParams<double> layer{unit_ln(), random_mha(rng), unit_ln(), random_mlp(rng)};
  layer.mlp.w2 = Td::zeros({2 * kD, kD});
  layer.mlp.b2 = Td::zeros({kD});
  const std::vector<EncoderLayerParams<double>> layers{layer};
  const auto y = self_attention_encoder<double>(x, layers, kEps);
  const auto h = apply_layer_norm(x, layer.ln1, kEps);
  const auto want = add(x, matmul(matmul(h, layer.attn.wv), layer.attn.wo));
  EXPECT_LE(max_abs_diff(y, want), 1e-12);
}

TEST(Fusion, ZeroInitStagesPassFaceThrough) {
  Rng rng(7);
  const auto face = random_tensor({4, kD}, rng), finger = random_tensor({4, kD}, rng);
  CrossStageParams<double> p{random_mha(rng), unit_ln(), random_mlp(rng)};
  p.attn.wo = Td::zeros({kD, kD});
  p.mlp.w2 = Td::zeros({2 * kD, kD});
  p.mlp.b2 = Td::zeros({kD});
  const auto s1 = fuse_images_stage1(face, finger, p, kEps);
  EXPECT_EQ(values(s1), values(face));
  const auto s2 = fuse_images_stage2(face, s1, finger, p, kEps);
  EXPECT_EQ(values(s2), values(face));
}

TEST(Fusion, ShapesAndOrderSensitivity) {
  Rng rng(8);
  const auto a = random_tensor({4, kD}, rng), b = random_tensor({4, kD}, rng);
  const CrossStageParams<double> p{random_mha(rng), unit_ln(), random_mlp(rng)};
  const auto ab = fuse_images_stage1(a, b, p, kEps);
  const auto ba = fuse_images_stage1(b, a, p, kEps);
  EXPECT_EQ(ab.shape(), (Shape{4, kD}));
  EXPECT_GT(max_abs_diff(ab, ba), 1e-3);
  const CrossStageParams<double> p2{random_mha(rng), unit_ln(), random_mlp(rng)};
  EXPECT_EQ(fuse_images_stage2(a, ab, b, p2, kEps).shape(), (Shape{4, kD}));
  EXPECT_THROW(fuse_images_stage1(a, Td::zeros({3, kD}), p, kEps), ValidationError);
}

TEST(Glu, HalfGateAndClosedValuePath) {
  Rng rng(9);
  const auto n = random_tensor({4, kD}, rng);
  auto p = random_grn(rng);
  p.w4 = Td::zeros({kD, kD});
  p.b4 = Td::zeros({kD});
  p.w5 = identity(kD);
  p.b5 = Td::zeros({kD});
  const auto half = glu(n, p);
  for (std::size_t i = 0; i < n.numel(); ++i) EXPECT_NEAR(half.data()[i], 0.5 * n.data()[i], 1e-15);

  auto closed = random_grn(rng);
  closed.w5 = Td::zeros({kD, kD});
  closed.b5 = Td::zeros({kD});
  const auto shut = glu(n, closed);
  for (double v : shut.data()) EXPECT_EQ(v, 0.0);

  auto saturated = random_grn(rng);
  saturated.w4 = Td::zeros({kD, kD});
  saturated.b4 = Td::full({kD}, -50.0);
  const auto sat = glu(n, saturated);
  for (double v : sat.data()) EXPECT_NEAR(v, 0.0, 1e-6);
}

TEST(Grn, ClosedGateIsLayerNormOfFusion) {
  Rng rng(10);
  const auto b = random_tensor({4, kD}, rng);
  auto p = random_grn(rng);
  p.w5 = Td::zeros({kD, kD});
  p.b5 = Td::zeros({kD});
  const auto want = apply_layer_norm(b, p.ln, kEps);
  for (int trial = 0; trial < 5; ++trial) {
    const auto s = random_tensor({4, kD}, rng, 10.0);
    const auto got = grn_fuse(b, s, p, kEps);
    EXPECT_EQ(values(got), values(want));
  }
}

TEST(Grn, OpenGateDependsOnVoice) {
  Rng rng(11);
  const auto b = random_tensor({4, kD}, rng);
  const auto p = random_grn(rng);
  const auto a = grn_fuse(b, random_tensor({4, kD}, rng), p, kEps);
  const auto c = grn_fuse(b, random_tensor({4, kD}, rng), p, kEps);
  EXPECT_EQ(a.shape(), (Shape{4, kD}));
  EXPECT_GT(max_abs_diff(a, c), 1e-6);
  EXPECT_THROW(grn_fuse(b, Td::zeros({4, kD - 1}), p, kEps), ValidationError);
}
