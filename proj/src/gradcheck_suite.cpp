#include "authformer/gradcheck_suite.hpp"

#include <chrono>
#include <cmath>
#include <utility>

#include "authformer/attention.hpp"
#include "authformer/embedding.hpp"
#include "authformer/gradcheck.hpp"
#include "authformer/model.hpp"
#include "authformer/ops.hpp"
#include "authformer/rng.hpp"

namespace authformer {
namespace {

using T = double;
using Fn = std::function<Tensor<T>()>;

Tensor<T> randn(Shape shape, Rng& rng, double stddev = 1.0) {
  std::vector<T> v(shape_numel(shape));
  for (auto& x : v) x = stddev * rng.normal();
  return Tensor<T>(std::move(shape), std::move(v));
}

Tensor<T> rand_uniform(Shape shape, Rng& rng, double lo, double hi) {
  std::vector<T> v(shape_numel(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor<T>(std::move(shape), std::move(v));
}

// Contracts an arbitrary output against fixed random weights so every output
// coordinate contributes to the checked gradient.
Tensor<T> project(const Tensor<T>& out, const Tensor<T>& weights) { return sum(mul(out, weights)); }

double check(const std::function<Tensor<T>()>& body, std::vector<Tensor<T>> wrt, Rng& rng) {
  Shape out_shape;
  {
    const auto probe = body();
    out_shape = probe.shape();
  }
  const auto r = randn(out_shape, rng);
  return finite_diff_check<T>(Fn([&] { return project(body(), r); }), std::move(wrt));
}

MhaParams<T> rand_mha(std::size_t d, std::size_t heads, Rng& rng) {
  const double s = 1.0 / std::sqrt(static_cast<double>(d));
  return {randn({d, d}, rng, s), randn({d, d}, rng, s), randn({d, d}, rng, s), randn({d, d}, rng, s), heads};
}

LayerNormParams<T> rand_ln(std::size_t d, Rng& rng) {
  return {rand_uniform({d}, rng, 0.5, 1.5), randn({d}, rng, 0.1)};
}

MlpParams<T> rand_mlp(std::size_t d, std::size_t r, Rng& rng) {
  const double s = 1.0 / std::sqrt(static_cast<double>(d));
  return {randn({d, r * d}, rng, s), randn({r * d}, rng, 0.1), randn({r * d, d}, rng, s), randn({d}, rng, 0.1)};
}

CrossStageParams<T> rand_stage(std::size_t d, std::size_t heads, Rng& rng) {
  return {rand_mha(d, heads, rng), rand_ln(d, rng), rand_mlp(d, 2, rng)};
}

GrnParams<T> rand_grn(std::size_t d, Rng& rng) {
  const double s = 1.0 / std::sqrt(static_cast<double>(d));
  GrnParams<T> p;
  p.w1 = randn({d, d}, rng, s);
  p.b1 = randn({d}, rng, 0.1);
  p.w2 = randn({d, d}, rng, s);
  p.w3 = randn({d, d}, rng, s);
  p.b2 = randn({d}, rng, 0.1);
  p.w4 = randn({d, d}, rng, s);
  p.b4 = randn({d}, rng, 0.1);
  p.w5 = randn({d, d}, rng, s);
  p.b5 = randn({d}, rng, 0.1);
  p.ln = rand_ln(d, rng);
  return p;
}

std::vector<Tensor<T>> mha_tensors(const MhaParams<T>& p) { return {p.wq, p.wk, p.wv, p.wo}; }

std::vector<Tensor<T>> stage_tensors(const CrossStageParams<T>& p) {
  return {p.attn.wq, p.attn.wk, p.attn.wv, p.attn.wo, p.ln.gamma, p.ln.beta,
          p.mlp.w1,  p.mlp.b1,  p.mlp.w2,  p.mlp.b2};
}

constexpr std::size_t kN = 4;
constexpr std::size_t kD = 8;
constexpr std::size_t kHeads = 2;
constexpr double kEps = 1e-5;

using Target = std::pair<const char*, std::function<double(Rng&)>>;

std::vector<Target> all_targets() {
  std::vector<Target> t;
  t.emplace_back("matmul", [](Rng& rng) {
    auto a = randn({2, 3, 4}, rng), b = randn({4, 5}, rng);
    return check([=] { return matmul(a, b); }, {a, b}, rng);
  });
  t.emplace_back("matmul_batched", [](Rng& rng) {
    auto a = randn({2, 3, 4}, rng), b = randn({2, 4, 3}, rng);
    return check([=] { return matmul(a, b); }, {a, b}, rng);
  });
  t.emplace_back("transpose", [](Rng& rng) {
    auto a = randn({2, 3, 4}, rng);
    return check([=] { return transpose(a); }, {a}, rng);
  });
  t.emplace_back("affine", [](Rng& rng) {
    auto x = randn({3, 4}, rng), w = randn({4, 5}, rng), b = randn({5}, rng);
    return check([=] { return affine(x, w, b); }, {x, w, b}, rng);
  });
  t.emplace_back("add_broadcast", [](Rng& rng) {
    auto a = randn({3, 4}, rng), b = randn({4}, rng);
    return check([=] { return add(a, b); }, {a, b}, rng);
  });
  t.emplace_back("sub", [](Rng& rng) {
    auto a = randn({3, 4}, rng), b = randn({3, 4}, rng);
    return check([=] { return sub(a, b); }, {a, b}, rng);
  });
  t.emplace_back("mul_broadcast", [](Rng& rng) {
    auto a = randn({2, 3, 4}, rng), b = randn({3, 4}, rng);
    return check([=] { return mul(a, b); }, {a, b}, rng);
  });
  t.emplace_back("scale", [](Rng& rng) {
    auto a = randn({5}, rng);
    return check([=] { return scale(a, 0.37); }, {a}, rng);
  });
  t.emplace_back("sigmoid", [](Rng& rng) {
    auto a = randn({6}, rng, 3.0);
    return check([=] { return sigmoid(a); }, {a}, rng);
  });
  t.emplace_back("relu", [](Rng& rng) {
    // keep inputs away from the kink
    auto a = randn({8}, rng);
    for (auto& v : a.mutable_data()) v += v >= 0 ? 0.1 : -0.1;
    return check([=] { return relu(a); }, {a}, rng);
  });
  t.emplace_back("gelu", [](Rng& rng) {
    auto a = randn({8}, rng, 2.0);
    return check([=] { return gelu(a); }, {a}, rng);
  });
  t.emplace_back("softmax", [](Rng& rng) {
    auto a = randn({3, 5}, rng, 2.0);
    return check([=] { return softmax(a, 1); }, {a}, rng) + check([=] { return softmax(a, 0); }, {a}, rng);
  });
  t.emplace_back("layer_norm", [](Rng& rng) {
    auto x = randn({3, 6}, rng), g = rand_uniform({6}, rng, 0.5, 1.5), b = randn({6}, rng);
    return check([=] { return layer_norm(x, g, b, 1e-5); }, {x, g, b}, rng);
  });
  t.emplace_back("conv1d_causal", [](Rng& rng) {
    auto x = randn({7, 3}, rng), w = randn({3, 3, 4}, rng, 0.5), b = randn({4}, rng);
    return check([=] { return conv1d_causal(x, w, b, 2); }, {x, w, b}, rng);
  });
  t.emplace_back("reshape", [](Rng& rng) {
    auto a = randn({2, 6}, rng);
    return check([=] { return reshape(a, {3, 4}); }, {a}, rng);
  });
  t.emplace_back("slice", [](Rng& rng) {
    auto a = randn({3, 6}, rng);
    return check([=] { return slice(a, 1, 2, 3); }, {a}, rng);
  });
  t.emplace_back("concat", [](Rng& rng) {
    auto a = randn({2, 3}, rng), b = randn({2, 2}, rng);
    return check([=] { return concat(std::vector<Tensor<T>>{a, b}, 1); }, {a, b}, rng);
  });
  t.emplace_back("mean_pool", [](Rng& rng) {
    auto a = randn({4, 3}, rng);
    return check([=] { return mean_pool(a, 0); }, {a}, rng);
  });
  t.emplace_back("sum", [](Rng& rng) {
    auto a = randn({2, 3}, rng);
    return finite_diff_check<T>(Fn([=] { return sum(a); }), {a});
  });
  t.emplace_back("cross_entropy", [](Rng& rng) {
    auto logits = randn({4, 3}, rng, 2.0);
    std::vector<std::size_t> labels{0, 2, 1, 2};
    return finite_diff_check<T>(Fn([=] { return cross_entropy_loss(logits, std::span<const std::size_t>(labels)); }),
                                {logits});
  });
  t.emplace_back("reused_input", [](Rng& rng) {
    auto x = randn({5}, rng);
    return finite_diff_check<T>(Fn([=] { return sum(add(mul(x, x), x)); }), {x});
  });
  t.emplace_back("patch_embed", [](Rng& rng) {
    auto cfg = ModelConfig::tiny();
    const std::size_t pd = cfg.patch_dim(), n = cfg.image_tokens();
    PatchEmbedParams<T> p{randn({pd, kD}, rng, 0.25), randn({kD}, rng, 0.1), randn({n, kD}, rng, 0.02)};
    ImageSample<T> img{Modality::Face, rand_uniform({cfg.image_height, cfg.image_width, 1}, rng, 0, 1)};
    return check([=] { return patch_embed(img, p, cfg); }, {p.weight, p.bias, p.positional}, rng);
  });
  t.emplace_back("seq_embed_tcn", [](Rng& rng) {
    auto cfg = ModelConfig::tiny();
    const std::size_t d = cfg.embed_dim, n = cfg.sequence_tokens();
    SequenceEmbedParams<T> p;
    p.weight = randn({cfg.frame, d}, rng, 0.5);
    p.bias = randn({d}, rng, 0.1);
    p.tcn.push_back({randn({3, d, kD}, rng, 0.3), randn({kD}, rng, 0.1), 1});
    p.tcn.push_back({randn({3, kD, kD}, rng, 0.2), randn({kD}, rng, 0.1), 2});
    p.positional = randn({n, kD}, rng, 0.02);
    SequenceSample<T> s{rand_uniform({cfg.sequence_length}, rng, -1, 1)};
    std::vector<Tensor<T>> wrt{p.weight, p.bias, p.positional};
    for (const auto& l : p.tcn) {
      wrt.push_back(l.weight);
      wrt.push_back(l.bias);
    }
    return check([=] { return sequence_tokens(s, p, cfg); }, wrt, rng);
  });
  t.emplace_back("self_attention_encoder", [](Rng& rng) {
    auto x = randn({kN, kD}, rng);
    std::vector<EncoderLayerParams<T>> layers;
    std::vector<Tensor<T>> wrt{x};
    for (int l = 0; l < 2; ++l) {
      layers.push_back({rand_ln(kD, rng), rand_mha(kD, kHeads, rng), rand_ln(kD, rng), rand_mlp(kD, 2, rng)});
      const auto& e = layers.back();
      for (const auto& w : mha_tensors(e.attn)) wrt.push_back(w);
      for (const auto& w : {e.ln1.gamma, e.ln1.beta, e.ln2.gamma, e.ln2.beta, e.mlp.w1, e.mlp.b1, e.mlp.w2,
                            e.mlp.b2})
        wrt.push_back(w);
    }
    return check([=] { return self_attention_encoder<T>(x, std::span<const EncoderLayerParams<T>>(layers), kEps); },
                 wrt, rng);
  });
  t.emplace_back("cross_msa", [](Rng& rng) {
    auto q = randn({kN, kD}, rng), k = randn({kN + 2, kD}, rng), v = randn({kN + 2, kD}, rng);
    auto p = rand_mha(kD, kHeads, rng);
    std::vector<Tensor<T>> wrt{q, k, v};
    for (const auto& w : mha_tensors(p)) wrt.push_back(w);
    return check([=] { return cross_msa(q, k, v, p); }, wrt, rng);
  });
  t.emplace_back("fusion_stage1", [](Rng& rng) {
    auto a = randn({kN, kD}, rng), b = randn({kN, kD}, rng);
    auto p = rand_stage(kD, kHeads, rng);
    auto wrt = stage_tensors(p);
    wrt.push_back(a);
    wrt.push_back(b);
    return check([=] { return fuse_images_stage1(a, b, p, kEps); }, wrt, rng);
  });
  t.emplace_back("fusion_stage2", [](Rng& rng) {
    auto a = randn({kN, kD}, rng), s1 = randn({kN, kD}, rng), b = randn({kN, kD}, rng);
    auto p = rand_stage(kD, kHeads, rng);
    auto wrt = stage_tensors(p);
    for (const auto& x : {a, s1, b}) wrt.push_back(x);
    return check([=] { return fuse_images_stage2(a, s1, b, p, kEps); }, wrt, rng);
  });
  t.emplace_back("glu", [](Rng& rng) {
    auto n = randn({kN, kD}, rng);
    auto p = rand_grn(kD, rng);
    return check([=] { return glu(n, p); }, {n, p.w4, p.b4, p.w5, p.b5}, rng);
  });
  t.emplace_back("grn", [](Rng& rng) {
    auto b = randn({kN, kD}, rng), s = randn({kN, kD}, rng);
    auto p = rand_grn(kD, rng);
    return check([=] { return grn_fuse(b, s, p, kEps); },
                 {b, s, p.w1, p.b1, p.w2, p.w3, p.b2, p.w4, p.b4, p.w5, p.b5, p.ln.gamma, p.ln.beta}, rng);
  });
  t.emplace_back("model_trimodal", [](Rng& rng) {
    auto cfg = ModelConfig::tiny();
    AuthFormer<T> model(cfg, rng.fork(7).below(1u << 30));
    // Perturb the zero-initialized tensors so their gradients are generic.
    for (auto& [name, p] : model.params().entries()) {
      for (auto& v : p.mutable_data()) v += 0.05 * rng.normal();
    }
    RawSample<T> raw;
    raw.images.push_back({Modality::Face, rand_uniform({cfg.image_height, cfg.image_width, 1}, rng, 0, 1)});
    raw.images.push_back({Modality::Fingerprint, rand_uniform({cfg.image_height, cfg.image_width, 1}, rng, 0, 1)});
    raw.sequence = SequenceSample<T>{rand_uniform({cfg.sequence_length}, rng, -1, 1)};
    std::vector<Tensor<T>> wrt;
    for (const auto& [name, p] : model.params().entries()) wrt.push_back(p);
    const auto& m = model;
    return check([&m, raw] { return m.forward(raw); }, wrt, rng);
  });
  return t;
}

Target fault_target() {
  return {"injected_fault", [](Rng& rng) {
            auto a = randn({6}, rng);
            // derivative of tanh missing its square
            auto f = [](T v) { return std::tanh(v); };
            auto wrong = [](T v) { return 1.0 - std::tanh(v); };
            return check([=] { return map_unary<T>(a, f, wrong); }, {a}, rng);
          }};
}

}  // namespace

std::vector<std::string> gradcheck_targets() {
  std::vector<std::string> names;
  for (const auto& [name, fn] : all_targets()) names.emplace_back(name);
  return names;
}

std::vector<GradcheckResult> run_gradcheck(const GradcheckOptions& options,
                                           const std::function<void(const GradcheckResult&)>& on_result) {
  auto targets = all_targets();
  if (options.inject_fault) targets.push_back(fault_target());
  std::vector<GradcheckResult> results;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const auto& [name, fn] = targets[i];
    if (!options.filter.empty() && std::string(name).find(options.filter) == std::string::npos) continue;
    const auto start = std::chrono::steady_clock::now();
    double worst = 0;
    for (std::size_t s = 0; s < options.seeds; ++s) {
      Rng rng(options.base_seed + 1000 * s + i);
      const double err = fn(rng);
      worst = std::isnan(err) ? err : std::max(worst, err);
      if (std::isnan(worst)) break;
    }
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
    GradcheckResult r{name, worst, elapsed.count(), worst <= options.tolerance};
    if (on_result) on_result(r);
    results.push_back(std::move(r));
  }
  return results;
}

}  // namespace authformer
