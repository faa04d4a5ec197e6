#include "authformer/model.hpp"

#include <algorithm>
#include <string>

#include "authformer/error.hpp"
#include "authformer/ops.hpp"

namespace authformer {
namespace {

std::size_t image_count(const Combination& c) {
  return static_cast<std::size_t>(std::count_if(c.begin(), c.end(), [](Modality m) { return is_image(m); }));
}

std::string prefix(const std::string& base, const std::string& leaf) { return base + "." + leaf; }

template <typename T>
class Registrar {
 public:
  Registrar(ParamStore<T>& store, Rng& rng) : store_(store), rng_(rng) {}

  void projection(const std::string& name, std::size_t in, std::size_t out) {
    store_.add(name, init::fan_in_uniform<T>({in, out}, in, rng_));
  }
  void bias(const std::string& name, std::size_t n) { store_.add(name, Tensor<T>::zeros({n})); }
  void positional(const std::string& name, std::size_t n, std::size_t d) {
    store_.add(name, init::normal<T>({n, d}, 0.02, rng_));
  }
  void layer_norm(const std::string& base, std::size_t d) {
    store_.add(prefix(base, "gamma"), Tensor<T>::full({d}, T(1)));
    store_.add(prefix(base, "beta"), Tensor<T>::zeros({d}));
  }
  void conv(const std::string& base, std::size_t taps, std::size_t in, std::size_t out) {
    store_.add(prefix(base, "weight"), init::fan_in_uniform<T>({taps, in, out}, taps * in, rng_));
    bias(prefix(base, "bias"), out);
  }
  void attention(const std::string& base, std::size_t d) {
    for (const char* w : {"wq", "wk", "wv", "wo"}) projection(prefix(base, w), d, d);
  }
  void mlp(const std::string& base, std::size_t d, std::size_t hidden) {
    projection(prefix(base, "w1"), d, hidden);
    bias(prefix(base, "b1"), hidden);
    projection(prefix(base, "w2"), hidden, d);
    bias(prefix(base, "b2"), d);
  }

 private:
  ParamStore<T>& store_;
  Rng& rng_;
};

template <typename T>
LayerNormParams<T> ln_view(const ParamStore<T>& s, const std::string& base) {
  return {s.get(prefix(base, "gamma")), s.get(prefix(base, "beta"))};
}

template <typename T>
MhaParams<T> mha_view(const ParamStore<T>& s, const std::string& base, std::size_t heads) {
  return {s.get(prefix(base, "wq")), s.get(prefix(base, "wk")), s.get(prefix(base, "wv")), s.get(prefix(base, "wo")),
          heads};
}

template <typename T>
MlpParams<T> mlp_view(const ParamStore<T>& s, const std::string& base) {
  return {s.get(prefix(base, "w1")), s.get(prefix(base, "b1")), s.get(prefix(base, "w2")), s.get(prefix(base, "b2"))};
}

template <typename T>
CrossStageParams<T> stage_view(const ParamStore<T>& s, const std::string& base, std::size_t heads) {
  return {mha_view(s, prefix(base, "attn"), heads), ln_view(s, prefix(base, "ln")), mlp_view(s, prefix(base, "mlp"))};
}

}  // namespace

template <typename T>
AuthFormer<T>::AuthFormer(ModelConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  config_.modalities = canonical(config_.modalities);
  // A model may carry more branches than one route uses; only repeats are invalid.
  if (std::adjacent_find(config_.modalities.begin(), config_.modalities.end()) != config_.modalities.end()) {
    throw ValidationError("model config: repeated modality tag");
  }
  register_params(seed);
  build_views();
}

template <typename T>
void AuthFormer<T>::register_params(std::uint64_t seed) {
  Rng rng(seed);
  Registrar<T> reg(params_, rng);
  const auto& c = config_;
  const std::size_t d = c.model_dim, n = c.tokens(), hidden = c.mlp_ratio * c.model_dim;
  for (auto m : c.modalities) {
    const std::string tag(modality_name(m));
    const std::string embed = "embed." + tag;
    if (is_image(m)) {
      reg.projection(embed + ".patch.weight", c.patch_dim(), d);
      reg.bias(embed + ".patch.bias", d);
    } else {
      reg.projection(embed + ".frame.weight", c.frame, c.embed_dim);
      reg.bias(embed + ".frame.bias", c.embed_dim);
      std::size_t in = c.embed_dim;
      for (std::size_t i = 0; i < c.tcn.dilations.size(); ++i) {
        reg.conv(embed + ".tcn." + std::to_string(i), c.tcn.kernel_size, in, d);
        in = d;
      }
    }
    reg.positional(embed + ".pos", n, d);
    for (std::size_t l = 0; l < c.layers; ++l) {
      const std::string base = "encoder." + tag + "." + std::to_string(l);
      reg.layer_norm(base + ".ln1", d);
      reg.attention(base + ".attn", d);
      reg.layer_norm(base + ".ln2", d);
      reg.mlp(base + ".mlp", d, hidden);
    }
  }
  if (image_count(c.modalities) >= 2) {
    for (const char* stage : {"fusion.stage1", "fusion.stage2"}) {
      reg.attention(prefix(stage, "attn"), d);
      reg.layer_norm(prefix(stage, "ln"), d);
      reg.mlp(prefix(stage, "mlp"), d, hidden);
    }
  }
  if (image_count(c.modalities) >= 1 && contains(c.modalities, Modality::Voice)) {
    for (const char* w : {"w1", "w2", "w3", "w4", "w5"}) reg.projection(prefix("grn", w), d, d);
    for (const char* b : {"b1", "b2", "b4", "b5"}) reg.bias(prefix("grn", b), d);
  }
  reg.layer_norm("out_norm", d);
  reg.projection("head.weight", d, c.num_classes);
  reg.bias("head.bias", c.num_classes);
}

template <typename T>
void AuthFormer<T>::build_views() {
  const auto& s = params_;
  const auto& c = config_;
  patch_.clear();
  encoders_.clear();
  sequence_.reset();
  stage1_.reset();
  stage2_.reset();
  grn_.reset();
  for (auto m : c.modalities) {
    const std::string tag(modality_name(m));
    const std::string embed = "embed." + tag;
    if (is_image(m)) {
      patch_[m] = {s.get(embed + ".patch.weight"), s.get(embed + ".patch.bias"), s.get(embed + ".pos")};
    } else {
      SequenceEmbedParams<T> seq{s.get(embed + ".frame.weight"), s.get(embed + ".frame.bias"), {},
                                 s.get(embed + ".pos")};
      for (std::size_t i = 0; i < c.tcn.dilations.size(); ++i) {
        const std::string base = embed + ".tcn." + std::to_string(i);
        seq.tcn.push_back({s.get(base + ".weight"), s.get(base + ".bias"), c.tcn.dilations[i]});
      }
      sequence_ = std::move(seq);
    }
    auto& layers = encoders_[m];
    for (std::size_t l = 0; l < c.layers; ++l) {
      const std::string base = "encoder." + tag + "." + std::to_string(l);
      layers.push_back({ln_view(s, base + ".ln1"), mha_view(s, base + ".attn", c.heads), ln_view(s, base + ".ln2"),
                        mlp_view(s, base + ".mlp")});
    }
  }
  out_norm_ = ln_view(s, "out_norm");
  if (s.contains("fusion.stage1.attn.wq")) {
    stage1_ = stage_view(s, "fusion.stage1", c.heads);
    stage2_ = stage_view(s, "fusion.stage2", c.heads);
  }
  if (s.contains("grn.w1")) {
    grn_ = GrnParams<T>{s.get("grn.w1"), s.get("grn.b1"), s.get("grn.w2"), s.get("grn.w3"), s.get("grn.b2"),
                        s.get("grn.w4"), s.get("grn.b4"), s.get("grn.w5"), s.get("grn.b5"), out_norm_};
  }
  head_ = {s.get("head.weight"), s.get("head.bias")};
}

template <typename T>
void AuthFormer<T>::load_params(const ParamStore<T>& source) {
  if (source.size() != params_.size()) {
    throw ValidationError("parameter set has " + std::to_string(source.size()) + " entries, model expects " +
                          std::to_string(params_.size()));
  }
  for (auto& [name, tensor] : params_.entries()) {
    if (!source.contains(name)) throw ValidationError("parameter '" + name + "' missing");
    const auto& src = source.get(name);
    if (src.shape() != tensor.shape()) {
      throw ValidationError("parameter '" + name + "' has shape " + shape_str(src.shape()) + ", expected " +
                            shape_str(tensor.shape()));
    }
    std::copy(src.data().begin(), src.data().end(), tensor.mutable_data().begin());
  }
}

template <typename T>
void AuthFormer<T>::require_modality(Modality tag) const {
  if (!contains(config_.modalities, tag)) {
    throw ValidationError("model was not configured for modality '" + std::string(modality_name(tag)) +
                          "' (configured: " + combination_tags(config_.modalities) + ")");
  }
}

template <typename T>
const PatchEmbedParams<T>& AuthFormer<T>::patch_params(Modality tag) const {
  if (!is_image(tag)) throw ValidationError("voice has no patch embedding");
  require_modality(tag);
  return patch_.at(tag);
}

template <typename T>
const SequenceEmbedParams<T>& AuthFormer<T>::sequence_params() const {
  require_modality(Modality::Voice);
  return *sequence_;
}

template <typename T>
const std::vector<EncoderLayerParams<T>>& AuthFormer<T>::encoder_params(Modality tag) const {
  require_modality(tag);
  return encoders_.at(tag);
}

template <typename T>
const CrossStageParams<T>& AuthFormer<T>::stage1_params() const {
  if (!stage1_) throw ValidationError("model has no image-pair fusion stages");
  return *stage1_;
}

template <typename T>
const CrossStageParams<T>& AuthFormer<T>::stage2_params() const {
  if (!stage2_) throw ValidationError("model has no image-pair fusion stages");
  return *stage2_;
}

template <typename T>
const GrnParams<T>& AuthFormer<T>::grn_params() const {
  if (!grn_) throw ValidationError("model has no gated residual fusion");
  return *grn_;
}

template <typename T>
Tensor<T> AuthFormer<T>::embed_image(const ImageSample<T>& image) const {
  return patch_embed(image, patch_params(image.tag), config_);
}

template <typename T>
Tensor<T> AuthFormer<T>::embed_sequence(const SequenceSample<T>& sample) const {
  return sequence_tokens(sample, sequence_params(), config_);
}

template <typename T>
ModalityBundle<T> AuthFormer<T>::embed(const RawSample<T>& sample) const {
  std::vector<TaggedTokens<T>> entries;
  for (const auto& img : sample.images) entries.push_back({img.tag, embed_image(img)});
  if (sample.sequence) entries.push_back({Modality::Voice, embed_sequence(*sample.sequence)});
  return ModalityBundle<T>::from_entries(std::move(entries));
}

template <typename T>
Tensor<T> AuthFormer<T>::encode(Modality tag, const Tensor<T>& tokens) const {
  const auto& layers = encoder_params(tag);
  return self_attention_encoder(tokens, std::span<const EncoderLayerParams<T>>(layers), config_.ln_eps);
}

template <typename T>
Tensor<T> AuthFormer<T>::features(const ModalityBundle<T>& bundle) const {
  const RoutePlan plan = plan_route(bundle);
  const Shape token_shape{config_.tokens(), config_.model_dim};
  for (auto m : bundle.modalities()) require_modality(m);
  auto check = [&](Modality m, const Tensor<T>& t) {
    if (t.shape() != token_shape) {
      throw ValidationError(std::string(modality_name(m)) + " tokens have shape " + shape_str(t.shape()) +
                            ", expected " + shape_str(token_shape));
    }
  };
  if (bundle.image_a) check(bundle.image_a->tag, bundle.image_a->tokens);
  if (bundle.image_b) check(bundle.image_b->tag, bundle.image_b->tokens);
  if (bundle.sequence) check(Modality::Voice, *bundle.sequence);

  const double eps = config_.ln_eps;
  const auto [first, second] = ordered_images(bundle);
  auto fused_pair = [&] {
    const auto q_side = encode(first->tag, first->tokens);
    const auto v_side = encode(second->tag, second->tokens);
    const auto stage1 = fuse_images_stage1(q_side, v_side, stage1_params(), eps);
    return fuse_images_stage2(q_side, stage1, v_side, stage2_params(), eps);
  };
  switch (plan) {
    case RoutePlan::SingleImage:
      return apply_layer_norm(encode(first->tag, first->tokens), out_norm_, eps);
    case RoutePlan::SingleSequence:
      return apply_layer_norm(encode(Modality::Voice, *bundle.sequence), out_norm_, eps);
    case RoutePlan::ImagePair:
      return apply_layer_norm(fused_pair(), out_norm_, eps);
    case RoutePlan::ImagePlusSequence:
      return grn_fuse(encode(first->tag, first->tokens), encode(Modality::Voice, *bundle.sequence), grn_params(),
                      eps);
    case RoutePlan::ImagePairPlusSequence:
      return grn_fuse(fused_pair(), encode(Modality::Voice, *bundle.sequence), grn_params(), eps);
  }
  throw ValidationError("unhandled route");
}

template <typename T>
Tensor<T> AuthFormer<T>::head(const Tensor<T>& feats) const {
  const auto pooled = reshape(mean_pool(feats, 0), {1, config_.model_dim});
  return reshape(affine(pooled, head_.weight, head_.bias), {config_.num_classes});
}

template <typename T>
Tensor<T> AuthFormer<T>::forward(const ModalityBundle<T>& bundle) const {
  return head(features(bundle));
}

template <typename T>
Prediction AuthFormer<T>::predict(const ModalityBundle<T>& bundle) const {
  return predict_from_logits(forward(bundle));
}

template class AuthFormer<float>;
template class AuthFormer<double>;

}  // namespace authformer
