#pragma once

// The full multimodal model: per-modality embeddings and encoders, shared
// image-pair fusion stages, the gated residual fusion, an output layer norm
// and a mean-pool classification head.
//
// Every learnable tensor lives in one ParamStore under a dotted name
// ("encoder.face.0.attn.wq", "grn.w4", "head.weight", ...). The typed views
// below alias those tensors.
//
// The output norm doubles as the layer norm inside the gated residual fusion,
// so a closed gate reduces the sequence routes exactly to their image-only
// counterparts.

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "authformer/attention.hpp"
#include "authformer/config.hpp"
#include "authformer/embedding.hpp"
#include "authformer/params.hpp"
#include "authformer/router.hpp"

namespace authformer {

/// Raw inputs of one sample, restricted to the modalities to be used.
template <typename T>
struct RawSample {
  std::vector<ImageSample<T>> images;
  std::optional<SequenceSample<T>> sequence;
};

template <typename T>
class AuthFormer {
 public:
  /// Fresh weights: fan-in uniform projections, N(0, 0.02) positional
  /// tables, unit/zero layer norms, zero biases.
  AuthFormer(ModelConfig config, std::uint64_t seed);

  AuthFormer(AuthFormer&&) noexcept = default;
  AuthFormer& operator=(AuthFormer&&) noexcept = default;
  AuthFormer(const AuthFormer&) = delete;
  AuthFormer& operator=(const AuthFormer&) = delete;

  const ModelConfig& config() const { return config_; }
  ParamStore<T>& params() { return params_; }
  const ParamStore<T>& params() const { return params_; }
  std::size_t parameter_count() const { return params_.element_count(); }

  /// Copies values from `source`, which must hold exactly this model's names
  /// and shapes.
  void load_params(const ParamStore<T>& source);

  Tensor<T> embed_image(const ImageSample<T>& image) const;
  Tensor<T> embed_sequence(const SequenceSample<T>& sample) const;
  ModalityBundle<T> embed(const RawSample<T>& sample) const;

  /// Per-modality self-attention encoder.
  Tensor<T> encode(Modality tag, const Tensor<T>& tokens) const;

  /// Route-dependent fused, normalized tokens [N, D] ahead of the head.
  Tensor<T> features(const ModalityBundle<T>& bundle) const;
  /// Class logits [num_classes].
  Tensor<T> forward(const ModalityBundle<T>& bundle) const;
  Tensor<T> forward(const RawSample<T>& sample) const { return forward(embed(sample)); }
  Prediction predict(const ModalityBundle<T>& bundle) const;

  /// mean-pool over tokens, then affine.
  Tensor<T> head(const Tensor<T>& features) const;

  const PatchEmbedParams<T>& patch_params(Modality tag) const;
  const SequenceEmbedParams<T>& sequence_params() const;
  const std::vector<EncoderLayerParams<T>>& encoder_params(Modality tag) const;
  const CrossStageParams<T>& stage1_params() const;
  const CrossStageParams<T>& stage2_params() const;
  const GrnParams<T>& grn_params() const;
  const LayerNormParams<T>& out_norm() const { return out_norm_; }
  const HeadParams<T>& head_params() const { return head_; }

 private:
  void register_params(std::uint64_t seed);
  void build_views();
  void require_modality(Modality tag) const;

  ModelConfig config_;
  ParamStore<T> params_;
  std::map<Modality, PatchEmbedParams<T>> patch_;
  std::optional<SequenceEmbedParams<T>> sequence_;
  std::map<Modality, std::vector<EncoderLayerParams<T>>> encoders_;
  std::optional<CrossStageParams<T>> stage1_;
  std::optional<CrossStageParams<T>> stage2_;
  std::optional<GrnParams<T>> grn_;
  LayerNormParams<T> out_norm_;
  HeadParams<T> head_;
};

extern template class AuthFormer<float>;
extern template class AuthFormer<double>;

}  // namespace authformer
