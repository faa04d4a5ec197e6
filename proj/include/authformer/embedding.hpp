#pragma once

// Raw modality inputs to [N, D] token sequences.
//
// Images: non-overlapping patches, flattened and projected to D, plus a
// learnable positional table. Sequences: fixed-length framing, a learnable
// affine embedding to width d, a causal dilated TCN lifting d to D, plus a
// learnable positional table.

#include <cstddef>
#include <vector>

#include "authformer/config.hpp"
#include "authformer/tensor.hpp"

namespace authformer {

template <typename T>
struct ImageSample {
  Modality tag = Modality::Face;
  Tensor<T> pixels;  // [H, W, C], values in [0, 1]
};

template <typename T>
struct SequenceSample {
  Tensor<T> values;  // [T]
};

template <typename T>
struct PatchEmbedParams {
  Tensor<T> weight;      // [patch*patch*C, D]
  Tensor<T> bias;        // [D]
  Tensor<T> positional;  // [N, D]
};

template <typename T>
struct TcnLayerParams {
  Tensor<T> weight;  // [K, C_in, C_out]
  Tensor<T> bias;    // [C_out]
  std::size_t dilation = 1;
};

template <typename T>
struct SequenceEmbedParams {
  Tensor<T> weight;  // [frame, d]
  Tensor<T> bias;    // [d]
  std::vector<TcnLayerParams<T>> tcn;
  Tensor<T> positional;  // [N, D]
};

/// [H, W, C] -> [N, patch*patch*C], patches in row-major grid order, each
/// flattened as (row, col, channel). Pure data rearrangement, not recorded.
template <typename T>
Tensor<T> patchify(const Tensor<T>& pixels, std::size_t patch);

template <typename T>
Tensor<T> patch_embed(const ImageSample<T>& image, const PatchEmbedParams<T>& params, const ModelConfig& config);

/// [T] -> [N, frame]; frame i covers samples [i*hop, i*hop + frame).
template <typename T>
Tensor<T> frame_signal(const Tensor<T>& values, std::size_t frame, std::size_t hop, std::size_t frames);

/// Framing followed by the learnable embedding; returns e as [N, d].
template <typename T>
Tensor<T> seq_embed(const SequenceSample<T>& sample, const SequenceEmbedParams<T>& params,
                    const ModelConfig& config);

/// Stack of causal conv -> ReLU blocks, residual where widths match.
template <typename T>
Tensor<T> tcn_extract(const Tensor<T>& embedded, const std::vector<TcnLayerParams<T>>& layers);

/// S_i = f_i + p_i.
template <typename T>
Tensor<T> add_positional(const Tensor<T>& features, const Tensor<T>& positional);

/// seq_embed -> tcn_extract -> add_positional.
template <typename T>
Tensor<T> sequence_tokens(const SequenceSample<T>& sample, const SequenceEmbedParams<T>& params,
                          const ModelConfig& config);

/// 1 + sum_i (K - 1) * dilation_i.
std::size_t tcn_receptive_field(const TcnConfig& config);

}  // namespace authformer
