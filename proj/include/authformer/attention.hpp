#pragma once

// Fusion mathematics: pre-norm self-attention encoder, two-stage cross
// attention over an image pair, and the GLU-gated residual fusion of an image
// stream with a sequence stream.
//
// Weights are stored input-major ([in, out]) and applied to row vectors, so a
// token matrix X [N, D] is projected as X W. Every product below is row-wise
// over the N tokens.

#include <cstddef>
#include <span>
#include <vector>

#include "authformer/tensor.hpp"

namespace authformer {

template <typename T>
struct LayerNormParams {
  Tensor<T> gamma;  // [D]
  Tensor<T> beta;   // [D]
};

/// Column block h of each projection belongs to head h.
template <typename T>
struct MhaParams {
  Tensor<T> wq;  // [D, D]
  Tensor<T> wk;  // [D, D]
  Tensor<T> wv;  // [D, D]
  Tensor<T> wo;  // [D, D]
  std::size_t heads = 1;
};

template <typename T>
struct MlpParams {
  Tensor<T> w1;  // [D, r*D]
  Tensor<T> b1;  // [r*D]
  Tensor<T> w2;  // [r*D, D]
  Tensor<T> b2;  // [D]
};

template <typename T>
struct EncoderLayerParams {
  LayerNormParams<T> ln1;
  MhaParams<T> attn;
  LayerNormParams<T> ln2;
  MlpParams<T> mlp;
};

/// One cross-attention stage: attention, then MLP(LN(.)) with residuals.
template <typename T>
struct CrossStageParams {
  MhaParams<T> attn;
  LayerNormParams<T> ln;
  MlpParams<T> mlp;
};

template <typename T>
struct GrnParams {
  Tensor<T> w1, b1;      // m1 = m2 W1 + b1
  Tensor<T> w2, w3, b2;  // m2 = sigmoid(B W2 + S W3 + b2)
  Tensor<T> w4, b4;      // gate
  Tensor<T> w5, b5;      // value path
  LayerNormParams<T> ln;
};

template <typename T>
Tensor<T> apply_layer_norm(const Tensor<T>& x, const LayerNormParams<T>& p, double eps);

template <typename T>
Tensor<T> mlp(const Tensor<T>& x, const MlpParams<T>& p);

/// Multi-head attention with queries from q_src, keys from k_src and values
/// from v_src, all [N, D] (key and value streams must share a length).
/// When `weights` is non-null it receives one [N_q, N_k] matrix per head.
template <typename T>
Tensor<T> cross_msa(const Tensor<T>& q_src, const Tensor<T>& k_src, const Tensor<T>& v_src, const MhaParams<T>& p,
                    std::vector<Tensor<T>>* weights = nullptr);

/// x <- x + MSA(LN(x)); x <- x + MLP(LN(x)), once per layer.
template <typename T>
Tensor<T> self_attention_encoder(const Tensor<T>& tokens, std::span<const EncoderLayerParams<T>> layers, double eps);

/// B' = CrossMSA(face, face, finger) + face; B_stage1 = MLP(LN(B')) + B'.
template <typename T>
Tensor<T> fuse_images_stage1(const Tensor<T>& face, const Tensor<T>& finger, const CrossStageParams<T>& p,
                             double eps);

/// B'' = CrossMSA(face, stage1, finger) + face; B_fusion = MLP(LN(B'')) + B''.
template <typename T>
Tensor<T> fuse_images_stage2(const Tensor<T>& face, const Tensor<T>& stage1, const Tensor<T>& finger,
                             const CrossStageParams<T>& p, double eps);

/// sigmoid(n W4 + b4) * (n W5 + b5).
template <typename T>
Tensor<T> glu(const Tensor<T>& n, const GrnParams<T>& p);

/// LN(B_fusion + GLU(m1)), m1 = m2 W1 + b1, m2 = sigmoid(B_fusion W2 + S_voice W3 + b2).
template <typename T>
Tensor<T> grn_fuse(const Tensor<T>& b_fusion, const Tensor<T>& s_voice, const GrnParams<T>& p, double eps);

}  // namespace authformer
