#include "authformer/attention.hpp"

#include <cmath>
#include <string>

#include "authformer/error.hpp"
#include "authformer/ops.hpp"

namespace authformer {
namespace {

template <typename T>
void require_same(const char* what, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw ValidationError(std::string(what) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                          shape_str(b.shape()));
  }
}

}  // namespace

template <typename T>
Tensor<T> apply_layer_norm(const Tensor<T>& x, const LayerNormParams<T>& p, double eps) {
  return layer_norm(x, p.gamma, p.beta, static_cast<T>(eps));
}

template <typename T>
Tensor<T> mlp(const Tensor<T>& x, const MlpParams<T>& p) {
  return affine(gelu(affine(x, p.w1, p.b1)), p.w2, p.b2);
}

template <typename T>
Tensor<T> cross_msa(const Tensor<T>& q_src, const Tensor<T>& k_src, const Tensor<T>& v_src, const MhaParams<T>& p,
                    std::vector<Tensor<T>>* weights) {
  if (q_src.rank() != 2 || k_src.rank() != 2 || v_src.rank() != 2) {
    throw ValidationError("cross_msa expects [N,D] streams");
  }
  if (q_src.dim(1) != k_src.dim(1) || k_src.shape() != v_src.shape()) {
    throw ValidationError("cross_msa: incongruent streams " + shape_str(q_src.shape()) + ", " +
                          shape_str(k_src.shape()) + ", " + shape_str(v_src.shape()));
  }
  const std::size_t d = q_src.dim(1);
  if (p.heads == 0 || d % p.heads) {
    throw ValidationError("model dim " + std::to_string(d) + " not divisible by " + std::to_string(p.heads) +
                          " heads");
  }
  const std::size_t dh = d / p.heads;
  const auto q = matmul(q_src, p.wq);
  const auto k = matmul(k_src, p.wk);
  const auto v = matmul(v_src, p.wv);
  const T inv_scale = T(1) / std::sqrt(static_cast<T>(dh));
  std::vector<Tensor<T>> heads;
  heads.reserve(p.heads);
  if (weights) weights->clear();
  for (std::size_t h = 0; h < p.heads; ++h) {
    const auto qh = slice(q, 1, h * dh, dh);
    const auto kh = slice(k, 1, h * dh, dh);
    const auto vh = slice(v, 1, h * dh, dh);
    const auto attn = softmax(scale(matmul(qh, transpose(kh)), inv_scale), 1);
    if (weights) weights->push_back(attn);
    heads.push_back(matmul(attn, vh));
  }
  return matmul(concat(heads, 1), p.wo);
}

template <typename T>
Tensor<T> self_attention_encoder(const Tensor<T>& tokens, std::span<const EncoderLayerParams<T>> layers,
                                 double eps) {
  Tensor<T> x = tokens;
  for (const auto& layer : layers) {
    const auto h = apply_layer_norm(x, layer.ln1, eps);
    x = add(x, cross_msa(h, h, h, layer.attn));
    x = add(x, mlp(apply_layer_norm(x, layer.ln2, eps), layer.mlp));
  }
  return x;
}

template <typename T>
Tensor<T> fuse_images_stage1(const Tensor<T>& face, const Tensor<T>& finger, const CrossStageParams<T>& p,
                             double eps) {
  require_same("fuse_images_stage1", face, finger);
  const auto b1 = add(cross_msa(face, face, finger, p.attn), face);
  return add(mlp(apply_layer_norm(b1, p.ln, eps), p.mlp), b1);
}

template <typename T>
Tensor<T> fuse_images_stage2(const Tensor<T>& face, const Tensor<T>& stage1, const Tensor<T>& finger,
                             const CrossStageParams<T>& p, double eps) {
  require_same("fuse_images_stage2", face, stage1);
  require_same("fuse_images_stage2", face, finger);
  const auto b2 = add(cross_msa(face, stage1, finger, p.attn), face);
  return add(mlp(apply_layer_norm(b2, p.ln, eps), p.mlp), b2);
}

template <typename T>
Tensor<T> glu(const Tensor<T>& n, const GrnParams<T>& p) {
  return mul(sigmoid(affine(n, p.w4, p.b4)), affine(n, p.w5, p.b5));
}

template <typename T>
Tensor<T> grn_fuse(const Tensor<T>& b_fusion, const Tensor<T>& s_voice, const GrnParams<T>& p, double eps) {
  require_same("grn_fuse", b_fusion, s_voice);
  const auto m2 = sigmoid(add(add(matmul(b_fusion, p.w2), matmul(s_voice, p.w3)), p.b2));
  const auto m1 = affine(m2, p.w1, p.b1);
  return apply_layer_norm(add(b_fusion, glu(m1, p)), p.ln, eps);
}

#define AUTHFORMER_INSTANTIATE_ATTN(T)                                                                        \
  template Tensor<T> apply_layer_norm(const Tensor<T>&, const LayerNormParams<T>&, double);                   \
  template Tensor<T> mlp(const Tensor<T>&, const MlpParams<T>&);                                              \
  template Tensor<T> cross_msa(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, const MhaParams<T>&,     \
                               std::vector<Tensor<T>>*);                                                      \
  template Tensor<T> self_attention_encoder(const Tensor<T>&, std::span<const EncoderLayerParams<T>>, double); \
  template Tensor<T> fuse_images_stage1(const Tensor<T>&, const Tensor<T>&, const CrossStageParams<T>&,       \
                                        double);                                                              \
  template Tensor<T> fuse_images_stage2(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,                 \
                                        const CrossStageParams<T>&, double);                                  \
  template Tensor<T> glu(const Tensor<T>&, const GrnParams<T>&);                                              \
  template Tensor<T> grn_fuse(const Tensor<T>&, const Tensor<T>&, const GrnParams<T>&, double);

AUTHFORMER_INSTANTIATE_ATTN(float)
AUTHFORMER_INSTANTIATE_ATTN(double)

#undef AUTHFORMER_INSTANTIATE_ATTN

}  // namespace authformer
