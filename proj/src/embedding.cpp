#include "authformer/embedding.hpp"

#include <string>

#include "authformer/error.hpp"
#include "authformer/ops.hpp"

namespace authformer {

template <typename T>
Tensor<T> patchify(const Tensor<T>& pixels, std::size_t patch) {
  if (pixels.rank() != 3) throw ValidationError("image must be [H,W,C], got " + shape_str(pixels.shape()));
  const std::size_t h = pixels.dim(0), w = pixels.dim(1), c = pixels.dim(2);
  if (patch == 0 || h % patch || w % patch) {
    throw ValidationError("image " + shape_str(pixels.shape()) + " not divisible by patch " + std::to_string(patch));
  }
  const std::size_t rows = h / patch, cols = w / patch;
  const std::size_t pdim = patch * patch * c;
  std::vector<T> out(rows * cols * pdim);
  const auto px = pixels.data();
  for (std::size_t pr = 0; pr < rows; ++pr)
    for (std::size_t pc = 0; pc < cols; ++pc) {
      T* dst = out.data() + (pr * cols + pc) * pdim;
      for (std::size_t y = 0; y < patch; ++y)
        for (std::size_t x = 0; x < patch; ++x)
          for (std::size_t ch = 0; ch < c; ++ch)
            *dst++ = px[((pr * patch + y) * w + pc * patch + x) * c + ch];
    }
  return Tensor<T>(Shape{rows * cols, pdim}, std::move(out));
}

template <typename T>
Tensor<T> patch_embed(const ImageSample<T>& image, const PatchEmbedParams<T>& params, const ModelConfig& config) {
  const Shape expected{config.image_height, config.image_width, config.image_channels};
  if (image.pixels.shape() != expected) {
    throw ValidationError(std::string(modality_name(image.tag)) + " image has shape " +
                          shape_str(image.pixels.shape()) + ", expected " + shape_str(expected));
  }
  const auto patches = patchify(image.pixels, config.patch_size);
  return add_positional(affine(patches, params.weight, params.bias), params.positional);
}

template <typename T>
Tensor<T> frame_signal(const Tensor<T>& values, std::size_t frame, std::size_t hop, std::size_t frames) {
  if (values.rank() != 1) throw ValidationError("sequence must be rank 1, got " + shape_str(values.shape()));
  const std::size_t needed = (frames - 1) * hop + frame;
  if (values.dim(0) < needed) {
    throw ValidationError("sequence of length " + std::to_string(values.dim(0)) + " is too short for " +
                          std::to_string(frames) + " frames of " + std::to_string(frame) + " (hop " +
                          std::to_string(hop) + ")");
  }
  std::vector<T> out(frames * frame);
  const auto xs = values.data();
  for (std::size_t i = 0; i < frames; ++i)
    for (std::size_t j = 0; j < frame; ++j) out[i * frame + j] = xs[i * hop + j];
  return Tensor<T>(Shape{frames, frame}, std::move(out));
}

template <typename T>
Tensor<T> seq_embed(const SequenceSample<T>& sample, const SequenceEmbedParams<T>& params,
                    const ModelConfig& config) {
  const auto frames = frame_signal(sample.values, config.frame, config.hop, config.tokens());
  return affine(frames, params.weight, params.bias);
}

template <typename T>
Tensor<T> tcn_extract(const Tensor<T>& embedded, const std::vector<TcnLayerParams<T>>& layers) {
  if (layers.empty()) throw ValidationError("tcn has no layers");
  Tensor<T> x = embedded;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& layer = layers[i];
    if (x.rank() != 2 || layer.weight.rank() != 3 || x.dim(1) != layer.weight.dim(1)) {
      throw ValidationError("tcn layer " + std::to_string(i) + " expects " +
                            std::to_string(layer.weight.rank() == 3 ? layer.weight.dim(1) : 0) +
                            " input channels, got " + shape_str(x.shape()));
    }
    auto y = relu(conv1d_causal(x, layer.weight, layer.bias, layer.dilation));
    x = y.shape() == x.shape() ? add(y, x) : y;
  }
  return x;
}

template <typename T>
Tensor<T> add_positional(const Tensor<T>& features, const Tensor<T>& positional) {
  if (features.shape() != positional.shape()) {
    throw ValidationError("positional table " + shape_str(positional.shape()) + " does not match features " +
                          shape_str(features.shape()));
  }
  return add(features, positional);
}

template <typename T>
Tensor<T> sequence_tokens(const SequenceSample<T>& sample, const SequenceEmbedParams<T>& params,
                          const ModelConfig& config) {
  return add_positional(tcn_extract(seq_embed(sample, params, config), params.tcn), params.positional);
}

std::size_t tcn_receptive_field(const TcnConfig& config) {
  std::size_t field = 1;
  for (auto d : config.dilations) field += (config.kernel_size - 1) * d;
  return field;
}

#define AUTHFORMER_INSTANTIATE_EMBED(T)                                                                       \
  template Tensor<T> patchify(const Tensor<T>&, std::size_t);                                                 \
  template Tensor<T> patch_embed(const ImageSample<T>&, const PatchEmbedParams<T>&, const ModelConfig&);      \
  template Tensor<T> frame_signal(const Tensor<T>&, std::size_t, std::size_t, std::size_t);                   \
  template Tensor<T> seq_embed(const SequenceSample<T>&, const SequenceEmbedParams<T>&, const ModelConfig&);  \
  template Tensor<T> tcn_extract(const Tensor<T>&, const std::vector<TcnLayerParams<T>>&);                    \
  template Tensor<T> add_positional(const Tensor<T>&, const Tensor<T>&);                                      \
  template Tensor<T> sequence_tokens(const SequenceSample<T>&, const SequenceEmbedParams<T>&, const ModelConfig&);

AUTHFORMER_INSTANTIATE_EMBED(float)
AUTHFORMER_INSTANTIATE_EMBED(double)

#undef AUTHFORMER_INSTANTIATE_EMBED

}  // namespace authformer
