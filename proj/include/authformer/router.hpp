#pragma once

// Adaptive routing: which computation path a given subset of modalities takes.

#include <cstddef>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include "authformer/config.hpp"
#include "authformer/tensor.hpp"

namespace authformer {

enum class RoutePlan { SingleImage, SingleSequence, ImagePair, ImagePlusSequence, ImagePairPlusSequence };

std::string_view route_name(RoutePlan plan);

template <typename T>
struct TaggedTokens {
  Modality tag;
  Tensor<T> tokens;  // [N, D]
};

/// Up to two image token streams and at most one sequence stream.
template <typename T>
struct ModalityBundle {
  std::optional<TaggedTokens<T>> image_a;
  std::optional<TaggedTokens<T>> image_b;
  std::optional<Tensor<T>> sequence;

  /// Places each entry in its slot. Rejects a third image, a second
  /// sequence and repeated tags.
  static ModalityBundle from_entries(std::vector<TaggedTokens<T>> entries);

  Combination modalities() const;
};

template <typename T>
struct HeadParams {
  Tensor<T> weight;  // [D, num_classes]
  Tensor<T> bias;    // [num_classes]
};

/// Route for a set of modality tags. Throws ValidationError for an empty set,
/// more than two images, more than one sequence or a repeated tag.
RoutePlan plan_route(const Combination& modalities);

template <typename T>
RoutePlan plan_route(const ModalityBundle<T>& bundle) {
  return plan_route(bundle.modalities());
}

/// The image entries ordered by tag priority (face, fingerprint, palmprint):
/// first goes on the query side of the cross-attention stages.
template <typename T>
std::pair<const TaggedTokens<T>*, const TaggedTokens<T>*> ordered_images(const ModalityBundle<T>& bundle);

struct Prediction {
  std::size_t label = 0;
  std::vector<double> probabilities;
};

/// Argmax of softmax(logits); ties go to the lowest class index.
template <typename T>
Prediction predict_from_logits(const Tensor<T>& logits);

/// The thirteen combinations of the ablation table, in table order, with
/// their display labels.
struct AblationCombination {
  std::string_view label;
  Combination modalities;
};
const std::vector<AblationCombination>& ablation_combinations();

}  // namespace authformer
