#include "authformer/router.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "authformer/error.hpp"

namespace authformer {

std::string_view route_name(RoutePlan plan) {
  switch (plan) {
    case RoutePlan::SingleImage: return "SingleImage";
    case RoutePlan::SingleSequence: return "SingleSequence";
    case RoutePlan::ImagePair: return "ImagePair";
    case RoutePlan::ImagePlusSequence: return "ImagePlusSequence";
    case RoutePlan::ImagePairPlusSequence: return "ImagePairPlusSequence";
  }
  return "unknown";
}

RoutePlan plan_route(const Combination& modalities) {
  if (modalities.empty()) throw ValidationError("no modality provided");
  std::size_t images = 0, sequences = 0;
  for (std::size_t i = 0; i < modalities.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (modalities[i] == modalities[j]) {
        throw ValidationError("modality '" + std::string(modality_name(modalities[i])) + "' provided twice");
      }
    }
    (is_image(modalities[i]) ? images : sequences) += 1;
  }
  if (images > 2) throw ValidationError("at most two image modalities");
  if (sequences > 1) throw ValidationError("at most one sequence modality");
  if (images == 0) return RoutePlan::SingleSequence;
  if (images == 1) return sequences ? RoutePlan::ImagePlusSequence : RoutePlan::SingleImage;
  return sequences ? RoutePlan::ImagePairPlusSequence : RoutePlan::ImagePair;
}

template <typename T>
ModalityBundle<T> ModalityBundle<T>::from_entries(std::vector<TaggedTokens<T>> entries) {
  Combination tags;
  for (const auto& e : entries) tags.push_back(e.tag);
  plan_route(tags);
  ModalityBundle bundle;
  for (auto& e : entries) {
    if (!is_image(e.tag)) {
      bundle.sequence = std::move(e.tokens);
    } else if (!bundle.image_a) {
      bundle.image_a = std::move(e);
    } else {
      bundle.image_b = std::move(e);
    }
  }
  return bundle;
}

template <typename T>
Combination ModalityBundle<T>::modalities() const {
  Combination out;
  if (image_a) out.push_back(image_a->tag);
  if (image_b) out.push_back(image_b->tag);
  if (sequence) out.push_back(Modality::Voice);
  return out;
}

template <typename T>
std::pair<const TaggedTokens<T>*, const TaggedTokens<T>*> ordered_images(const ModalityBundle<T>& bundle) {
  const TaggedTokens<T>* a = bundle.image_a ? &*bundle.image_a : nullptr;
  const TaggedTokens<T>* b = bundle.image_b ? &*bundle.image_b : nullptr;
  if (!a) std::swap(a, b);
  if (a && b && image_priority(b->tag) < image_priority(a->tag)) std::swap(a, b);
  return {a, b};
}

template <typename T>
Prediction predict_from_logits(const Tensor<T>& logits) {
  const auto xs = logits.data();
  if (xs.empty()) throw ValidationError("empty logits");
  Prediction p;
  p.label = static_cast<std::size_t>(std::max_element(xs.begin(), xs.end()) - xs.begin());
  const double mx = static_cast<double>(xs[p.label]);
  double total = 0;
  p.probabilities.resize(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    p.probabilities[i] = std::exp(static_cast<double>(xs[i]) - mx);
    total += p.probabilities[i];
  }
  for (auto& v : p.probabilities) v /= total;
  return p;
}

const std::vector<AblationCombination>& ablation_combinations() {
  using M = Modality;
  static const std::vector<AblationCombination> rows = {
      {"Palmprint & Finger & Voice", {M::Palmprint, M::Fingerprint, M::Voice}},
      {"Face & Palmprint & Voice", {M::Face, M::Palmprint, M::Voice}},
      {"Finger & Face & Voice", {M::Fingerprint, M::Face, M::Voice}},
      {"Face & Palmprint", {M::Face, M::Palmprint}},
      {"Face & Voice", {M::Face, M::Voice}},
      {"Finger & Palmprint", {M::Fingerprint, M::Palmprint}},
      {"Finger & Voice", {M::Fingerprint, M::Voice}},
      {"Finger & Face", {M::Fingerprint, M::Face}},
      {"Palmprint & Voice", {M::Palmprint, M::Voice}},
      {"Face", {M::Face}},
      {"Palmprint", {M::Palmprint}},
      {"Finger", {M::Fingerprint}},
      {"Voice", {M::Voice}},
  };
  return rows;
}

template struct ModalityBundle<float>;
template struct ModalityBundle<double>;
template std::pair<const TaggedTokens<float>*, const TaggedTokens<float>*> ordered_images(
    const ModalityBundle<float>&);
template std::pair<const TaggedTokens<double>*, const TaggedTokens<double>*> ordered_images(
    const ModalityBundle<double>&);
template Prediction predict_from_logits(const Tensor<float>&);
template Prediction predict_from_logits(const Tensor<double>&);

}  // namespace authformer
