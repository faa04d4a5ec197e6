#pragma once

// Modality tags, modality combinations and the model geometry shared by
// every module.

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace authformer {

enum class Modality { Face, Fingerprint, Palmprint, Voice };

inline constexpr Modality kAllModalities[] = {Modality::Face, Modality::Fingerprint, Modality::Palmprint,
                                              Modality::Voice};

/// Lower-case tag used in files and on the command line.
std::string_view modality_name(Modality m);
/// Display label ("Face", "Finger", "Palmprint", "Voice").
std::string_view modality_label(Modality m);
/// Accepts face, finger, fingerprint, palm, palmprint, voice (any case).
Modality parse_modality(std::string_view text);

constexpr bool is_image(Modality m) { return m != Modality::Voice; }

/// Image pair ordering: face before fingerprint before palmprint.
constexpr int image_priority(Modality m) { return static_cast<int>(m); }

using Combination = std::vector<Modality>;

/// Comma-separated tags; rejects unknown and repeated tags.
Combination parse_combination(std::string_view text);
/// Sorted by image priority, voice last.
Combination canonical(Combination combo);
/// "Face & Finger & Voice" in canonical order.
std::string combination_label(const Combination& combo);
/// "face,fingerprint,voice" in canonical order.
std::string combination_tags(const Combination& combo);
bool contains(const Combination& combo, Modality m);

struct TcnConfig {
  std::size_t kernel_size = 3;
  std::vector<std::size_t> dilations = {1, 2};
};

struct ModelConfig {
  // image geometry
  std::size_t image_height = 32;
  std::size_t image_width = 32;
  std::size_t image_channels = 1;
  std::size_t patch_size = 8;
  // sequence geometry
  std::size_t sequence_length = 256;
  std::size_t frame = 16;
  std::size_t hop = 16;
  // widths
  std::size_t model_dim = 64;
  std::size_t embed_dim = 32;
  TcnConfig tcn;
  std::size_t heads = 4;
  std::size_t mlp_ratio = 2;
  std::size_t layers = 2;
  std::size_t num_classes = 8;
  double ln_eps = 1e-5;
  Combination modalities = {Modality::Face, Modality::Fingerprint, Modality::Voice};

  std::size_t image_tokens() const {
    return (image_height / patch_size) * (image_width / patch_size);
  }
  std::size_t sequence_tokens() const {
    return sequence_length < frame ? 0 : (sequence_length - frame) / hop + 1;
  }
  /// Token count N of every stream; sequence-only models use the frame count.
  std::size_t tokens() const {
    for (auto m : modalities)
      if (is_image(m)) return image_tokens();
    return sequence_tokens();
  }
  std::size_t patch_dim() const { return patch_size * patch_size * image_channels; }

  /// Throws ValidationError on any inconsistency.
  void validate() const;

  /// N=4, D=8, h=2 geometry used by the gradient checks.
  static ModelConfig tiny();
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

}  // namespace authformer
