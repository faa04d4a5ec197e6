#include "authformer/config.hpp"

#include <algorithm>
#include <cctype>
#include <string>

#include "authformer/error.hpp"

namespace authformer {

std::string_view modality_name(Modality m) {
  switch (m) {
    case Modality::Face: return "face";
    case Modality::Fingerprint: return "fingerprint";
    case Modality::Palmprint: return "palmprint";
    case Modality::Voice: return "voice";
  }
  return "unknown";
}

std::string_view modality_label(Modality m) {
  switch (m) {
    case Modality::Face: return "Face";
    case Modality::Fingerprint: return "Finger";
    case Modality::Palmprint: return "Palmprint";
    case Modality::Voice: return "Voice";
  }
  return "Unknown";
}

Modality parse_modality(std::string_view text) {
  std::string lower;
  for (char c : text) {
    if (!std::isspace(static_cast<unsigned char>(c))) lower.push_back(static_cast<char>(std::tolower(c)));
  }
  if (lower == "face") return Modality::Face;
  if (lower == "finger" || lower == "fingerprint") return Modality::Fingerprint;
  if (lower == "palm" || lower == "palmprint") return Modality::Palmprint;
  if (lower == "voice") return Modality::Voice;
  throw ValidationError("unknown modality tag '" + std::string(text) + "'");
}

Combination parse_combination(std::string_view text) {
  Combination combo;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const auto piece = text.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    const Modality m = parse_modality(piece);
    if (contains(combo, m)) throw ValidationError("modality '" + std::string(modality_name(m)) + "' repeated");
    combo.push_back(m);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return combo;
}

Combination canonical(Combination combo) {
  std::sort(combo.begin(), combo.end(),
            [](Modality a, Modality b) { return static_cast<int>(a) < static_cast<int>(b); });
  return combo;
}

std::string combination_label(const Combination& combo) {
  std::string out;
  for (auto m : canonical(combo)) {
    if (!out.empty()) out += " & ";
    out += modality_label(m);
  }
  return out;
}

std::string combination_tags(const Combination& combo) {
  std::string out;
  for (auto m : canonical(combo)) {
    if (!out.empty()) out += ",";
    out += modality_name(m);
  }
  return out;
}

bool contains(const Combination& combo, Modality m) {
  return std::find(combo.begin(), combo.end(), m) != combo.end();
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ValidationError("model config: " + msg); };
  if (patch_size == 0 || image_height % patch_size || image_width % patch_size) {
    fail("image " + std::to_string(image_height) + "x" + std::to_string(image_width) +
         " is not divisible by patch size " + std::to_string(patch_size));
  }
  if (image_channels == 0) fail("image channels must be positive");
  if (frame == 0 || hop == 0) fail("frame and hop must be positive");
  const bool has_image = std::any_of(modalities.begin(), modalities.end(), is_image);
  if (has_image && contains(modalities, Modality::Voice) && sequence_tokens() != image_tokens()) {
    fail("sequence framing yields " + std::to_string(sequence_tokens()) + " tokens but images yield " +
         std::to_string(image_tokens()));
  }
  if (model_dim == 0 || embed_dim == 0) fail("dimensions must be positive");
  if (heads == 0 || model_dim % heads) {
    fail("model_dim " + std::to_string(model_dim) + " is not divisible by " + std::to_string(heads) + " heads");
  }
  if (mlp_ratio == 0) fail("mlp_ratio must be positive");
  if (layers == 0) fail("at least one encoder layer is required");
  if (num_classes < 2) fail("num_classes must be at least 2");
  if (tcn.kernel_size == 0) fail("tcn kernel size must be positive");
  if (tcn.dilations.empty()) fail("tcn needs at least one layer");
  for (auto d : tcn.dilations)
    if (d == 0) fail("tcn dilations must be strictly positive");
  if (!(ln_eps > 0)) fail("ln_eps must be positive");
  if (modalities.empty()) fail("no modality configured");
}

ModelConfig ModelConfig::tiny() {
  ModelConfig c;
  c.image_height = c.image_width = 8;
  c.patch_size = 4;
  c.sequence_length = 16;
  c.frame = c.hop = 4;
  c.model_dim = 8;
  c.embed_dim = 4;
  c.heads = 2;
  c.layers = 2;
  c.num_classes = 3;
  return c;
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  std::vector<std::string> tags;
  for (auto m : c.modalities) tags.emplace_back(modality_name(m));
  j = nlohmann::json{{"image_height", c.image_height},
                     {"image_width", c.image_width},
                     {"image_channels", c.image_channels},
                     {"patch_size", c.patch_size},
                     {"sequence_length", c.sequence_length},
                     {"frame", c.frame},
                     {"hop", c.hop},
                     {"model_dim", c.model_dim},
                     {"embed_dim", c.embed_dim},
                     {"tcn_kernel_size", c.tcn.kernel_size},
                     {"tcn_dilations", c.tcn.dilations},
                     {"heads", c.heads},
                     {"mlp_ratio", c.mlp_ratio},
                     {"layers", c.layers},
                     {"num_classes", c.num_classes},
                     {"ln_eps", c.ln_eps},
                     {"modalities", tags}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  try {
    j.at("image_height").get_to(c.image_height);
    j.at("image_width").get_to(c.image_width);
    j.at("image_channels").get_to(c.image_channels);
    j.at("patch_size").get_to(c.patch_size);
    j.at("sequence_length").get_to(c.sequence_length);
    j.at("frame").get_to(c.frame);
    j.at("hop").get_to(c.hop);
    j.at("model_dim").get_to(c.model_dim);
    j.at("embed_dim").get_to(c.embed_dim);
    j.at("tcn_kernel_size").get_to(c.tcn.kernel_size);
    j.at("tcn_dilations").get_to(c.tcn.dilations);
    j.at("heads").get_to(c.heads);
    j.at("mlp_ratio").get_to(c.mlp_ratio);
    j.at("layers").get_to(c.layers);
    j.at("num_classes").get_to(c.num_classes);
    j.at("ln_eps").get_to(c.ln_eps);
    c.modalities.clear();
    for (const auto& tag : j.at("modalities")) c.modalities.push_back(parse_modality(tag.get<std::string>()));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("model config: ") + e.what());
  }
}

}  // namespace authformer
