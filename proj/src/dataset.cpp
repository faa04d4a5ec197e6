#include <algorithm>
#include <cmath>
#include <string>

#include "authformer/data_io.hpp"
#include "authformer/error.hpp"

namespace authformer {

nlohmann::json DatasetManifest::to_json() const {
  nlohmann::json mods = nlohmann::json::array();
  for (const auto& m : modalities) {
    mods.push_back({{"tag", std::string(modality_name(m.tag))}, {"shape", m.shape}, {"blob", m.blob}});
  }
  std::vector<std::string> sides;
  for (auto s : split) sides.emplace_back(s == SplitSide::Train ? "train" : "test");
  return {{"version", version},
          {"num_classes", num_classes},
          {"samples_per_class", samples_per_class},
          {"seed", seed},
          {"noise_level", noise_level},
          {"test_fraction", test_fraction},
          {"modalities", mods},
          {"labels", labels},
          {"split", sides}};
}

DatasetManifest DatasetManifest::from_json(const nlohmann::json& j) {
  DatasetManifest m;
  try {
    j.at("version").get_to(m.version);
    j.at("num_classes").get_to(m.num_classes);
    j.at("samples_per_class").get_to(m.samples_per_class);
    j.at("seed").get_to(m.seed);
    j.at("noise_level").get_to(m.noise_level);
    j.at("test_fraction").get_to(m.test_fraction);
    for (const auto& entry : j.at("modalities")) {
      ModalityDescriptor d{parse_modality(entry.at("tag").get<std::string>()), entry.at("shape").get<Shape>(),
                           entry.at("blob").get<std::string>()};
      m.modalities.push_back(std::move(d));
    }
    j.at("labels").get_to(m.labels);
    for (const auto& side : j.at("split")) {
      const auto text = side.get<std::string>();
      if (text == "train") {
        m.split.push_back(SplitSide::Train);
      } else if (text == "test") {
        m.split.push_back(SplitSide::Test);
      } else {
        throw ValidationError("manifest: split entry '" + text + "' is neither train nor test");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("manifest: ") + e.what());
  }
  if (m.version != DatasetManifest::kVersion) {
    throw ValidationError("manifest: unsupported version '" + m.version + "'");
  }
  if (m.num_classes < 2) throw ValidationError("manifest: num_classes must be at least 2");
  if (m.split.size() != m.labels.size()) {
    throw ValidationError("manifest: split covers " + std::to_string(m.split.size()) + " samples, labels cover " +
                          std::to_string(m.labels.size()));
  }
  for (auto l : m.labels) {
    if (l >= m.num_classes) throw ValidationError("manifest: label " + std::to_string(l) + " out of range");
  }
  for (const auto& d : m.modalities) {
    if (d.shape.empty() || d.shape[0] != m.labels.size()) {
      throw ValidationError("manifest: modality '" + std::string(modality_name(d.tag)) + "' declares shape " +
                            shape_str(d.shape) + " for " + std::to_string(m.labels.size()) + " samples");
    }
    if (d.blob.empty() || d.blob.find('/') != std::string::npos || d.blob.find("..") != std::string::npos) {
      throw ValidationError("manifest: invalid blob file name '" + d.blob + "'");
    }
  }
  return m;
}

std::vector<std::size_t> Dataset::ids(SplitSide side) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < manifest.split.size(); ++i)
    if (manifest.split[i] == side) out.push_back(i);
  return out;
}

const ModalityDescriptor& Dataset::descriptor(Modality tag) const {
  for (const auto& d : manifest.modalities)
    if (d.tag == tag) return d;
  throw ValidationError("dataset has no '" + std::string(modality_name(tag)) + "' modality");
}

std::span<const float> Dataset::raw(Modality tag, std::size_t id) const {
  const auto& d = descriptor(tag);
  const std::size_t per = shape_numel(d.shape) / d.shape[0];
  if (id >= d.shape[0]) throw ValidationError("sample id " + std::to_string(id) + " out of range");
  return std::span<const float>(values.at(tag)).subspan(id * per, per);
}

template <typename T>
RawSample<T> Dataset::sample(std::size_t id, const Combination& modalities) const {
  RawSample<T> out;
  for (auto m : canonical(modalities)) {
    const auto& d = descriptor(m);
    const auto src = raw(m, id);
    Shape shape(d.shape.begin() + 1, d.shape.end());
    Tensor<T> t(std::move(shape), std::vector<T>(src.begin(), src.end()));
    if (is_image(m)) {
      out.images.push_back({m, std::move(t)});
    } else {
      out.sequence = SequenceSample<T>{std::move(t)};
    }
  }
  return out;
}

template RawSample<float> Dataset::sample(std::size_t, const Combination&) const;
template RawSample<double> Dataset::sample(std::size_t, const Combination&) const;

void save_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  for (const auto& d : dataset.manifest.modalities) {
    std::string bytes;
    append_blob(bytes, d.shape, std::span<const float>(dataset.values.at(d.tag)));
    write_file_atomic(dir / d.blob, bytes);
  }
  write_file_atomic(dir / "manifest.json", dataset.manifest.to_json().dump(2) + "\n");
}

Dataset load_dataset(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(manifest_path));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(manifest_path.string() + ": " + e.what());
  }
  Dataset ds;
  ds.manifest = DatasetManifest::from_json(j);
  for (const auto& d : ds.manifest.modalities) {
    const auto path = dir / d.blob;
    if (!std::filesystem::exists(path)) throw IoError("missing blob " + path.string());
    const auto bytes = read_file(path);
    std::size_t offset = 0;
    auto blob = decode_blob(bytes, offset, path.string());
    if (blob.shape != d.shape) {
      throw FormatError(path.string() + ": shape " + shape_str(blob.shape) + " does not match manifest shape " +
                        shape_str(d.shape));
    }
    if (blob.type != ElementType::F32) throw FormatError(path.string() + ": dataset blobs must be f32");
    if (offset != bytes.size()) throw FormatError(path.string() + ": trailing bytes after payload");
    std::vector<float> values(blob.values.begin(), blob.values.end());
    const bool image = is_image(d.tag);
    for (float v : values) {
      if (!std::isfinite(v) || (image && (v < 0.0f || v > 1.0f))) {
        throw FormatError(path.string() + ": value " + std::to_string(v) + " outside the valid range");
      }
    }
    ds.values[d.tag] = std::move(values);
  }
  return ds;
}

SplitIndices split_dataset(std::span<const std::size_t> labels, std::size_t num_classes, double test_fraction,
                           std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ValidationError("test fraction must lie strictly between 0 and 1");
  }
  std::vector<std::vector<std::size_t>> by_class(num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= num_classes) throw ValidationError("label " + std::to_string(labels[i]) + " out of range");
    by_class[labels[i]].push_back(i);
  }
  Rng rng(seed);
  SplitIndices out;
  for (std::size_t c = 0; c < num_classes; ++c) {
    auto& ids = by_class[c];
    if (ids.size() < 2) {
      throw ValidationError("class " + std::to_string(c) + " has " + std::to_string(ids.size()) +
                            " samples; splitting needs at least 2");
    }
    rng.shuffle(std::span<std::size_t>(ids));
    auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(ids.size())));
    n_test = std::clamp<std::size_t>(n_test, 1, ids.size() - 1);
    out.test.insert(out.test.end(), ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_test));
    out.train.insert(out.train.end(), ids.begin() + static_cast<std::ptrdiff_t>(n_test), ids.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

}  // namespace authformer
