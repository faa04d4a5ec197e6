#pragma once

// Synthetic multimodal datasets, the on-disk tensor/checkpoint formats and
// deterministic splitting.
//
// TensorBlob (.atf), all integers little-endian:
//   "ATF1" | u8 element type (0 = f32, 1 = f64) | u32 rank | rank x u32 dims |
//   row-major payload
//
// Checkpoint (.afck):
//   "AFCK" | u32 format version | u32 config length | config JSON (UTF-8) |
//   u32 entry count | entries: (u32 name length | name | TensorBlob) ... |
//   u32 CRC-32 of every preceding byte
//
// Dataset directory: manifest.json plus one .atf blob per modality, each
// holding every sample stacked along axis 0.

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "authformer/config.hpp"
#include "authformer/model.hpp"
#include "authformer/params.hpp"

namespace authformer {

// ---------------------------------------------------------------------------
// TensorBlob

enum class ElementType : std::uint8_t { F32 = 0, F64 = 1 };

/// Decoded blob; values are widened to double, which is exact for f32.
struct BlobData {
  ElementType type = ElementType::F32;
  Shape shape;
  std::vector<double> values;
};

void append_blob(std::string& out, const Shape& shape, std::span<const float> values);
void append_blob(std::string& out, const Shape& shape, std::span<const double> values);

/// Decodes the blob starting at `offset` and advances it. `context` names the
/// file or entry in error messages.
BlobData decode_blob(std::string_view bytes, std::size_t& offset, const std::string& context);

/// Writes via a temporary file and rename.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);
std::string read_file(const std::filesystem::path& path);

std::uint32_t crc32(std::string_view bytes);

// ---------------------------------------------------------------------------
// Datasets

enum class SplitSide { Train, Test };

struct ModalityDescriptor {
  Modality tag;
  Shape shape;  // [samples, ...per-sample shape]
  std::string blob;
};

struct DatasetManifest {
  static constexpr std::string_view kVersion = "authformer-dataset/1";

  std::string version{kVersion};
  std::size_t num_classes = 0;
  std::size_t samples_per_class = 0;
  std::uint64_t seed = 0;
  double noise_level = 0.0;
  double test_fraction = 0.25;
  std::vector<ModalityDescriptor> modalities;
  std::vector<std::size_t> labels;  // per sample id
  std::vector<SplitSide> split;     // per sample id

  nlohmann::json to_json() const;
  /// Validates tags, label range and split coverage.
  static DatasetManifest from_json(const nlohmann::json& j);
};

class Dataset {
 public:
  DatasetManifest manifest;
  std::map<Modality, std::vector<float>> values;

  std::size_t size() const { return manifest.labels.size(); }
  std::size_t label(std::size_t id) const { return manifest.labels.at(id); }
  std::vector<std::size_t> ids(SplitSide side) const;
  const ModalityDescriptor& descriptor(Modality tag) const;

  /// The requested modalities of sample `id` as model inputs.
  template <typename T>
  RawSample<T> sample(std::size_t id, const Combination& modalities) const;

  /// Raw per-sample values of one modality.
  std::span<const float> raw(Modality tag, std::size_t id) const;
};

struct SynthConfig {
  std::size_t num_classes = 8;
  std::size_t samples_per_class = 40;
  std::uint64_t seed = 42;
  double noise_level = 0.3;
  double test_fraction = 0.25;
  std::size_t image_size = 32;
  std::size_t sequence_length = 256;
};

/// Relative noise per modality: face 1.0, fingerprint 1.25, palmprint 1.5,
/// voice 2.0 (times noise_level).
double modality_noise_multiplier(Modality tag);

/// In-memory generation; deterministic per seed.
Dataset generate_synthetic(const SynthConfig& config);

void save_dataset(const Dataset& dataset, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Stratified per class; each class keeps at least one sample on each side.
SplitIndices split_dataset(std::span<const std::size_t> labels, std::size_t num_classes, double test_fraction,
                           std::uint64_t seed);

// ---------------------------------------------------------------------------
// Checkpoints

inline constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
struct Checkpoint {
  ModelConfig config;
  ParamStore<T> params;
};

template <typename T>
std::string encode_checkpoint(const ModelConfig& config, const ParamStore<T>& params);

/// Parameters are converted to T if the file stores the other width.
template <typename T>
Checkpoint<T> decode_checkpoint(std::string_view bytes, const std::string& context);

template <typename T>
void save_checkpoint(const AuthFormer<T>& model, const std::filesystem::path& path);

template <typename T>
AuthFormer<T> load_checkpoint(const std::filesystem::path& path);

}  // namespace authformer
