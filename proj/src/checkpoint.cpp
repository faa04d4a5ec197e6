#include <string>

#include "authformer/data_io.hpp"
#include "authformer/error.hpp"
#include "bytes.hpp"

namespace authformer {
namespace {

constexpr std::string_view kCheckpointMagic = "AFCK";

}  // namespace

template <typename T>
std::string encode_checkpoint(const ModelConfig& config, const ParamStore<T>& params) {
  std::string out;
  out.append(kCheckpointMagic);
  detail::put_le<std::uint32_t>(out, kCheckpointVersion);
  const std::string config_text = nlohmann::json(config).dump();
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(config_text.size()));
  out.append(config_text);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, tensor] : params.entries()) {
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.append(name);
    append_blob(out, tensor.shape(), tensor.data());
  }
  detail::put_le<std::uint32_t>(out, crc32(out));
  return out;
}

template <typename T>
Checkpoint<T> decode_checkpoint(std::string_view bytes, const std::string& context) {
  if (bytes.size() < kCheckpointMagic.size() || bytes.substr(0, kCheckpointMagic.size()) != kCheckpointMagic) {
    throw FormatError(context + ": not a checkpoint (bad magic)");
  }
  if (bytes.size() < kCheckpointMagic.size() + 8) throw FormatError(context + ": truncated checkpoint");
  std::size_t tail = bytes.size() - 4;
  const auto stored_crc = detail::get_le<std::uint32_t>(bytes, tail, context, "checksum");
  if (stored_crc != crc32(bytes.substr(0, bytes.size() - 4))) {
    throw ChecksumError(context + ": checksum mismatch, file is corrupted");
  }
  const auto body = bytes.substr(0, bytes.size() - 4);
  std::size_t offset = kCheckpointMagic.size();
  const auto version = detail::get_le<std::uint32_t>(body, offset, context, "version");
  if (version != kCheckpointVersion) {
    throw UnsupportedVersionError(context + ": unsupported checkpoint version " + std::to_string(version) +
                                  " (this build reads version " + std::to_string(kCheckpointVersion) + ")");
  }
  const auto config_len = detail::get_le<std::uint32_t>(body, offset, context, "config length");
  if (offset + config_len > body.size()) throw FormatError(context + ": truncated config");
  Checkpoint<T> ckpt;
  try {
    ckpt.config = nlohmann::json::parse(body.substr(offset, config_len)).get<ModelConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(context + ": invalid config: " + e.what());
  }
  offset += config_len;
  const auto count = detail::get_le<std::uint32_t>(body, offset, context, "entry count");
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = detail::get_le<std::uint32_t>(body, offset, context, "name length");
    if (offset + name_len > body.size()) throw FormatError(context + ": truncated entry name");
    std::string name(body.substr(offset, name_len));
    offset += name_len;
    auto blob = decode_blob(body, offset, context + " [" + name + "]");
    std::vector<T> values(blob.values.begin(), blob.values.end());
    ckpt.params.add(std::move(name), Tensor<T>(std::move(blob.shape), std::move(values)));
  }
  if (offset != body.size()) throw FormatError(context + ": trailing bytes after last entry");
  return ckpt;
}

template <typename T>
void save_checkpoint(const AuthFormer<T>& model, const std::filesystem::path& path) {
  write_file_atomic(path, encode_checkpoint(model.config(), model.params()));
}

template <typename T>
AuthFormer<T> load_checkpoint(const std::filesystem::path& path) {
  auto ckpt = decode_checkpoint<T>(read_file(path), path.string());
  AuthFormer<T> model(ckpt.config, 0);
  model.load_params(ckpt.params);
  return model;
}

template std::string encode_checkpoint(const ModelConfig&, const ParamStore<float>&);
template std::string encode_checkpoint(const ModelConfig&, const ParamStore<double>&);
template Checkpoint<float> decode_checkpoint(std::string_view, const std::string&);
template Checkpoint<double> decode_checkpoint(std::string_view, const std::string&);
template void save_checkpoint(const AuthFormer<float>&, const std::filesystem::path&);
template void save_checkpoint(const AuthFormer<double>&, const std::filesystem::path&);
template AuthFormer<float> load_checkpoint(const std::filesystem::path&);
template AuthFormer<double> load_checkpoint(const std::filesystem::path&);

}  // namespace authformer
