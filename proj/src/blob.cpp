#include <zlib.h>

#include <bit>
#include <fstream>
#include <iterator>

#include "authformer/data_io.hpp"
#include "authformer/error.hpp"
#include "bytes.hpp"

namespace authformer {
namespace {

using detail::get_le;
using detail::put_le;

constexpr std::string_view kBlobMagic = "ATF1";

template <typename F, typename Bits>
void append_blob_impl(std::string& out, ElementType type, const Shape& shape, std::span<const F> values) {
  if (shape_numel(shape) != values.size()) {
    throw ShapeError("blob shape " + shape_str(shape) + " does not match " + std::to_string(values.size()) +
                     " values");
  }
  out.append(kBlobMagic);
  out.push_back(static_cast<char>(type));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(shape.size()));
  for (auto d : shape) put_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
  out.reserve(out.size() + values.size() * sizeof(F));
  for (F v : values) put_le<Bits>(out, std::bit_cast<Bits>(v));
}

}  // namespace

void append_blob(std::string& out, const Shape& shape, std::span<const float> values) {
  append_blob_impl<float, std::uint32_t>(out, ElementType::F32, shape, values);
}

void append_blob(std::string& out, const Shape& shape, std::span<const double> values) {
  append_blob_impl<double, std::uint64_t>(out, ElementType::F64, shape, values);
}

BlobData decode_blob(std::string_view bytes, std::size_t& offset, const std::string& context) {
  if (offset + kBlobMagic.size() > bytes.size() || bytes.substr(offset, kBlobMagic.size()) != kBlobMagic) {
    throw FormatError(context + ": bad magic (expected ATF1)");
  }
  offset += kBlobMagic.size();
  BlobData blob;
  const auto code = get_le<std::uint8_t>(bytes, offset, context, "element type");
  if (code > 1) throw FormatError(context + ": unknown element type code " + std::to_string(code));
  blob.type = static_cast<ElementType>(code);
  const auto rank = get_le<std::uint32_t>(bytes, offset, context, "rank");
  if (rank > 16) throw FormatError(context + ": implausible rank " + std::to_string(rank));
  std::size_t count = 1;
  for (std::uint32_t i = 0; i < rank; ++i) {
    const auto d = get_le<std::uint32_t>(bytes, offset, context, "dims");
    if (d == 0) throw FormatError(context + ": zero-length dimension");
    blob.shape.push_back(d);
    count *= d;
  }
  const std::size_t width = blob.type == ElementType::F32 ? 4 : 8;
  if (bytes.size() - offset < count * width) {
    throw FormatError(context + ": truncated payload (need " + std::to_string(count * width) + " bytes, have " +
                      std::to_string(bytes.size() - offset) + ")");
  }
  blob.values.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (blob.type == ElementType::F32) {
      blob.values[i] = std::bit_cast<float>(get_le<std::uint32_t>(bytes, offset, context, "payload"));
    } else {
      blob.values[i] = std::bit_cast<double>(get_le<std::uint64_t>(bytes, offset, context, "payload"));
    }
  }
  return blob;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::uint32_t crc32(std::string_view bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  crc = ::crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(crc);
}

}  // namespace authformer
