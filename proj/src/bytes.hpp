#pragma once

#include <cstddef>
#include <string>
#include <string_view>

#include "authformer/error.hpp"

namespace authformer::detail {

template <typename U>
void put_le(std::string& out, U value) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((value >> (8 * i)) & 0xFF));
}

template <typename U>
U get_le(std::string_view bytes, std::size_t& offset, const std::string& context, const char* field) {
  if (offset + sizeof(U) > bytes.size()) {
    throw FormatError(context + ": truncated while reading " + field);
  }
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    value |= static_cast<U>(static_cast<unsigned char>(bytes[offset + i])) << (8 * i);
  }
  offset += sizeof(U);
  return value;
}

}  // namespace authformer::detail
