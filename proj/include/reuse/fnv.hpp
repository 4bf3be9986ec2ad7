#pragma once

// 32-bit FNV-1a over raw bytes; project names are hashed as their UTF-8
// byte sequence.

#include <cstdint>
#include <string_view>

namespace reuse {

constexpr std::uint32_t kFnv1a32OffsetBasis = 0x811c9dc5u;
constexpr std::uint32_t kFnv1a32Prime = 16777619u;

constexpr std::uint32_t fnv1a32(std::string_view bytes) {
  std::uint32_t h = kFnv1a32OffsetBasis;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= kFnv1a32Prime;
  }
  return h;
}

}  // namespace reuse
