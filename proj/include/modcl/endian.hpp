#pragma once

#include <algorithm>
#include <array>
#include <bit>

namespace modcl {

/// Byte-swaps on big-endian hosts; identity elsewhere. Self-inverse.
template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
}

}  // namespace modcl
