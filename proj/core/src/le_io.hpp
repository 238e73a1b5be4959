#pragma once

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>

#include "gwe/error.hpp"

namespace gwe::detail {

template <typename T>
void put_le(std::ostream& out, T value) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                               std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint8_t>>;
  static_assert(sizeof(T) == sizeof(U));
  const U bits = std::bit_cast<U>(value);
  char bytes[sizeof(U)];
  for (std::size_t b = 0; b < sizeof(U); ++b) bytes[b] = static_cast<char>((bits >> (8 * b)) & 0xffU);
  out.write(bytes, sizeof bytes);
}

template <typename T>
T get_le(std::istream& in, const char* what) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
                               std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint8_t>>;
  unsigned char bytes[sizeof(U)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof bytes)) throw data_error(std::string(what) + " truncated");
  U bits = 0;
  for (std::size_t b = 0; b < sizeof(U); ++b) bits |= static_cast<U>(static_cast<U>(bytes[b]) << (8 * b));
  return std::bit_cast<T>(bits);
}

}  // namespace gwe::detail
