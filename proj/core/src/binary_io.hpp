#pragma once

// Little-endian stream helpers shared by the episode dump and checkpoints.

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>

#include "tbs/error.hpp"

namespace tbs::detail {

template <typename U>
void put_le(std::ostream& os, U v) {
    char buf[sizeof(U)];
    for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    os.write(buf, sizeof(U));
}

inline void put_f32(std::ostream& os, float v) { put_le(os, std::bit_cast<std::uint32_t>(v)); }

template <typename U, typename Err = IoError>
U get_le(std::istream& is, const char* what) {
    unsigned char buf[sizeof(U)];
    if (!is.read(reinterpret_cast<char*>(buf), sizeof(U))) throw Err(std::string("truncated input reading ") + what);
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(buf[i]) << (8 * i);
    return v;
}

template <typename Err = IoError>
float get_f32(std::istream& is, const char* what) {
    return std::bit_cast<float>(get_le<std::uint32_t, Err>(is, what));
}

}  // namespace tbs::detail
