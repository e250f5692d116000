#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "warpres/errors.hpp"

// Little-endian primitives shared by the direction, .flo and checkpoint formats.
namespace warpres::bin {

static_assert(std::endian::native == std::endian::little, "big-endian hosts are not supported");

template <typename T>
void write(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read(std::istream& in, const char* what) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (in.gcount() != static_cast<std::streamsize>(sizeof(T)))
        throw FormatError(std::string("truncated file while reading ") + what);
    return v;
}

inline void read_bytes(std::istream& in, void* dst, std::size_t n, const char* what) {
    in.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (in.gcount() != static_cast<std::streamsize>(n))
        throw FormatError(std::string("truncated file while reading ") + what);
}

} // namespace warpres::bin
