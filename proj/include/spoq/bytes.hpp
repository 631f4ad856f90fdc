#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace spoq {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

template <std::size_t N>
using ByteArray = std::array<std::uint8_t, N>;

using Hash32 = ByteArray<32>;

inline Bytes to_bytes(std::string_view s) {
    return Bytes(s.begin(), s.end());
}

inline Bytes to_bytes(ByteView v) {
    return Bytes(v.begin(), v.end());
}

template <std::size_t N>
ByteArray<N> to_array(ByteView v) {
    ByteArray<N> out{};
    if (v.size() != N)
        throw std::invalid_argument("to_array: bad length");
    std::memcpy(out.data(), v.data(), N);
    return out;
}

inline void append(Bytes& dst, ByteView src) {
    dst.insert(dst.end(), src.begin(), src.end());
}

inline Bytes concat(std::initializer_list<ByteView> parts) {
    Bytes out;
    for (auto p : parts)
        append(out, p);
    return out;
}

std::string hex_encode(ByteView data);
Bytes hex_decode(std::string_view hex);

// Lexicographic compare, used wherever byte strings are ordered (ring
// member sorting, map keys).
inline int byte_compare(ByteView a, ByteView b) {
    const std::size_t n = std::min(a.size(), b.size());
    if (n > 0) {
        int c = std::memcmp(a.data(), b.data(), n);
        if (c != 0)
            return c < 0 ? -1 : 1;
    }
    if (a.size() == b.size())
        return 0;
    return a.size() < b.size() ? -1 : 1;
}

} // namespace spoq
