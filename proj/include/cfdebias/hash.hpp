#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace cfdebias {

inline constexpr std::uint64_t kFnv1aOffset = 1469598103934665603ull;

/// 64-bit FNV-1a, continuing from `h`.
inline std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = kFnv1aOffset) noexcept
{
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = kFnv1aOffset) noexcept
{
    return fnv1a(s.data(), s.size(), h);
}

} // namespace cfdebias
