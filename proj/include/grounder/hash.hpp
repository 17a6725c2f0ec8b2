#pragma once

#include <cstdint>
#include <span>
#include <string_view>

namespace grounder {

// FNV-1a, 64-bit. The offset basis acts as the fixed seed; output is the
// same on every platform, which keeps hashed feature indices portable.
inline constexpr std::uint64_t kFnvOffsetBasis = 0xcbf29ce484222325ULL;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

constexpr std::uint64_t fnv1a64(std::string_view bytes,
                                std::uint64_t state = kFnvOffsetBasis) noexcept {
    for (unsigned char c : bytes) {
        state ^= c;
        state *= kFnvPrime;
    }
    return state;
}

inline std::uint64_t fnv1a64(std::span<const std::byte> bytes,
                             std::uint64_t state = kFnvOffsetBasis) noexcept {
    for (std::byte b : bytes) {
        state ^= static_cast<std::uint8_t>(b);
        state *= kFnvPrime;
    }
    return state;
}

}  // namespace grounder
