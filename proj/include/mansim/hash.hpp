#pragma once

#include <cstdint>

namespace mansim {

// splitmix64 finalizer. Used for content-derived block/batch ids and for the
// shared-seed coin. The exact mixing sequence is part of the wire-level
// contract: two processes must derive identical ids from identical fields.
inline constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline constexpr std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t v) {
    return mix64(seed ^ (v + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2)));
}

}  // namespace mansim
