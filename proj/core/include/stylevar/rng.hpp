#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace stylevar::rng {

/// Deterministic, portable random source used for seeded fixtures and toy
/// weights. std::mt19937_64 is fully specified by the standard, and the
/// double mapping below uses the top 53 bits directly, so the same seed
/// yields bit-identical values on every conforming implementation.
class PortableRng {
public:
    explicit PortableRng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1).
    double unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform in [-1, 1).
    double symmetric() { return 2.0 * unit() - 1.0; }

private:
    std::mt19937_64 engine_;
};

/// FNV-1a 64-bit hash. Used for deterministic per-run seeds, mock image
/// references and file fingerprints; not cryptographic.
constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ull;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ull;

constexpr std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t state = kFnvOffset) {
    for (unsigned char c : bytes) {
        state ^= c;
        state *= kFnvPrime;
    }
    return state;
}

/// Feeds an integer into the hash as 8 little-endian bytes.
constexpr std::uint64_t fnv1a64_u64(std::uint64_t value, std::uint64_t state = kFnvOffset) {
    for (int i = 0; i < 8; ++i) {
        state ^= static_cast<unsigned char>(value >> (8 * i));
        state *= kFnvPrime;
    }
    return state;
}

}  // namespace stylevar::rng
