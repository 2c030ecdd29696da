#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace occ {

/// splitmix64 finalizer. Used to derive independent seeds from a base seed
/// plus structural keys (component id, epoch, record index, ...) so that
/// every seeded stream is reproducible and order-independent.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> keys) {
    std::uint64_t s = mix64(base);
    for (std::uint64_t k : keys) s = mix64(s ^ mix64(k));
    return s;
}

inline std::mt19937_64 keyed_rng(std::uint64_t base, std::initializer_list<std::uint64_t> keys) {
    return std::mt19937_64(derive_seed(base, keys));
}

inline double uniform01(std::mt19937_64& rng) {
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

/// Uniform integer in [0, n). n must be > 0.
inline std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

}  // namespace occ
