#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace dualseq::rng {

// FNV-1a over the tag, mixed with the run seed. Every consumer of randomness
// (generation, init, shuffling, dropout) derives its own named stream from the
// single run seed, so adding a consumer never perturbs the others.
inline std::uint64_t stream_seed(std::uint64_t seed, std::string_view tag) {
    std::uint64_t h = 1469598103934665603ull;
    for (char c : tag) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ull;
    }
    h ^= seed + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    return h;
}

inline std::mt19937_64 substream(std::uint64_t seed, std::string_view tag) {
    return std::mt19937_64(stream_seed(seed, tag));
}

// Indexed variant for per-patient / per-fold streams.
inline std::mt19937_64 substream(std::uint64_t seed, std::string_view tag, std::uint64_t index) {
    return std::mt19937_64(stream_seed(seed, tag) ^ (0x9e3779b97f4a7c15ull * (index + 1)));
}

}  // namespace dualseq::rng
