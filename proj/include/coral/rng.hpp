#ifndef CORAL_RNG_HPP
#define CORAL_RNG_HPP

#include <cstdint>
#include <random>

namespace coral {

// Seed-stream derivation.
//
// A single master seed fans out into independent per-purpose, per-index
// streams (problem data, state init, per-agent compressors, per-agent channel
// noise).  The split rule is documented here and frozen: changing e.g. the
// compressor stream must never perturb the problem data stream.
//
//   stream_seed = mix(mix(mix(master) ^ purpose_tag) ^ index)
//
// where mix() is the splitmix64 finalizer.  splitmix64 is a bijection on
// 64-bit integers with good avalanche behaviour, so distinct
// (master, purpose, index) triples give well-separated seeds.

enum class StreamPurpose : std::uint64_t {
    data = 0x9a3f51d2c4b80e71ull,
    init = 0x7c15ebd1a9643f05ull,
    compressor = 0xd64e8a2b5f13c997ull,
    noise = 0x3b9c6d4ae7f021b3ull,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, StreamPurpose purpose,
                                 std::uint64_t index = 0) {
    std::uint64_t s = splitmix64(master);
    s = splitmix64(s ^ static_cast<std::uint64_t>(purpose));
    s = splitmix64(s ^ index);
    return s;
}

inline std::mt19937_64 make_stream(std::uint64_t master, StreamPurpose purpose,
                                   std::uint64_t index = 0) {
    return std::mt19937_64(derive_seed(master, purpose, index));
}

}  // namespace coral

#endif  // CORAL_RNG_HPP
