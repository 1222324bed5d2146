#pragma once

// Deterministic random streams.
//
// Every random quantity in this codebase is a pure function of
// (master_seed, stream tag, replica index [, particle lineage]). Two layers:
//
//  * Replica streams: xoshiro256++ seeded through a SplitMix64 chain over the
//    master seed, an FNV-hashed tag string, and the replica index. Used by
//    plain sequential consumers (single walks).
//  * Particle streams (branching engines): counter-based. Each particle owns a
//    64-bit lineage key; a child's key depends only on the parent key and the
//    child rank, and each draw is mix64(key + slot * C). Particle randomness is
//    therefore independent of scheduling, sibling kills, and worker count.
//
// Scheme id "splitmix64-stream-v1" (recorded in run manifests).

#include <cstdint>
#include <string_view>

namespace brw {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

// SplitMix64 finalizer: a bijection on 64-bit ints with strong mixing.
inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

struct SplitMix64 {
    std::uint64_t s = 0;
    std::uint64_t next() { return mix64(s += kGolden); }
};

inline std::uint64_t fnv1a64(const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001B3ull;
    }
    return h;
}

inline std::uint64_t fnv1a64(std::string_view s) { return fnv1a64(s.data(), s.size()); }

// Replica stream seed: s0 = mix64(master + GOLDEN); s1 = mix64(s0 ^ fnv(tag));
// s2 = mix64(s1 + replica * GOLDEN).
inline std::uint64_t stream_seed(std::uint64_t master, std::string_view tag, std::uint64_t replica) {
    std::uint64_t s = mix64(master + kGolden);
    s = mix64(s ^ fnv1a64(tag));
    s = mix64(s + replica * kGolden);
    return s;
}

struct Xoshiro256pp {
    std::uint64_t s[4];

    explicit Xoshiro256pp(std::uint64_t seed) {
        SplitMix64 sm{seed};
        for (auto& x : s) x = sm.next();
    }

    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::uint64_t next() {
        const std::uint64_t result = rotl(s[0] + s[3], 23) + s[0];
        const std::uint64_t t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = rotl(s[3], 45);
        return result;
    }

    // Uniform in [0, 1), 53-bit mantissa.
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // Unbiased integer in [0, n) via Lemire's method with rejection.
    std::uint64_t below(std::uint64_t n) {
        for (;;) {
            std::uint64_t x = next();
            __uint128_t m = static_cast<__uint128_t>(x) * n;
            auto lo = static_cast<std::uint64_t>(m);
            if (lo >= n || lo >= (-n) % n) return static_cast<std::uint64_t>(m >> 64);
        }
    }
};

// ---- particle lineage keys (counter-based) ----

// Root key for a replica's particle tree.
inline std::uint64_t root_key(std::uint64_t replica_seed) {
    return mix64(replica_seed ^ 0xA0761D6478BD642Full);
}

// Key of the rank-th child (rank 0-based).
inline std::uint64_t child_key(std::uint64_t parent_key, std::uint64_t rank) {
    return mix64(parent_key + (rank + 1) * kGolden);
}

// Slot constants keep a particle's distinct draws decorrelated.
inline constexpr std::uint64_t kSlotOffspring = 0;
inline constexpr std::uint64_t kSlotStep = 1;
inline constexpr std::uint64_t kSlotCensus = 2; // seeds a nested particle tree

inline std::uint64_t key_draw(std::uint64_t key, std::uint64_t slot) {
    return mix64(key + slot * 0xD1B54A32D192ED03ull);
}

inline double key_uniform(std::uint64_t key, std::uint64_t slot) {
    return static_cast<double>(key_draw(key, slot) >> 11) * 0x1.0p-53;
}

} // namespace brw
