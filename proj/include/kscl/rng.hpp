#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace kscl {

// All randomness in the project flows from one root seed through named
// sub-streams. A stream key is derived by absorbing the seed, a tag and any
// integer qualifiers into a splitmix-style hash; the keyed stream then drives
// a mt19937_64. Identical keys give identical draw sequences regardless of
// the order streams are created in, so parallel or reordered data loading
// cannot change the sample sequence.

uint64_t mix64(uint64_t x);

class StreamKey {
public:
    explicit StreamKey(uint64_t seed) : state_(mix64(seed ^ 0x9e3779b97f4a7c15ull)) {}

    StreamKey with(uint64_t v) const {
        StreamKey k = *this;
        k.state_ = mix64(k.state_ ^ mix64(v));
        return k;
    }

    StreamKey with(std::string_view tag) const;

    uint64_t value() const { return state_; }

private:
    uint64_t state_;
};

class Rng {
public:
    explicit Rng(StreamKey key) : engine_(key.value()) {}
    explicit Rng(uint64_t raw_key) : engine_(raw_key) {}

    uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1), 53-bit resolution. The transforms below are written
    // out by hand (instead of std::*_distribution) because engine output is
    // pinned by the standard but distribution algorithms are not; this keeps
    // byte-identical reruns a portable guarantee.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller; the sine half of the pair is discarded
    // so every call consumes exactly two engine outputs.
    double normal();

    // Uniform integer in [0, n), rejection-sampled to avoid modulo bias.
    uint64_t below(uint64_t n);

private:
    std::mt19937_64 engine_;
};

inline Rng make_stream(StreamKey key) { return Rng(key); }

} // namespace kscl
