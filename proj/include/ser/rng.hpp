#pragma once

#include <cstdint>
#include <string_view>

namespace ser {

// Counter-style splittable generator (splitmix64 core). Streams are derived
// by name so that every random draw is a pure function of
// (seed, site label, step indices): reordering unrelated work cannot change
// dropout masks or init draws.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    // Independent stream keyed by a label and up to two step indices.
    Rng derive(std::string_view label, std::uint64_t a = 0, std::uint64_t b = 0) const {
        std::uint64_t h = 1469598103934665603ULL;  // FNV-1a offset basis
        auto mix = [&h](std::uint64_t v) {
            for (int i = 0; i < 8; ++i) {
                h ^= (v >> (8 * i)) & 0xffULL;
                h *= 1099511628211ULL;
            }
        };
        mix(state_);
        for (char c : label) {
            h ^= static_cast<unsigned char>(c);
            h *= 1099511628211ULL;
        }
        mix(a);
        mix(b);
        return Rng(h);
    }

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    bool bernoulli(double p) { return next_double() < p; }

    // Uniform integer in [0, n), n > 0. Multiply-shift; deterministic everywhere.
    std::uint64_t bounded(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

  private:
    std::uint64_t state_;
};

}  // namespace ser
