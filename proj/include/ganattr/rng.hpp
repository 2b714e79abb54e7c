#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace ganattr {

// Seeded generator with explicit, engine-level determinism: mt19937_64 output
// is pinned by the standard, and all distribution transforms are implemented
// here rather than with std:: distributions (whose sequences are
// implementation-defined).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    // Uniform in [0, 1) with 53 bits of precision.
    double u01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * u01(); }

    // Inclusive integer range.
    int uniform_int(int lo, int hi) {
        return lo + static_cast<int>(u01() * (static_cast<double>(hi) - lo + 1.0));
    }

    bool coin(double p = 0.5) { return u01() < p; }

    // Box-Muller with a cached spare draw.
    double normal();
    double normal(double mean, double stddev) { return mean + stddev * normal(); }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// Substream derivation: hashing a tag into the base seed gives every image,
// secondary module, and epoch its own independent stream, so parallel
// schedules cannot reorder randomness.
std::uint64_t derive_seed(std::uint64_t base, std::string_view tag);
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t n);

}  // namespace ganattr
