#pragma once

#include <cstdint>
#include <initializer_list>

namespace csisim {

// Deterministic counter-free PRNG (splitmix64). The simulator derives one
// child stream per logical task (receiver, frame, batch element, ...) so
// results do not depend on evaluation order or thread count.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller, one cached spare.
    double normal();

    // Uniform integer in [0, n).
    std::uint64_t uniform_index(std::uint64_t n) { return next_u64() % n; }

    // Derived stream that is independent of draws made on this one.
    Rng child(std::uint64_t tag) const;
    Rng child(std::initializer_list<std::uint64_t> tags) const;

  private:
    std::uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// Stable combination of a seed with a stream tag.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag);

} // namespace csisim
