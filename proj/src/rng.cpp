#include "csisim/rng.hpp"

#include <cmath>

namespace csisim {

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    // Box-Muller; u1 > 0 guaranteed by the 2^-53 offset below.
    double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    double u2 = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
    // One splitmix step over the combined word decorrelates consecutive tags.
    std::uint64_t z = seed ^ (0x9E3779B97F4A7C15ULL + (tag << 1));
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

Rng Rng::child(std::uint64_t tag) const { return Rng(derive_seed(state_, tag)); }

Rng Rng::child(std::initializer_list<std::uint64_t> tags) const {
    std::uint64_t s = state_;
    for (std::uint64_t t : tags) s = derive_seed(s, t);
    return Rng(s);
}

} // namespace csisim
