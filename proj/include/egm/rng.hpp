#pragma once

#include <cmath>
#include <cstdint>

namespace egm {

namespace detail {

// Finalizer of the splitmix64 generator. Bijective on 64-bit words.
inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace detail

// Deterministic 64-bit RNG (splitmix64). The standard <random> distributions
// are implementation-defined, so everything that must be bit-reproducible
// across platforms goes through this generator instead.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        return detail::mix64(state_);
    }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    std::uint64_t uniform_index(std::uint64_t n) { return n == 0 ? 0 : next_u64() % n; }

    // Standard normal via Box-Muller.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        // u1 in (0, 1] so the log is finite.
        double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    // Independent child stream; children with distinct keys do not overlap
    // in practice (keys are scrambled through the full 64-bit mixer).
    Rng child(std::uint64_t key) const {
        return Rng(detail::mix64(state_ ^ detail::mix64(key + 0x9e3779b97f4a7c15ULL)));
    }

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

// Order-independent seed derivation for parallel pair generation.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0) {
    std::uint64_t h = detail::mix64(master + 0x9e3779b97f4a7c15ULL);
    h = detail::mix64(h ^ detail::mix64(a + 0x9e3779b97f4a7c15ULL));
    h = detail::mix64(h ^ detail::mix64(b + 0x632be59bd9b4e019ULL));
    return h;
}

}  // namespace egm
