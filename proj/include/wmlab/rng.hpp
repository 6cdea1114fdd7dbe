#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace wmlab {

// Deterministic PRNG (xoshiro256++). Self-contained so that streams are
// reproducible across standard library versions and platforms.
class Rng {
public:
    explicit Rng(uint64_t seed);

    uint64_t next_u64();

    // Uniform in [0,1), 53-bit resolution.
    double uniform();
    double uniform(double lo, double hi);

    // Unbiased integer in [0,n), n >= 1.
    uint64_t below(uint64_t n);

    // Standard normal via Box-Muller; one pair per two calls.
    double normal();
    double normal(double sigma) { return sigma * normal(); }

    int bit() { return static_cast<int>(next_u64() >> 63); }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    uint64_t state_[4];
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// Derives a per-stage seed from a root seed, a textual stage tag and an
// index. Stages draw from disjoint streams: derive_seed(root, "certify", i)
// never collides with derive_seed(root, "train", j) in practice because the
// tag is hashed into the state before the index is mixed in.
uint64_t derive_seed(uint64_t root, std::string_view tag, uint64_t index = 0);

}  // namespace wmlab
