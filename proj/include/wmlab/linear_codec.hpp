#pragma once

#include <cstdint>
#include <vector>

#include "wmlab/core.hpp"

namespace wmlab {

// Analytic spread-spectrum codec: n orthonormal image-shaped patterns, one
// per message bit, embedded additively with amplitude a. Round trips exactly
// whenever no pixel clamps, which the attack and certification oracles rely on.
struct LinearCodec {
    int width = 0;
    int height = 0;
    int channels = 1;
    int n = 0;
    double amplitude = 0.0;
    std::vector<double> patterns;  // n rows, each width*height*channels long

    size_t dim() const { return static_cast<size_t>(width) * height * channels; }
    const double* pattern(int i) const { return patterns.data() + i * dim(); }
};

// Orthonormalizes seeded Gaussian vectors; requires n <= pixel count. Row
// inner products match delta_ij to 1e-10.
LinearCodec make_linear_codec(int width, int height, int channels, int n,
                              double amplitude, uint64_t seed);

// w = x + a * sum_i (2 t_i - 1) P_i. Throws OracleViolation if any pixel
// would leave [0,1]: the oracle requires exact linearity.
Image linear_encode(const LinearCodec& lc, const Image& x, const BitMessage& t);

// bit_i = 1 iff <z, P_i> > 0 (ties resolve to 0).
BitMessage linear_decode(const LinearCodec& lc, const ResidualImage& z);

// The exact residual a * sum_i (2 t_i - 1) P_i the codec would embed.
ResidualImage linear_pattern_residual(const LinearCodec& lc, const BitMessage& t);

}  // namespace wmlab
