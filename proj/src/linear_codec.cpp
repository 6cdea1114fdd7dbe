#include "wmlab/linear_codec.hpp"

#include <cmath>

#include "wmlab/rng.hpp"

namespace wmlab {

LinearCodec make_linear_codec(int width, int height, int channels, int n,
                              double amplitude, uint64_t seed) {
    if (!(amplitude > 0.0))
        throw std::invalid_argument("linear codec amplitude must be > 0");
    LinearCodec lc;
    lc.width = width;
    lc.height = height;
    lc.channels = channels;
    lc.n = n;
    lc.amplitude = amplitude;
    const size_t d = lc.dim();
    if (n < 1 || static_cast<size_t>(n) > d)
        throw std::invalid_argument("linear codec needs 1 <= n <= pixel count");

    lc.patterns.resize(static_cast<size_t>(n) * d);
    Rng rng(seed);
    for (auto& v : lc.patterns) v = rng.normal();

    // Modified Gram-Schmidt, two passes for orthogonality well below 1e-10.
    for (int i = 0; i < n; ++i) {
        double* pi = lc.patterns.data() + static_cast<size_t>(i) * d;
        for (int pass = 0; pass < 2; ++pass) {
            for (int j = 0; j < i; ++j) {
                const double* pj = lc.patterns.data() + static_cast<size_t>(j) * d;
                double dot = 0.0;
                for (size_t k = 0; k < d; ++k) dot += pi[k] * pj[k];
                for (size_t k = 0; k < d; ++k) pi[k] -= dot * pj[k];
            }
        }
        double norm = 0.0;
        for (size_t k = 0; k < d; ++k) norm += pi[k] * pi[k];
        norm = std::sqrt(norm);
        if (norm < 1e-8)
            throw std::runtime_error("linear codec pattern collapsed during orthonormalization");
        for (size_t k = 0; k < d; ++k) pi[k] /= norm;
    }
    return lc;
}

namespace {

void check_shape(const LinearCodec& lc, int w, int h, int c, size_t len) {
    if (w != lc.width || h != lc.height || c != lc.channels)
        throw std::invalid_argument("linear codec: shape mismatch");
    if (len != 0 && static_cast<int>(len) != lc.n)
        throw std::invalid_argument("linear codec: message length mismatch");
}

}  // namespace

ResidualImage linear_pattern_residual(const LinearCodec& lc, const BitMessage& t) {
    if (static_cast<int>(t.size()) != lc.n)
        throw std::invalid_argument("linear codec: message length mismatch");
    ResidualImage z = ResidualImage::zeros(lc.width, lc.height, lc.channels);
    const size_t d = lc.dim();
    for (int i = 0; i < lc.n; ++i) {
        const double sgn = t.bits[i] ? 1.0 : -1.0;
        const double* p = lc.pattern(i);
        for (size_t k = 0; k < d; ++k) z.values[k] += lc.amplitude * sgn * p[k];
    }
    return z;
}

Image linear_encode(const LinearCodec& lc, const Image& x, const BitMessage& t) {
    check_shape(lc, x.width, x.height, x.channels, t.size());
    const ResidualImage z = linear_pattern_residual(lc, t);
    Image w = x;
    for (size_t k = 0; k < w.pixels.size(); ++k) {
        const double v = x.pixels[k] + z.values[k];
        if (v < 0.0 || v > 1.0)
            throw OracleViolation(
                "linear codec clamped a pixel; lower the amplitude or adjust the corpus");
        w.pixels[k] = v;
    }
    return w;
}

BitMessage linear_decode(const LinearCodec& lc, const ResidualImage& z) {
    check_shape(lc, z.width, z.height, z.channels, 0);
    std::vector<uint8_t> bits(lc.n);
    const size_t d = lc.dim();
    for (int i = 0; i < lc.n; ++i) {
        const double* p = lc.pattern(i);
        double dot = 0.0;
        for (size_t k = 0; k < d; ++k) dot += z.values[k] * p[k];
        bits[i] = dot > 0.0 ? 1 : 0;
    }
    return BitMessage(std::move(bits));
}

}  // namespace wmlab
