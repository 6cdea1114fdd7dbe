#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "wmlab/codec.hpp"
#include "wmlab/core.hpp"
#include "wmlab/linear_codec.hpp"
#include "wmlab/rng.hpp"

using namespace wmlab;

namespace {

CodecConfig small_config() {
    CodecConfig cfg;
    cfg.n = 8;
    cfg.channels = 1;
    cfg.side = 16;
    cfg.filters = 6;
    cfg.strength = 0.05;
    cfg.seed = 123;
    return cfg;
}

Image smooth_image(int side, uint64_t seed, double lo = 0.1, double hi = 0.9) {
    Rng rng(seed);
    Image img = Image::zeros(side, side, 1);
    for (auto& v : img.pixels) v = rng.uniform(lo, hi);
    return img;
}

}  // namespace

TEST_CASE("init_codec determinism and initialization contract") {
    const CodecConfig cfg = small_config();
    CodecParams a = init_codec(cfg, 7);
    CodecParams b = init_codec(cfg, 7);
    auto va = tensor_views(a), vb = tensor_views(b);
    REQUIRE(va.size() == vb.size());
    for (size_t i = 0; i < va.size(); ++i)
        for (size_t j = 0; j < va[i].size; ++j)
            CHECK(va[i].data[j] == vb[i].data[j]);

    CodecParams c = init_codec(cfg, 8);
    auto vc = tensor_views(c);
    bool any_diff = false;
    for (size_t i = 0; i < va.size() && !any_diff; ++i)
        for (size_t j = 0; j < va[i].size; ++j)
            if (va[i].data[j] != vc[i].data[j]) {
                any_diff = true;
                break;
            }
    CHECK(any_diff);

    for (float v : a.enc1.b) CHECK(v == 0.0f);
    for (float v : a.dec2.b) CHECK(v == 0.0f);
    for (float v : a.head.b) CHECK(v == 0.0f);

    // Fan-scaled uniform bound for the first encoder conv.
    const double bound = std::sqrt(6.0 / ((cfg.channels + cfg.n) * 9.0 +
                                          cfg.filters * 9.0));
    for (float v : a.enc1.w) {
        CHECK(v <= bound);
        CHECK(v >= -bound);
    }
}

TEST_CASE("encode bounds and determinism") {
    const CodecConfig cfg = small_config();
    const CodecParams params = init_codec(cfg);
    const Image x = smooth_image(cfg.side, 5, 0.0, 1.0);
    Rng rng(6);
    const BitMessage t = BitMessage::random(cfg.n, rng);

    const Image w1 = encode(params, x, t);
    const Image w2 = encode(params, x, t);
    CHECK(w1.pixels == w2.pixels);

    double max_delta = 0.0;
    for (size_t i = 0; i < x.pixels.size(); ++i) {
        CHECK(w1.pixels[i] >= 0.0);
        CHECK(w1.pixels[i] <= 1.0);
        max_delta = std::max(max_delta, std::fabs(w1.pixels[i] - x.pixels[i]));
    }
    CHECK(max_delta <= cfg.strength + 1e-12);

    BitMessage wrong_len = t;
    wrong_len.bits.push_back(1);
    CHECK_THROWS_AS(encode(params, x, wrong_len), std::invalid_argument);
    CHECK_THROWS_AS(encode(params, Image::zeros(8, 8, 1), t),
                    std::invalid_argument);
}

TEST_CASE("decode_probs contract") {
    const CodecConfig cfg = small_config();
    const CodecParams params = init_codec(cfg);
    const Image img = smooth_image(cfg.side, 9);

    const BitProbabilities probs = decode_probs(params, img);
    CHECK(probs.size() == static_cast<size_t>(cfg.n));
    for (double p : probs.p) {
        CHECK(p >= kProbClamp);
        CHECK(p <= 1.0 - kProbClamp);
    }

    // Residual decoding shifts by +0.5: an all-zero residual decodes like a
    // mid-gray image.
    const ResidualImage zero = ResidualImage::zeros(cfg.side, cfg.side, 1);
    const BitProbabilities via_res = decode_probs(params, zero);
    const Image gray = Image::constant(cfg.side, cfg.side, 1, 0.5);
    const BitProbabilities via_img = decode_probs(params, gray);
    for (int i = 0; i < cfg.n; ++i)
        CHECK(via_res.p[i] == doctest::Approx(via_img.p[i]).epsilon(1e-12));
}

TEST_CASE("decode_bits tie rule") {
    BitProbabilities probs;
    probs.p = {0.9, 0.1, 0.5, 0.500001, 0.499999};
    const BitMessage bits = decode_bits(probs);
    CHECK(bits.to_string() == "10010");
}

TEST_CASE("linear codec round trip and residual law") {
    const int side = 16, n = 12;
    const LinearCodec lc = make_linear_codec(side, side, 1, n, 0.01, 42);

    // Orthonormality within 1e-10.
    for (int i = 0; i < n; ++i) {
        for (int j = i; j < n; ++j) {
            double dot = 0.0;
            for (size_t k = 0; k < lc.dim(); ++k)
                dot += lc.pattern(i)[k] * lc.pattern(j)[k];
            CHECK(std::fabs(dot - (i == j ? 1.0 : 0.0)) < 1e-10);
        }
    }

    Rng rng(43);
    const Image x = Image::constant(side, side, 1, 0.5);
    for (int trial = 0; trial < 20; ++trial) {
        const BitMessage t = BitMessage::random(n, rng);
        const Image w = linear_encode(lc, x, t);
        const ResidualImage z = residual(w, x);
        CHECK(linear_decode(lc, z) == t);

        // Parseval: the residual norm is amplitude * sqrt(n).
        double norm = 0.0;
        for (double v : z.values) norm += v * v;
        CHECK(std::sqrt(norm) ==
              doctest::Approx(lc.amplitude * std::sqrt(n)).epsilon(1e-10));

        // Complement secrets give exactly negated residuals.
        BitMessage comp = t;
        for (auto& b : comp.bits) b ^= 1;
        const ResidualImage zc = residual(linear_encode(lc, x, comp), x);
        for (size_t k = 0; k < z.values.size(); ++k)
            CHECK(zc.values[k] == doctest::Approx(-z.values[k]).epsilon(1e-12));
    }

    // Distance law: ||z_t - z_t'||^2 = 4 a^2 hamming(t, t').
    for (int trial = 0; trial < 20; ++trial) {
        const BitMessage t1 = BitMessage::random(n, rng);
        const BitMessage t2 = BitMessage::random(n, rng);
        const ResidualImage z1 = linear_pattern_residual(lc, t1);
        const ResidualImage z2 = linear_pattern_residual(lc, t2);
        int hamming = 0;
        for (int i = 0; i < n; ++i)
            if (t1.bits[i] != t2.bits[i]) ++hamming;
        double d2 = 0.0;
        for (size_t k = 0; k < z1.values.size(); ++k) {
            const double d = z1.values[k] - z2.values[k];
            d2 += d * d;
        }
        CHECK(d2 == doctest::Approx(4.0 * lc.amplitude * lc.amplitude * hamming)
                        .epsilon(1e-8));
    }

    // Zero residual decodes to all zeros under the tie rule.
    const ResidualImage zero = ResidualImage::zeros(side, side, 1);
    CHECK(linear_decode(lc, zero).to_string() == std::string(n, '0'));
}

TEST_CASE("linear codec rejects clamping and survives bounded noise") {
    const int side = 16, n = 8;
    const LinearCodec big = make_linear_codec(side, side, 1, n, 0.5, 1);
    const Image near_edge = Image::constant(side, side, 1, 0.02);
    Rng rng(2);
    CHECK_THROWS_AS(linear_encode(big, near_edge, BitMessage::random(n, rng)),
                    OracleViolation);

    // Noise below the per-pattern margin never flips a decoded bit.
    const LinearCodec lc = make_linear_codec(side, side, 1, n, 0.02, 3);
    const Image x = Image::constant(side, side, 1, 0.5);
    for (int trial = 0; trial < 10; ++trial) {
        const BitMessage t = BitMessage::random(n, rng);
        ResidualImage z = residual(linear_encode(lc, x, t), x);
        // Add noise with projection coefficients strictly below the amplitude.
        for (int i = 0; i < n; ++i) {
            const double coef = rng.uniform(-0.9, 0.9) * lc.amplitude;
            for (size_t k = 0; k < z.values.size(); ++k)
                z.values[k] += coef * lc.pattern(i)[k];
        }
        CHECK(linear_decode(lc, z) == t);
    }
}
