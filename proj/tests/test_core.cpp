#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "wmlab/core.hpp"
#include "wmlab/rng.hpp"

using namespace wmlab;

namespace {

Image ramp_image(int side, int channels = 1) {
    Image img = Image::zeros(side, side, channels);
    for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x)
            for (int c = 0; c < channels; ++c)
                img.at(y, x, c) =
                    static_cast<double>(y * side + x) / (side * side - 1);
    return img;
}

Image random_image(int side, Rng& rng, double lo = 0.0, double hi = 1.0) {
    Image img = Image::zeros(side, side, 1);
    for (auto& v : img.pixels) v = rng.uniform(lo, hi);
    return img;
}

// Exact binomial upper tail oracle: integer enumeration via Pascal's triangle.
// Numerators of P[Binomial(n,1/2) >= k] in units of 2^-n; exact for n <= 126.
long double exact_tail(int n, int k) {
    std::vector<__int128> row(n + 1, 0);
    row[0] = 1;
    for (int i = 1; i <= n; ++i)
        for (int j = i; j >= 1; --j) row[j] += row[j - 1];
    __int128 num = 0;
    for (int j = k; j <= n; ++j) num += row[j];
    return static_cast<long double>(num) / std::exp2l(static_cast<long double>(n));
}

}  // namespace

TEST_CASE("bit_accuracy fixtures") {
    CHECK(bit_accuracy(BitMessage::from_string("1100"),
                       BitMessage::from_string("1100")) == doctest::Approx(1.0));
    CHECK(bit_accuracy(BitMessage::from_string("1100"),
                       BitMessage::from_string("0011")) == doctest::Approx(0.0));
    CHECK(bit_accuracy(BitMessage::from_string("1100"),
                       BitMessage::from_string("1000")) == doctest::Approx(0.75));
    CHECK_THROWS_AS(bit_accuracy(BitMessage::from_string("1100"),
                                 BitMessage::from_string("110")),
                    std::invalid_argument);
}

TEST_CASE("verify threshold rule") {
    const BitMessage t = BitMessage::from_string("10110010");
    CHECK(verify(t, t, 0.9).pass == 1);

    // 7 of 8 bits match: accuracy 0.875 passes at tau exactly 0.875.
    BitMessage nearly = t;
    nearly.bits[0] ^= 1;
    CHECK(verify(nearly, t, 0.875).pass == 1);
    CHECK(verify(nearly, t, 0.876).pass == 0);

    BitMessage half = t;
    for (int i = 0; i < 4; ++i) half.bits[i] ^= 1;
    CHECK(verify(half, t, 0.875).pass == 0);

    CHECK_THROWS_AS(verify(t, t, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(verify(t, t, 1.5), std::invalid_argument);
}

TEST_CASE("verify pass-monotonicity") {
    Rng rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 4 + static_cast<int>(rng.below(13));
        const BitMessage t = BitMessage::random(n, rng);
        BitMessage a = BitMessage::random(n, rng);
        BitMessage b = BitMessage::random(n, rng);
        if (bit_accuracy(a, t) < bit_accuracy(b, t)) std::swap(a, b);
        const double tau = rng.uniform(0.51, 1.0);
        if (verify(b, t, tau).pass == 1) CHECK(verify(a, t, tau).pass == 1);
    }
}

TEST_CASE("compute_threshold fixtures") {
    const ThresholdResult r = compute_threshold(16, 0.01);
    CHECK(r.k == 14);
    CHECK(r.tau == doctest::Approx(0.875));

    const ThresholdResult one = compute_threshold(1, 0.6);
    CHECK(one.k == 1);
    CHECK(one.tau == doctest::Approx(1.0));

    CHECK_THROWS_AS(compute_threshold(3, 0.05), InfeasibleThreshold);
    CHECK_THROWS_AS(compute_threshold(0, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(compute_threshold(8, 0.0), std::invalid_argument);
}

TEST_CASE("compute_threshold matches the exact enumeration oracle") {
    // n = 100 at a tight budget, verified against integer enumeration.
    const ThresholdResult r = compute_threshold(100, 1e-4);
    CHECK(exact_tail(100, r.k) <= 1e-4L);
    CHECK(exact_tail(100, r.k - 1) > 1e-4L);

    // Full sweep for n <= 24 over several budgets.
    for (int n = 1; n <= 24; ++n) {
        for (double fpr : {0.3, 0.1, 0.01, 1e-3}) {
            if (std::exp2l(-static_cast<long double>(n)) > fpr) {
                CHECK_THROWS_AS(compute_threshold(n, fpr), InfeasibleThreshold);
                continue;
            }
            const ThresholdResult t = compute_threshold(n, fpr);
            CHECK(exact_tail(n, t.k) <= static_cast<long double>(fpr));
            if (t.k > 0) CHECK(exact_tail(n, t.k - 1) > static_cast<long double>(fpr));
        }
    }
}

TEST_CASE("compute_threshold monotone in the budget") {
    double last_tau = 0.0;
    for (double fpr : {0.2, 0.1, 0.05, 0.01, 1e-3, 1e-4}) {
        const ThresholdResult r = compute_threshold(64, fpr);
        CHECK(r.tau >= last_tau);
        last_tau = r.tau;
    }
}

TEST_CASE("psnr fixtures") {
    Rng rng(11);
    Image a = random_image(16, rng, 0.1, 0.8);
    CHECK(std::isinf(psnr(a, a)));

    Image b = a;
    for (auto& v : b.pixels) v += 0.1;
    CHECK(psnr(a, b) == doctest::Approx(20.0).epsilon(1e-12));

    Image c = a;
    for (auto& v : c.pixels) v += 0.01;
    CHECK(psnr(a, c) == doctest::Approx(40.0).epsilon(1e-12));

    CHECK(psnr(a, b) == doctest::Approx(psnr(b, a)));
    CHECK(psnr(a, b) < psnr(a, c));

    Image d = Image::zeros(8, 9, 1);
    CHECK_THROWS_AS(psnr(a, d), std::invalid_argument);
}

TEST_CASE("ssim identity and constant closed form") {
    Rng rng(13);
    const Image a = random_image(16, rng);
    CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));

    // Constant images: variance terms vanish, only the luminance term remains.
    const double va = 0.3, vb = 0.8;
    const Image ca = Image::constant(16, 16, 1, va);
    const Image cb = Image::constant(16, 16, 1, vb);
    const double c1 = 0.01 * 0.01;
    const double expected = (2.0 * va * vb + c1) / (va * va + vb * vb + c1);
    CHECK(ssim(ca, cb) == doctest::Approx(expected).epsilon(1e-12));

    CHECK_THROWS_AS(ssim(Image::zeros(10, 10, 1), Image::zeros(10, 10, 1)),
                    std::invalid_argument);
}

TEST_CASE("ssim contrast-inversion regression value") {
    // High-contrast blocks vs their negative; frozen reference value.
    Image a = Image::zeros(16, 16, 1);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) a.at(y, x) = ((x / 4 + y / 4) % 2) ? 0.95 : 0.05;
    Image inv = a;
    for (auto& v : inv.pixels) v = 1.0 - v;
    const double value = ssim(a, inv);
    CHECK(value < 0.5);
    CHECK(value == doctest::Approx(-0.8930207422).epsilon(1e-8));
}

TEST_CASE("pearson_r basics and affine invariance") {
    const std::vector<double> s = {0.2, 1.5, -0.3, 4.0, 2.2};
    std::vector<double> neg = s;
    for (auto& v : neg) v = -v;
    CHECK(pearson_r(s, s) == doctest::Approx(1.0));
    CHECK(pearson_r(s, neg) == doctest::Approx(-1.0));
    CHECK(pearson_r({1, 2, 3}, {2, 4, 6}) == doctest::Approx(1.0));
    CHECK_THROWS_AS(pearson_r({1, 1, 1}, {1, 2, 3}), UndefinedCorrelation);

    Rng rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> xs(12), ys(12);
        for (auto& v : xs) v = rng.normal();
        for (auto& v : ys) v = rng.normal();
        const double base = pearson_r(xs, ys);
        const double alpha = rng.uniform(0.1, 5.0);
        const double beta = rng.uniform(-3.0, 3.0);
        std::vector<double> scaled = xs;
        for (auto& v : scaled) v = alpha * v + beta;
        CHECK(std::fabs(pearson_r(scaled, ys) - base) < 1e-12);
    }
}

TEST_CASE("residual and overlay round trip") {
    Rng rng(19);
    const Image x = random_image(12, rng, 0.2, 0.7);
    Image w = x;
    for (auto& v : w.pixels) v = clamp01(v + 0.05);

    const ResidualImage z = residual(w, x);
    for (size_t i = 0; i < z.values.size(); ++i)
        CHECK(z.values[i] == doctest::Approx(w.pixels[i] - x.pixels[i]));

    const Image back = overlay(x, z, 1.0);
    for (size_t i = 0; i < back.pixels.size(); ++i)
        CHECK(back.pixels[i] == doctest::Approx(w.pixels[i]).epsilon(1e-15));

    const ResidualImage zero = residual(x, x);
    const Image same = overlay(x, zero, 2.0);
    for (size_t i = 0; i < same.pixels.size(); ++i)
        CHECK(same.pixels[i] == x.pixels[i]);

    // Saturation.
    Image black = Image::zeros(12, 12, 1);
    ResidualImage big = ResidualImage::zeros(12, 12, 1);
    for (auto& v : big.values) v = 0.6;
    const Image sat = overlay(black, big, 2.0);
    for (double v : sat.pixels) CHECK(v == 1.0);

    CHECK_THROWS_AS(overlay(x, z, 0.0), std::invalid_argument);
}

TEST_CASE("image invariant checks") {
    Image ok = Image::constant(8, 8, 1, 0.5);
    CHECK_NOTHROW(check_image(ok));

    Image small = Image::constant(7, 8, 1, 0.5);
    CHECK_THROWS_AS(check_image(small), std::invalid_argument);

    Image bad = ok;
    bad.pixels[3] = 1.5;
    CHECK_THROWS_AS(check_image(bad), std::invalid_argument);

    Image nan_img = ok;
    nan_img.pixels[0] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(check_image(nan_img), std::invalid_argument);
}

TEST_CASE("rng determinism and seed derivation") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

    CHECK(derive_seed(1, "stage", 0) != derive_seed(1, "stage", 1));
    CHECK(derive_seed(1, "stage") != derive_seed(2, "stage"));
    CHECK(derive_seed(1, "a") != derive_seed(1, "b"));
    CHECK(derive_seed(9, "x", 5) == derive_seed(9, "x", 5));
}
