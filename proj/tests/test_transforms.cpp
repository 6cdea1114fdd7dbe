#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "wmlab/core.hpp"
#include "wmlab/rng.hpp"
#include "wmlab/transforms.hpp"

using namespace wmlab;

namespace {

Image ramp_x(int side) {
    Image img = Image::zeros(side, side, 1);
    for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x)
            img.at(y, x) = 0.1 + 0.8 * x / (side - 1.0);
    return img;
}

}  // namespace

TEST_CASE("gaussian pixel noise: degenerate, deterministic, moments") {
    Image img = Image::constant(16, 16, 1, 0.5);

    Rng r0(4);
    const Image same = apply_gaussian_pixel(img, 0.0, r0);
    for (size_t i = 0; i < img.pixels.size(); ++i)
        CHECK(same.pixels[i] == img.pixels[i]);

    Rng r1(5), r2(5);
    const Image a = apply_gaussian_pixel(img, 0.1, r1);
    const Image b = apply_gaussian_pixel(img, 0.1, r2);
    CHECK(a.pixels == b.pixels);

    // Moment check: 1e5 draws of one pixel, sigma small enough not to clamp.
    const double sigma = 0.05;
    Rng r3(6);
    const int draws = 100000;
    double sum = 0.0, sq = 0.0;
    Image one = Image::constant(8, 8, 1, 0.5);
    for (int i = 0; i < draws; ++i) {
        const Image noisy = apply_gaussian_pixel(one, sigma, r3);
        const double d = noisy.pixels[0] - 0.5;
        sum += d;
        sq += d * d;
    }
    const double mean = sum / draws;
    const double var = sq / draws - mean * mean;
    // Variance of the sample variance of a normal: 2 sigma^4 / n.
    const double se_var = std::sqrt(2.0 / draws) * sigma * sigma;
    CHECK(std::fabs(var - sigma * sigma) < 3.0 * se_var);
    CHECK(std::fabs(mean) < 3.0 * sigma / std::sqrt(static_cast<double>(draws)));
}

TEST_CASE("sample_affine moments and independence") {
    Rng rz(1);
    const AffineParams zero = sample_affine(0.0, rz);
    for (double b : zero.beta) CHECK(b == 0.0);

    const double sigma = 0.02;
    const int draws = 100000;
    Rng rng(2);
    std::vector<std::vector<double>> comp(6, std::vector<double>(draws));
    for (int i = 0; i < draws; ++i) {
        const AffineParams p = sample_affine(sigma, rng);
        for (int k = 0; k < 6; ++k) comp[k][i] = p.beta[k];
    }
    const double se_var = std::sqrt(2.0 / draws) * sigma * sigma;
    for (int k = 0; k < 6; ++k) {
        double sum = 0.0, sq = 0.0;
        for (double v : comp[k]) {
            sum += v;
            sq += v * v;
        }
        const double mean = sum / draws;
        const double var = sq / draws - mean * mean;
        CHECK(std::fabs(var - sigma * sigma) < 3.0 * se_var);
    }
    for (int k = 0; k < 6; ++k)
        for (int j = k + 1; j < 6; ++j)
            CHECK(std::fabs(pearson_r(comp[k], comp[j])) < 0.02);
}

TEST_CASE("apply_affine identity is exact") {
    Rng rng(3);
    Image img = Image::zeros(16, 16, 3);
    for (auto& v : img.pixels) v = rng.uniform();
    const Image out = apply_affine(img, AffineParams{});
    CHECK(out.pixels == img.pixels);
}

TEST_CASE("apply_affine constant invariance and range preservation") {
    const Image c = Image::constant(12, 12, 1, 0.37);
    Rng rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        const AffineParams beta = sample_affine(0.05, rng);
        const Image out = apply_affine(c, beta);
        for (double v : out.pixels) CHECK(v == doctest::Approx(0.37).epsilon(1e-15));
    }

    Image img = Image::zeros(12, 12, 1);
    for (auto& v : img.pixels) v = rng.uniform();
    for (int trial = 0; trial < 20; ++trial) {
        const AffineParams beta = sample_affine(0.1, rng);
        const Image out = apply_affine(img, beta);
        for (double v : out.pixels) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }
}

TEST_CASE("apply_affine pure translation shifts a ramp exactly") {
    const int side = 32;
    const Image img = ramp_x(side);
    // One-pixel shift in normalized units: delta = 2/(side-1).
    AffineParams beta;
    beta.beta[2] = 2.0 / (side - 1);
    const Image out = apply_affine(img, beta);
    // Interior pixels read from x+1 exactly.
    for (int y = 0; y < side; ++y)
        for (int x = 0; x < side - 1; ++x)
            CHECK(out.at(y, x) == doctest::Approx(img.at(y, x + 1)).epsilon(1e-12));

    // Fractional translation on a linear ramp is exact under bilinear.
    AffineParams frac;
    frac.beta[2] = 0.7 * 2.0 / (side - 1);
    const Image out_frac = apply_affine(img, frac);
    for (int y = 0; y < side; ++y)
        for (int x = 1; x < side - 2; ++x) {
            const double expected = 0.3 * img.at(y, x) + 0.7 * img.at(y, x + 1);
            CHECK(out_frac.at(y, x) == doctest::Approx(expected).epsilon(1e-12));
        }
}

TEST_CASE("translation composition on interior ramp pixels") {
    const int side = 24;
    const Image img = ramp_x(side);
    AffineParams t1, t2, sum;
    t1.beta[2] = 0.4 * 2.0 / (side - 1);
    t2.beta[2] = 0.9 * 2.0 / (side - 1);
    sum.beta[2] = 1.3 * 2.0 / (side - 1);
    const Image two_step = apply_affine(apply_affine(img, t1), t2);
    const Image one_step = apply_affine(img, sum);
    for (int y = 0; y < side; ++y)
        for (int x = 2; x < side - 3; ++x)
            CHECK(two_step.at(y, x) ==
                  doctest::Approx(one_step.at(y, x)).epsilon(1e-6));
}

TEST_CASE("affine_norm") {
    CHECK(affine_norm(AffineParams{}) == 0.0);
    AffineParams p;
    p.beta = {0.03, 0, 0, 0, 0.04, 0};
    CHECK(affine_norm(p) == doctest::Approx(0.05).epsilon(1e-15));

    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        const AffineParams q = sample_affine(0.3, rng);
        double sq = 0.0;
        for (double b : q.beta) sq += b * b;
        CHECK(std::fabs(affine_norm(q) - std::sqrt(sq)) < 1e-12);
    }
}

TEST_CASE("perturb family semantics") {
    Rng rng(6);
    Image img = Image::zeros(16, 16, 1);
    for (auto& v : img.pixels) v = rng.uniform();

    // Degenerate families are the identity.
    Rng r1(7);
    const Image same = perturb(PerturbationFamily::gaussian_pixel(0.0), img, r1);
    CHECK(same.pixels == img.pixels);

    Rng r2(8);
    auto both_zero = PerturbationFamily::mixture(
        {{PerturbationFamily::gaussian_pixel(0.0), 0.5},
         {PerturbationFamily::affine(0.0), 0.5}});
    const Image still = perturb(both_zero, img, r2);
    CHECK(still.pixels == img.pixels);

    // A single-branch mixture behaves like the branch.
    auto single = PerturbationFamily::mixture(
        {{PerturbationFamily::gaussian_pixel(0.1), 3.0}});
    Rng r3(9), r4(9);
    const Image via_mixture = perturb(single, img, r3);
    // The mixture draws one uniform to select the branch first.
    r4.uniform();
    const Image direct =
        perturb(PerturbationFamily::gaussian_pixel(0.1), img, r4);
    CHECK(via_mixture.pixels == direct.pixels);

    CHECK_THROWS_AS(PerturbationFamily::mixture({}), std::invalid_argument);
    CHECK_THROWS_AS(PerturbationFamily::mixture(
                        {{PerturbationFamily::affine(0.1), -1.0}}),
                    std::invalid_argument);
}

TEST_CASE("perturb_backprop matches finite differences through the warp") {
    const int side = 10;
    Rng rng(10);
    Image img = Image::zeros(side, side, 1);
    for (auto& v : img.pixels) v = rng.uniform(0.2, 0.8);

    PerturbRecord record;
    record.kind = PerturbRecord::Kind::Affine;
    record.beta = sample_affine(0.05, rng);

    // Loss: weighted sum of output pixels with fixed random weights.
    std::vector<double> loss_w(img.pixels.size());
    for (auto& v : loss_w) v = rng.uniform(-1.0, 1.0);
    const auto loss = [&](const Image& input) {
        const Image out = apply_affine(input, record.beta);
        double acc = 0.0;
        for (size_t i = 0; i < out.pixels.size(); ++i)
            acc += loss_w[i] * out.pixels[i];
        return acc;
    };

    const std::vector<double> grad =
        perturb_backprop(record, loss_w, side, side, 1);
    const double h = 1e-6;
    for (size_t i = 0; i < img.pixels.size(); i += 7) {
        Image plus = img, minus = img;
        plus.pixels[i] += h;
        minus.pixels[i] -= h;
        const double fd = (loss(plus) - loss(minus)) / (2.0 * h);
        CHECK(grad[i] == doctest::Approx(fd).epsilon(1e-5));
    }
}

TEST_CASE("gaussian blur: smoothing and replicate padding") {
    const Image c = Image::constant(16, 16, 1, 0.42);
    const Image blurred = gaussian_blur(c, 9, 2.0);
    for (double v : blurred.pixels) CHECK(v == doctest::Approx(0.42).epsilon(1e-12));

    Rng rng(11);
    Image noise = Image::zeros(16, 16, 1);
    for (auto& v : noise.pixels) v = rng.uniform();
    const Image smooth = gaussian_blur(noise, 9, 2.0);
    const auto grad_energy = [](const Image& img) {
        double acc = 0.0;
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x + 1 < img.width; ++x) {
                const double d = img.at(y, x + 1) - img.at(y, x);
                acc += d * d;
            }
        return acc;
    };
    CHECK(grad_energy(smooth) < grad_energy(noise));
    CHECK_THROWS_AS(gaussian_blur(noise, 4, 1.0), std::invalid_argument);
}
