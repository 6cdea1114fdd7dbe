#pragma once

#include <array>
#include <optional>
#include <utility>
#include <vector>

#include "wmlab/core.hpp"
#include "wmlab/rng.hpp"

namespace wmlab {

// Six displacement coefficients about the identity map, in normalized
// coordinates: the source position for output (i,j) is
// (i + b1*i + b2*j + b3, j + b4*i + b5*j + b6) with i the x axis and j the
// y axis, both normalized to [-1,1].
struct AffineParams {
    std::array<double, 6> beta{};
};

struct GaussianPixelSpec {
    double sigma = 0.0;
};

struct AffineSpec {
    double sigma = 0.0;  // beta ~ N(0, sigma^2 I_6)
};

// Tagged union over the supported perturbation kinds. A mixture samples one
// branch by weight per application.
struct PerturbationFamily {
    enum class Kind { GaussianPixel, Affine, Mixture };

    Kind kind = Kind::GaussianPixel;
    double sigma = 0.0;
    std::vector<std::pair<PerturbationFamily, double>> branches;

    static PerturbationFamily gaussian_pixel(double sigma);
    static PerturbationFamily affine(double sigma);
    // Throws on an empty list or non-positive weights; weights are normalized.
    static PerturbationFamily mixture(
        std::vector<std::pair<PerturbationFamily, double>> branches);
};

// Per-pixel independent N(0, sigma^2) noise, clamped to [0,1] afterwards.
Image apply_gaussian_pixel(const Image& img, double sigma, Rng& rng);

AffineParams sample_affine(double sigma, Rng& rng);

// Inverse warp with bilinear interpolation; out-of-range samples clamp to the
// nearest edge texel. beta = 0 reproduces the input exactly.
Image apply_affine(const Image& img, const AffineParams& beta);

// sqrt(sum beta_k^2)
double affine_norm(const AffineParams& beta);

Image perturb(const PerturbationFamily& family, const Image& img, Rng& rng);

// What a recorded perturbation actually did, so training can run the exact
// adjoint of the forward draw.
struct PerturbRecord {
    enum class Kind { Identity, GaussianPixel, Affine };
    Kind kind = Kind::Identity;
    std::vector<uint8_t> pass_mask;  // gaussian: 1 where the clamp was inactive
    AffineParams beta;               // affine
};

Image perturb_recorded(const PerturbationFamily& family, const Image& img,
                       Rng& rng, PerturbRecord* record);

// Adjoint of the recorded perturbation: maps a gradient w.r.t. the perturbed
// image back to a gradient w.r.t. the input image.
std::vector<double> perturb_backprop(const PerturbRecord& record,
                                     const std::vector<double>& grad_out,
                                     int width, int height, int channels);

// Separable Gaussian blur with replicate padding; ksize must be odd.
Image gaussian_blur(const Image& img, int ksize, double sigma);

}  // namespace wmlab
