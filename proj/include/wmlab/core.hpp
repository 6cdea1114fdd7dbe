#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "wmlab/rng.hpp"

namespace wmlab {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// compute_threshold cannot satisfy the false-positive budget for any k <= n.
class InfeasibleThreshold : public Error {
public:
    using Error::Error;
};

// The analytic linear codec clamped a pixel; its tests require exact linearity.
class OracleViolation : public Error {
public:
    using Error::Error;
};

class TrainingDiverged : public Error {
public:
    using Error::Error;
};

class CorruptModel : public Error {
public:
    using Error::Error;
};

// pearson_r on a constant sequence.
class UndefinedCorrelation : public Error {
public:
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

// Real-valued pixel grid, values in [0,1], row-major and channel-interleaved:
// pixel (y, x, c) lives at ((y*width + x)*channels + c). Watermarked images
// use the same representation.
struct Image {
    int width = 0;
    int height = 0;
    int channels = 1;
    std::vector<double> pixels;

    static Image zeros(int width, int height, int channels = 1);
    static Image constant(int width, int height, int channels, double value);

    double& at(int y, int x, int c = 0) {
        return pixels[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    double at(int y, int x, int c = 0) const {
        return pixels[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    size_t size() const { return pixels.size(); }
    bool same_shape(const Image& o) const {
        return width == o.width && height == o.height && channels == o.channels;
    }
};

// Difference w - x. Same shape as the originating pair, values in [-1,1],
// kept at full double precision (attacks operate on residuals arithmetically).
struct ResidualImage {
    int width = 0;
    int height = 0;
    int channels = 1;
    std::vector<double> values;

    static ResidualImage zeros(int width, int height, int channels = 1);

    double& at(int y, int x, int c = 0) {
        return values[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    double at(int y, int x, int c = 0) const {
        return values[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    size_t size() const { return values.size(); }
    bool same_shape(const ResidualImage& o) const {
        return width == o.width && height == o.height && channels == o.channels;
    }
    bool same_shape(const Image& o) const {
        return width == o.width && height == o.height && channels == o.channels;
    }
};

// n-bit secret message, elements in {0,1}.
struct BitMessage {
    std::vector<uint8_t> bits;

    BitMessage() = default;
    explicit BitMessage(std::vector<uint8_t> b) : bits(std::move(b)) {}

    size_t size() const { return bits.size(); }
    bool operator==(const BitMessage& o) const { return bits == o.bits; }

    static BitMessage from_string(const std::string& s);
    static BitMessage random(size_t n, Rng& rng);
    std::string to_string() const;
};

struct VerificationResult {
    double bit_accuracy = 0.0;
    int pass = 0;
    double threshold = 0.0;
};

// Smallest count k (and tau = k/n) meeting a false-positive budget under the
// Binomial(n, 1/2) null.
struct ThresholdResult {
    int k = 0;
    int n = 0;
    double tau = 0.0;
};

// Throws std::invalid_argument unless shape, range and finiteness invariants
// hold (width/height >= 8, channels 1 or 3, pixels finite in [0,1]).
void check_image(const Image& img);

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

// Fraction of matching positions between two equal-length messages.
double bit_accuracy(const BitMessage& a, const BitMessage& b);

// pass = 1 iff bit_accuracy(decoded, expected) >= tau; tau must be in (0.5, 1].
VerificationResult verify(const BitMessage& decoded, const BitMessage& expected,
                          double tau);

// Smallest k with P[Binomial(n, 1/2) >= k] <= target_fpr, from the exact
// binomial tail. Throws InfeasibleThreshold when even k = n misses the budget.
ThresholdResult compute_threshold(int n, double target_fpr);

// 10*log10(1/MSE) with peak 1.0; identical images return +infinity.
double psnr(const Image& a, const Image& b);

// Mean local SSIM: 11x11 Gaussian window (sigma 1.5), K1=0.01, K2=0.03,
// dynamic range 1.0, valid-window positions only, averaged over channels.
double ssim(const Image& a, const Image& b);

double pearson_r(const std::vector<double>& xs, const std::vector<double>& ys);

ResidualImage residual(const Image& w, const Image& x);

// clamp(x + zeta*z, 0, 1)
Image overlay(const Image& x, const ResidualImage& z, double zeta);

inline double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

}  // namespace wmlab
