#include "wmlab/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace wmlab {

Image Image::zeros(int width, int height, int channels) {
    Image img;
    img.width = width;
    img.height = height;
    img.channels = channels;
    img.pixels.assign(static_cast<size_t>(width) * height * channels, 0.0);
    return img;
}

Image Image::constant(int width, int height, int channels, double value) {
    Image img = zeros(width, height, channels);
    std::fill(img.pixels.begin(), img.pixels.end(), value);
    return img;
}

ResidualImage ResidualImage::zeros(int width, int height, int channels) {
    ResidualImage z;
    z.width = width;
    z.height = height;
    z.channels = channels;
    z.values.assign(static_cast<size_t>(width) * height * channels, 0.0);
    return z;
}

BitMessage BitMessage::from_string(const std::string& s) {
    std::vector<uint8_t> bits;
    bits.reserve(s.size());
    for (char c : s) {
        if (c == '0') {
            bits.push_back(0);
        } else if (c == '1') {
            bits.push_back(1);
        } else {
            throw std::invalid_argument("bit string may contain only 0 and 1");
        }
    }
    if (bits.empty()) throw std::invalid_argument("empty bit string");
    return BitMessage(std::move(bits));
}

BitMessage BitMessage::random(size_t n, Rng& rng) {
    std::vector<uint8_t> bits(n);
    for (auto& b : bits) b = static_cast<uint8_t>(rng.bit());
    return BitMessage(std::move(bits));
}

std::string BitMessage::to_string() const {
    std::string s;
    s.reserve(bits.size());
    for (uint8_t b : bits) s.push_back(b ? '1' : '0');
    return s;
}

void check_image(const Image& img) {
    if (img.width < 8 || img.height < 8)
        throw std::invalid_argument("image sides must be at least 8 pixels");
    if (img.channels != 1 && img.channels != 3)
        throw std::invalid_argument("image must have 1 or 3 channels");
    if (img.pixels.size() !=
        static_cast<size_t>(img.width) * img.height * img.channels)
        throw std::invalid_argument("pixel count does not match shape");
    for (double v : img.pixels) {
        if (!std::isfinite(v) || v < 0.0 || v > 1.0)
            throw std::invalid_argument("pixel values must be finite in [0,1]");
    }
}

double bit_accuracy(const BitMessage& a, const BitMessage& b) {
    if (a.size() == 0 || a.size() != b.size())
        throw std::invalid_argument("bit_accuracy requires equal nonzero lengths");
    size_t matches = 0;
    for (size_t i = 0; i < a.size(); ++i)
        if (a.bits[i] == b.bits[i]) ++matches;
    return static_cast<double>(matches) / static_cast<double>(a.size());
}

VerificationResult verify(const BitMessage& decoded, const BitMessage& expected,
                          double tau) {
    if (!(tau > 0.5) || !(tau <= 1.0))
        throw std::invalid_argument("verification threshold must lie in (0.5, 1]");
    VerificationResult r;
    r.bit_accuracy = bit_accuracy(decoded, expected);
    r.threshold = tau;
    r.pass = r.bit_accuracy >= tau ? 1 : 0;
    return r;
}

ThresholdResult compute_threshold(int n, double target_fpr) {
    if (n < 1) throw std::invalid_argument("message length must be >= 1");
    if (!(target_fpr > 0.0) || !(target_fpr < 1.0))
        throw std::invalid_argument("target FPR must lie in (0,1)");

    // Exact Binomial(n, 1/2) upper tail, accumulated from j = n downward:
    // pmf(j-1) = pmf(j) * j / (n - j + 1).
    const long double fpr = static_cast<long double>(target_fpr);
    long double pmf = std::exp2l(static_cast<long double>(-n));
    long double tail = pmf;  // P[X >= n]
    if (tail > fpr)
        throw InfeasibleThreshold("no count k <= n meets the FPR budget");
    int k = n;
    for (int j = n; j >= 1; --j) {
        long double next_pmf = pmf * j / (n - j + 1);
        long double next_tail = tail + next_pmf;  // P[X >= j-1]
        if (next_tail > fpr) break;
        pmf = next_pmf;
        tail = next_tail;
        k = j - 1;
    }
    ThresholdResult r;
    r.k = k;
    r.n = n;
    r.tau = static_cast<double>(k) / static_cast<double>(n);
    return r;
}

double psnr(const Image& a, const Image& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("psnr: shape mismatch");
    if (a.size() == 0) throw std::invalid_argument("psnr: empty image");
    double sq = 0.0;
    for (size_t i = 0; i < a.pixels.size(); ++i) {
        const double d = a.pixels[i] - b.pixels[i];
        sq += d * d;
    }
    const double mse = sq / static_cast<double>(a.pixels.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

namespace {

// 11x11 Gaussian window, sigma 1.5, normalized to unit sum.
const std::vector<double>& ssim_window() {
    static const std::vector<double> win = [] {
        std::vector<double> w(11 * 11);
        double sum = 0.0;
        for (int y = 0; y < 11; ++y) {
            for (int x = 0; x < 11; ++x) {
                const double dy = y - 5.0;
                const double dx = x - 5.0;
                const double v = std::exp(-(dx * dx + dy * dy) / (2.0 * 1.5 * 1.5));
                w[y * 11 + x] = v;
                sum += v;
            }
        }
        for (auto& v : w) v /= sum;
        return w;
    }();
    return win;
}

}  // namespace

double ssim(const Image& a, const Image& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("ssim: shape mismatch");
    if (a.width < 11 || a.height < 11)
        throw std::invalid_argument("ssim: image smaller than the 11x11 window");

    constexpr double kC1 = 0.01 * 0.01;  // (K1*L)^2, L = 1
    constexpr double kC2 = 0.03 * 0.03;  // (K2*L)^2
    const auto& win = ssim_window();

    double total = 0.0;
    size_t count = 0;
    for (int c = 0; c < a.channels; ++c) {
        for (int cy = 5; cy < a.height - 5; ++cy) {
            for (int cx = 5; cx < a.width - 5; ++cx) {
                double mu_a = 0.0, mu_b = 0.0;
                double aa = 0.0, bb = 0.0, ab = 0.0;
                for (int wy = 0; wy < 11; ++wy) {
                    for (int wx = 0; wx < 11; ++wx) {
                        const double wgt = win[wy * 11 + wx];
                        const double va = a.at(cy + wy - 5, cx + wx - 5, c);
                        const double vb = b.at(cy + wy - 5, cx + wx - 5, c);
                        mu_a += wgt * va;
                        mu_b += wgt * vb;
                        aa += wgt * va * va;
                        bb += wgt * vb * vb;
                        ab += wgt * va * vb;
                    }
                }
                const double var_a = aa - mu_a * mu_a;
                const double var_b = bb - mu_b * mu_b;
                const double cov = ab - mu_a * mu_b;
                const double num = (2.0 * mu_a * mu_b + kC1) * (2.0 * cov + kC2);
                const double den =
                    (mu_a * mu_a + mu_b * mu_b + kC1) * (var_a + var_b + kC2);
                total += num / den;
                ++count;
            }
        }
    }
    return total / static_cast<double>(count);
}

double pearson_r(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size() || xs.size() < 2)
        throw std::invalid_argument("pearson_r requires equal lengths >= 2");
    const double n = static_cast<double>(xs.size());
    double mx = 0.0, my = 0.0;
    for (size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (size_t i = 0; i < xs.size(); ++i) {
        const double dx = xs[i] - mx;
        const double dy = ys[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0)
        throw UndefinedCorrelation("pearson_r undefined for a constant sequence");
    return sxy / std::sqrt(sxx * syy);
}

ResidualImage residual(const Image& w, const Image& x) {
    if (!w.same_shape(x)) throw std::invalid_argument("residual: shape mismatch");
    ResidualImage z;
    z.width = w.width;
    z.height = w.height;
    z.channels = w.channels;
    z.values.resize(w.pixels.size());
    for (size_t i = 0; i < w.pixels.size(); ++i)
        z.values[i] = w.pixels[i] - x.pixels[i];
    return z;
}

Image overlay(const Image& x, const ResidualImage& z, double zeta) {
    if (!z.same_shape(x)) throw std::invalid_argument("overlay: shape mismatch");
    if (!(zeta > 0.0)) throw std::invalid_argument("overlay: zeta must be > 0");
    Image out = x;
    for (size_t i = 0; i < out.pixels.size(); ++i)
        out.pixels[i] = clamp01(x.pixels[i] + zeta * z.values[i]);
    return out;
}

}  // namespace wmlab
