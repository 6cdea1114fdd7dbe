#include "wmlab/transforms.hpp"

#include <algorithm>
#include <cmath>

namespace wmlab {

PerturbationFamily PerturbationFamily::gaussian_pixel(double sigma) {
    if (sigma < 0.0) throw std::invalid_argument("noise sigma must be >= 0");
    PerturbationFamily f;
    f.kind = Kind::GaussianPixel;
    f.sigma = sigma;
    return f;
}

PerturbationFamily PerturbationFamily::affine(double sigma) {
    if (sigma < 0.0) throw std::invalid_argument("noise sigma must be >= 0");
    PerturbationFamily f;
    f.kind = Kind::Affine;
    f.sigma = sigma;
    return f;
}

PerturbationFamily PerturbationFamily::mixture(
    std::vector<std::pair<PerturbationFamily, double>> branches) {
    if (branches.empty())
        throw std::invalid_argument("mixture requires at least one branch");
    double sum = 0.0;
    for (const auto& [family, weight] : branches) {
        (void)family;
        if (!(weight > 0.0))
            throw std::invalid_argument("mixture weights must be positive");
        sum += weight;
    }
    for (auto& [family, weight] : branches) weight /= sum;
    PerturbationFamily f;
    f.kind = Kind::Mixture;
    f.branches = std::move(branches);
    return f;
}

Image apply_gaussian_pixel(const Image& img, double sigma, Rng& rng) {
    if (sigma < 0.0) throw std::invalid_argument("noise sigma must be >= 0");
    Image out = img;
    for (auto& v : out.pixels) v = clamp01(v + rng.normal(sigma));
    return out;
}

AffineParams sample_affine(double sigma, Rng& rng) {
    if (sigma < 0.0) throw std::invalid_argument("noise sigma must be >= 0");
    AffineParams p;
    for (auto& b : p.beta) b = rng.normal(sigma);
    return p;
}

double affine_norm(const AffineParams& p) {
    double s = 0.0;
    for (double b : p.beta) s += b * b;
    return std::sqrt(s);
}

namespace {

struct BilinearTap {
    int y0, y1, x0, x1;
    double fy, fx;
};

// Source tap for output pixel (r, c) under the displacement map. Written so
// that beta = 0 yields fy = fx = 0 and the exact source pixel.
BilinearTap source_tap(const AffineParams& p, int r, int c, int width,
                       int height) {
    const double xn = width > 1 ? 2.0 * c / (width - 1) - 1.0 : 0.0;
    const double yn = height > 1 ? 2.0 * r / (height - 1) - 1.0 : 0.0;
    const auto& b = p.beta;
    const double dx = b[0] * xn + b[1] * yn + b[2];
    const double dy = b[3] * xn + b[4] * yn + b[5];
    const double col = c + dx * (width - 1) * 0.5;
    const double row = r + dy * (height - 1) * 0.5;

    BilinearTap t;
    const double fc = std::floor(col);
    const double fr = std::floor(row);
    t.fx = col - fc;
    t.fy = row - fr;
    const auto clampi = [](double v, int hi) {
        if (v < 0.0) return 0;
        if (v > hi) return hi;
        return static_cast<int>(v);
    };
    t.x0 = clampi(fc, width - 1);
    t.x1 = clampi(fc + 1.0, width - 1);
    t.y0 = clampi(fr, height - 1);
    t.y1 = clampi(fr + 1.0, height - 1);
    return t;
}

}  // namespace

Image apply_affine(const Image& img, const AffineParams& p) {
    for (double b : p.beta)
        if (!std::isfinite(b))
            throw std::invalid_argument("affine coefficients must be finite");
    Image out = img;
    const int C = img.channels;
    for (int r = 0; r < img.height; ++r) {
        for (int c = 0; c < img.width; ++c) {
            const BilinearTap t = source_tap(p, r, c, img.width, img.height);
            for (int ch = 0; ch < C; ++ch) {
                const double v00 = img.at(t.y0, t.x0, ch);
                const double v01 = img.at(t.y0, t.x1, ch);
                const double v10 = img.at(t.y1, t.x0, ch);
                const double v11 = img.at(t.y1, t.x1, ch);
                out.at(r, c, ch) = (1.0 - t.fy) * ((1.0 - t.fx) * v00 + t.fx * v01) +
                                   t.fy * ((1.0 - t.fx) * v10 + t.fx * v11);
            }
        }
    }
    return out;
}

Image perturb_recorded(const PerturbationFamily& family, const Image& img,
                       Rng& rng, PerturbRecord* record) {
    switch (family.kind) {
        case PerturbationFamily::Kind::GaussianPixel: {
            Image out = img;
            if (record) {
                record->kind = PerturbRecord::Kind::GaussianPixel;
                record->pass_mask.assign(img.pixels.size(), 1);
            }
            for (size_t i = 0; i < out.pixels.size(); ++i) {
                const double v = out.pixels[i] + rng.normal(family.sigma);
                if (v < 0.0 || v > 1.0) {
                    out.pixels[i] = v < 0.0 ? 0.0 : 1.0;
                    if (record) record->pass_mask[i] = 0;
                } else {
                    out.pixels[i] = v;
                }
            }
            return out;
        }
        case PerturbationFamily::Kind::Affine: {
            const AffineParams beta = sample_affine(family.sigma, rng);
            if (record) {
                record->kind = PerturbRecord::Kind::Affine;
                record->beta = beta;
            }
            return apply_affine(img, beta);
        }
        case PerturbationFamily::Kind::Mixture: {
            const double u = rng.uniform();
            double acc = 0.0;
            for (const auto& [branch, weight] : family.branches) {
                acc += weight;
                if (u < acc) return perturb_recorded(branch, img, rng, record);
            }
            return perturb_recorded(family.branches.back().first, img, rng,
                                    record);
        }
    }
    throw std::logic_error("unreachable perturbation kind");
}

Image perturb(const PerturbationFamily& family, const Image& img, Rng& rng) {
    return perturb_recorded(family, img, rng, nullptr);
}

std::vector<double> perturb_backprop(const PerturbRecord& record,
                                     const std::vector<double>& grad_out,
                                     int width, int height, int channels) {
    switch (record.kind) {
        case PerturbRecord::Kind::Identity:
            return grad_out;
        case PerturbRecord::Kind::GaussianPixel: {
            std::vector<double> g(grad_out.size());
            for (size_t i = 0; i < grad_out.size(); ++i)
                g[i] = record.pass_mask[i] ? grad_out[i] : 0.0;
            return g;
        }
        case PerturbRecord::Kind::Affine: {
            std::vector<double> g(grad_out.size(), 0.0);
            const int C = channels;
            for (int r = 0; r < height; ++r) {
                for (int c = 0; c < width; ++c) {
                    const BilinearTap t =
                        source_tap(record.beta, r, c, width, height);
                    for (int ch = 0; ch < C; ++ch) {
                        const double go =
                            grad_out[(static_cast<size_t>(r) * width + c) * C + ch];
                        const auto idx = [&](int y, int x) {
                            return (static_cast<size_t>(y) * width + x) * C + ch;
                        };
                        g[idx(t.y0, t.x0)] += (1.0 - t.fy) * (1.0 - t.fx) * go;
                        g[idx(t.y0, t.x1)] += (1.0 - t.fy) * t.fx * go;
                        g[idx(t.y1, t.x0)] += t.fy * (1.0 - t.fx) * go;
                        g[idx(t.y1, t.x1)] += t.fy * t.fx * go;
                    }
                }
            }
            return g;
        }
    }
    throw std::logic_error("unreachable perturbation record kind");
}

Image gaussian_blur(const Image& img, int ksize, double sigma) {
    if (ksize < 1 || ksize % 2 == 0)
        throw std::invalid_argument("blur kernel size must be odd and positive");
    const int half = ksize / 2;
    std::vector<double> kernel(ksize);
    double sum = 0.0;
    for (int i = 0; i < ksize; ++i) {
        const double d = i - half;
        kernel[i] = std::exp(-d * d / (2.0 * sigma * sigma));
        sum += kernel[i];
    }
    for (auto& k : kernel) k /= sum;

    const int W = img.width, H = img.height, C = img.channels;
    const auto clampi = [](int v, int hi) { return std::clamp(v, 0, hi); };

    // Horizontal then vertical pass, replicate padding.
    Image tmp = img;
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            for (int c = 0; c < C; ++c) {
                double acc = 0.0;
                for (int i = 0; i < ksize; ++i)
                    acc += kernel[i] * img.at(y, clampi(x + i - half, W - 1), c);
                tmp.at(y, x, c) = acc;
            }
        }
    }
    Image out = tmp;
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            for (int c = 0; c < C; ++c) {
                double acc = 0.0;
                for (int i = 0; i < ksize; ++i)
                    acc += kernel[i] * tmp.at(clampi(y + i - half, H - 1), x, c);
                out.at(y, x, c) = acc;
            }
        }
    }
    return out;
}

}  // namespace wmlab
