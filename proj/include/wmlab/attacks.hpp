#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "wmlab/core.hpp"

namespace wmlab {

// Black-box watermark embedding service, as exposed to an adversary.
using EncoderOracle = std::function<Image(const Image&, const BitMessage&)>;

// Estimates the original image from a watermarked one. The low-pass filter is
// built in; reconstruction models (e.g. a VAE) plug in through this hook.
using OriginalEstimator = std::function<Image(const Image&)>;

// Exact residual: the adversary knows the original.
ResidualImage estimate_residual(const Image& w, const Image& original);

// Residual from an original-image estimator: w - estimate(w).
ResidualImage estimate_residual(const Image& w, const OriginalEstimator& estimator);

// Low-pass branch: w - blur(w), 5x5 Gaussian kernel with sigma 1.0.
ResidualImage estimate_residual_lowpass(const Image& w);

// Averages the residuals and overlays the mean zeta times onto x_new.
Image forge(const std::vector<ResidualImage>& residuals, const Image& x_new,
            double zeta);

struct ExtractionResult {
    BitMessage secret;
    int encoder_queries = 0;
};

// Bit-by-bit recovery of the secret behind z_target: starting from all zeros,
// each bit is set when doing so moves the probe residual closer (Euclidean
// distance) to the target. Caches the running residual, so the encoder is
// queried n+1 times.
ExtractionResult extract_secret(const EncoderOracle& encoder,
                                const ResidualImage& z_target,
                                const Image& x_probe, int n);

struct KMeansResult {
    std::vector<int> labels;
    std::vector<std::vector<double>> centroids;
    std::vector<double> inertia_history;  // after each assignment step
};

// Lloyd iterations from k-means++ seeding; deterministic given the seed.
KMeansResult kmeans(const std::vector<std::vector<double>>& points, int k,
                    uint64_t seed, int max_iter = 100);

// Mean over points of (b-a)/max(a,b); singletons score 0. Requires at least
// two nonempty clusters.
double silhouette_score(const std::vector<std::vector<double>>& points,
                        const std::vector<int>& labels);

// Principal-component scores of the points (centered), highest-variance
// directions first. Pads with zero columns when the data rank is below dims.
std::vector<std::vector<double>> pca_features(
    const std::vector<std::vector<double>>& points, int dims);

struct LinkingResult {
    std::vector<int> labels;
    double silhouette = 0.0;
    // Mean pairwise distance inside each cluster, in feature space.
    std::vector<double> intra_cluster_mean_dist;
    std::vector<std::vector<double>> features;
};

// Clusters flattened residuals in PCA space to group images by hidden user.
LinkingResult link_identities(const std::vector<ResidualImage>& residuals, int k,
                              int pca_dims = 8, uint64_t seed = 0);

// Embeds k_secrets random messages into the same image and correlates pairwise
// secret hamming distances with pairwise residual Euclidean distances.
double leakage_correlation(const EncoderOracle& encoder, const Image& x,
                           int k_secrets, int message_length, uint64_t seed);

}  // namespace wmlab
