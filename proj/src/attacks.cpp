#include "wmlab/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "wmlab/rng.hpp"
#include "wmlab/transforms.hpp"

namespace wmlab {

ResidualImage estimate_residual(const Image& w, const Image& original) {
    return residual(w, original);
}

ResidualImage estimate_residual(const Image& w, const OriginalEstimator& estimator) {
    return residual(w, estimator(w));
}

ResidualImage estimate_residual_lowpass(const Image& w) {
    return residual(w, gaussian_blur(w, 5, 1.0));
}

Image forge(const std::vector<ResidualImage>& residuals, const Image& x_new,
            double zeta) {
    if (residuals.empty())
        throw std::invalid_argument("forge: residual list must be nonempty");
    ResidualImage mean = residuals.front();
    for (size_t i = 1; i < residuals.size(); ++i) {
        if (!residuals[i].same_shape(mean))
            throw std::invalid_argument("forge: residual shape mismatch");
        for (size_t j = 0; j < mean.values.size(); ++j)
            mean.values[j] += residuals[i].values[j];
    }
    const double inv = 1.0 / static_cast<double>(residuals.size());
    for (auto& v : mean.values) v *= inv;
    return overlay(x_new, mean, zeta);
}

namespace {

double dist2(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

}  // namespace

ExtractionResult extract_secret(const EncoderOracle& encoder,
                                const ResidualImage& z_target,
                                const Image& x_probe, int n) {
    if (n < 1) throw std::invalid_argument("extract_secret: n must be >= 1");
    if (!z_target.same_shape(x_probe))
        throw std::invalid_argument("extract_secret: probe shape mismatch");

    ExtractionResult res;
    res.secret.bits.assign(n, 0);

    const auto probe_residual = [&](const BitMessage& t) {
        const Image w = encoder(x_probe, t);
        ++res.encoder_queries;
        return residual(w, x_probe);
    };

    ResidualImage z_cur = probe_residual(res.secret);
    double d_cur = dist2(z_cur.values, z_target.values);
    for (int bit = 0; bit < n; ++bit) {
        BitMessage candidate = res.secret;
        candidate.bits[bit] = 1;
        ResidualImage z_cand = probe_residual(candidate);
        const double d_cand = dist2(z_cand.values, z_target.values);
        if (d_cand < d_cur) {
            res.secret = std::move(candidate);
            z_cur = std::move(z_cand);
            d_cur = d_cand;
        }
    }
    return res;
}

KMeansResult kmeans(const std::vector<std::vector<double>>& points, int k,
                    uint64_t seed, int max_iter) {
    if (points.empty()) throw std::invalid_argument("kmeans: no points");
    const size_t count = points.size();
    const size_t dim = points[0].size();
    for (const auto& p : points)
        if (p.size() != dim) throw std::invalid_argument("kmeans: ragged points");
    if (k < 1 || static_cast<size_t>(k) > count)
        throw std::invalid_argument("kmeans: k must lie in [1, point count]");

    Rng rng(seed);
    KMeansResult res;
    res.centroids.reserve(k);

    // k-means++ seeding; when every remaining distance is zero, fall back to
    // the lowest unchosen index.
    std::vector<double> d2(count, std::numeric_limits<double>::max());
    std::vector<uint8_t> chosen(count, 0);
    {
        const size_t first = static_cast<size_t>(rng.below(count));
        res.centroids.push_back(points[first]);
        chosen[first] = 1;
    }
    while (res.centroids.size() < static_cast<size_t>(k)) {
        double total = 0.0;
        for (size_t i = 0; i < count; ++i) {
            d2[i] = std::min(d2[i], dist2(points[i], res.centroids.back()));
            total += d2[i];
        }
        size_t pick = count;
        if (total > 0.0) {
            const double target = rng.uniform() * total;
            double acc = 0.0;
            for (size_t i = 0; i < count; ++i) {
                acc += d2[i];
                if (acc >= target && d2[i] > 0.0) {
                    pick = i;
                    break;
                }
            }
        }
        if (pick == count) {
            for (size_t i = 0; i < count; ++i)
                if (!chosen[i]) {
                    pick = i;
                    break;
                }
        }
        chosen[pick] = 1;
        res.centroids.push_back(points[pick]);
    }

    res.labels.assign(count, 0);
    std::vector<int> sizes(k, 0);
    for (int iter = 0; iter < max_iter; ++iter) {
        bool changed = iter == 0;
        double inertia = 0.0;
        for (size_t i = 0; i < count; ++i) {
            int best = 0;
            double best_d = dist2(points[i], res.centroids[0]);
            for (int c = 1; c < k; ++c) {
                const double d = dist2(points[i], res.centroids[c]);
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            if (res.labels[i] != best) {
                res.labels[i] = best;
                changed = true;
            }
            inertia += best_d;
        }
        res.inertia_history.push_back(inertia);
        if (!changed) break;

        std::fill(sizes.begin(), sizes.end(), 0);
        for (auto& c : res.centroids) std::fill(c.begin(), c.end(), 0.0);
        for (size_t i = 0; i < count; ++i) {
            sizes[res.labels[i]] += 1;
            for (size_t j = 0; j < dim; ++j)
                res.centroids[res.labels[i]][j] += points[i][j];
        }
        for (int c = 0; c < k; ++c) {
            if (sizes[c] == 0) {
                // Re-seed an empty cluster with the point farthest from its
                // centroid (lowest index on ties).
                size_t far = 0;
                double far_d = -1.0;
                for (size_t i = 0; i < count; ++i) {
                    const double d = dist2(points[i], res.centroids[res.labels[i]]);
                    if (d > far_d && sizes[res.labels[i]] > 1) {
                        far_d = d;
                        far = i;
                    }
                }
                sizes[res.labels[far]] -= 1;
                res.labels[far] = c;
                sizes[c] = 1;
                res.centroids[c] = points[far];
                continue;
            }
            const double inv = 1.0 / sizes[c];
            for (auto& v : res.centroids[c]) v *= inv;
        }
    }
    return res;
}

double silhouette_score(const std::vector<std::vector<double>>& points,
                        const std::vector<int>& labels) {
    if (points.empty() || points.size() != labels.size())
        throw std::invalid_argument("silhouette: points/labels mismatch");
    const int k = *std::max_element(labels.begin(), labels.end()) + 1;
    std::vector<int> sizes(k, 0);
    for (int l : labels) {
        if (l < 0) throw std::invalid_argument("silhouette: negative label");
        sizes[l] += 1;
    }
    int nonempty = 0;
    for (int s : sizes)
        if (s > 0) ++nonempty;
    if (nonempty < 2)
        throw std::invalid_argument("silhouette requires at least two clusters");

    const size_t count = points.size();
    double total = 0.0;
    std::vector<double> cluster_dist(k);
    for (size_t i = 0; i < count; ++i) {
        std::fill(cluster_dist.begin(), cluster_dist.end(), 0.0);
        for (size_t j = 0; j < count; ++j) {
            if (i == j) continue;
            cluster_dist[labels[j]] += std::sqrt(dist2(points[i], points[j]));
        }
        const int own = labels[i];
        if (sizes[own] <= 1) continue;  // singletons contribute 0
        const double a = cluster_dist[own] / (sizes[own] - 1);
        double b = std::numeric_limits<double>::max();
        for (int c = 0; c < k; ++c) {
            if (c == own || sizes[c] == 0) continue;
            b = std::min(b, cluster_dist[c] / sizes[c]);
        }
        const double m = std::max(a, b);
        total += m > 0.0 ? (b - a) / m : 0.0;
    }
    return total / static_cast<double>(count);
}

namespace {

// Eigen decomposition of a symmetric matrix by cyclic Jacobi rotations.
// Columns of V are eigenvectors; eig holds the eigenvalues.
void jacobi_eigen(std::vector<double>& mat, size_t n, std::vector<double>& eig,
                  std::vector<double>& vecs) {
    vecs.assign(n * n, 0.0);
    for (size_t i = 0; i < n; ++i) vecs[i * n + i] = 1.0;

    const auto at = [&](size_t r, size_t c) -> double& { return mat[r * n + c]; };
    for (int sweep = 0; sweep < 60; ++sweep) {
        double off = 0.0;
        for (size_t p = 0; p < n; ++p)
            for (size_t q = p + 1; q < n; ++q) off += at(p, q) * at(p, q);
        if (off < 1e-22) break;
        for (size_t p = 0; p < n; ++p) {
            for (size_t q = p + 1; q < n; ++q) {
                const double apq = at(p, q);
                if (std::fabs(apq) < 1e-300) continue;
                const double theta = (at(q, q) - at(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::fabs(theta) +
                                  std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (size_t i = 0; i < n; ++i) {
                    const double aip = at(i, p), aiq = at(i, q);
                    at(i, p) = c * aip - s * aiq;
                    at(i, q) = s * aip + c * aiq;
                }
                for (size_t i = 0; i < n; ++i) {
                    const double api = at(p, i), aqi = at(q, i);
                    at(p, i) = c * api - s * aqi;
                    at(q, i) = s * api + c * aqi;
                }
                for (size_t i = 0; i < n; ++i) {
                    const double vip = vecs[i * n + p], viq = vecs[i * n + q];
                    vecs[i * n + p] = c * vip - s * viq;
                    vecs[i * n + q] = s * vip + c * viq;
                }
            }
        }
    }
    eig.resize(n);
    for (size_t i = 0; i < n; ++i) eig[i] = mat[i * n + i];
}

}  // namespace

std::vector<std::vector<double>> pca_features(
    const std::vector<std::vector<double>>& points, int dims) {
    if (points.empty()) throw std::invalid_argument("pca: no points");
    if (dims < 1) throw std::invalid_argument("pca: dims must be >= 1");
    const size_t count = points.size();
    const size_t dim = points[0].size();

    std::vector<double> mean(dim, 0.0);
    for (const auto& p : points) {
        if (p.size() != dim) throw std::invalid_argument("pca: ragged points");
        for (size_t j = 0; j < dim; ++j) mean[j] += p[j];
    }
    for (auto& v : mean) v /= static_cast<double>(count);

    // Gram matrix of the centered data; its eigenvectors give the principal
    // scores without forming the dim x dim covariance.
    std::vector<std::vector<double>> centered(count, std::vector<double>(dim));
    for (size_t i = 0; i < count; ++i)
        for (size_t j = 0; j < dim; ++j) centered[i][j] = points[i][j] - mean[j];

    std::vector<double> gram(count * count);
    for (size_t i = 0; i < count; ++i) {
        for (size_t j = i; j < count; ++j) {
            double acc = 0.0;
            for (size_t d = 0; d < dim; ++d) acc += centered[i][d] * centered[j][d];
            gram[i * count + j] = acc;
            gram[j * count + i] = acc;
        }
    }

    std::vector<double> eig, vecs;
    jacobi_eigen(gram, count, eig, vecs);

    std::vector<size_t> order(count);
    for (size_t i = 0; i < count; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return eig[a] > eig[b]; });

    std::vector<std::vector<double>> features(count, std::vector<double>(dims, 0.0));
    const int usable = static_cast<int>(std::min<size_t>(dims, count));
    for (int f = 0; f < usable; ++f) {
        const size_t col = order[f];
        const double lambda = std::max(eig[col], 0.0);
        const double scale = std::sqrt(lambda);
        // Sign convention: the entry with the largest magnitude is positive.
        size_t arg = 0;
        double best = 0.0;
        for (size_t i = 0; i < count; ++i) {
            const double v = std::fabs(vecs[i * count + col]);
            if (v > best) {
                best = v;
                arg = i;
            }
        }
        const double sign = vecs[arg * count + col] < 0.0 ? -1.0 : 1.0;
        for (size_t i = 0; i < count; ++i)
            features[i][f] = sign * vecs[i * count + col] * scale;
    }
    return features;
}

LinkingResult link_identities(const std::vector<ResidualImage>& residuals, int k,
                              int pca_dims, uint64_t seed) {
    if (residuals.empty())
        throw std::invalid_argument("link_identities: no residuals");
    if (k < 2) throw std::invalid_argument("link_identities: k must be >= 2");

    std::vector<std::vector<double>> flat;
    flat.reserve(residuals.size());
    for (const auto& z : residuals) {
        if (!z.same_shape(residuals.front()))
            throw std::invalid_argument("link_identities: residual shape mismatch");
        flat.push_back(z.values);
    }

    LinkingResult res;
    res.features = pca_features(flat, pca_dims);
    KMeansResult km = kmeans(res.features, k, seed);
    res.labels = std::move(km.labels);
    res.silhouette = silhouette_score(res.features, res.labels);

    res.intra_cluster_mean_dist.assign(k, 0.0);
    for (int c = 0; c < k; ++c) {
        double acc = 0.0;
        size_t pairs = 0;
        for (size_t i = 0; i < res.features.size(); ++i) {
            if (res.labels[i] != c) continue;
            for (size_t j = i + 1; j < res.features.size(); ++j) {
                if (res.labels[j] != c) continue;
                acc += std::sqrt(dist2(res.features[i], res.features[j]));
                ++pairs;
            }
        }
        res.intra_cluster_mean_dist[c] = pairs ? acc / pairs : 0.0;
    }
    return res;
}

double leakage_correlation(const EncoderOracle& encoder, const Image& x,
                           int k_secrets, int message_length, uint64_t seed) {
    if (k_secrets < 3)
        throw std::invalid_argument("leakage_correlation requires >= 3 secrets");
    Rng rng(seed);
    std::vector<BitMessage> secrets;
    std::vector<ResidualImage> zs;
    secrets.reserve(k_secrets);
    for (int i = 0; i < k_secrets; ++i) {
        secrets.push_back(BitMessage::random(message_length, rng));
        zs.push_back(residual(encoder(x, secrets.back()), x));
    }

    std::vector<double> hamming, euclid;
    for (int i = 0; i < k_secrets; ++i) {
        for (int j = i + 1; j < k_secrets; ++j) {
            int h = 0;
            for (int b = 0; b < message_length; ++b)
                if (secrets[i].bits[b] != secrets[j].bits[b]) ++h;
            hamming.push_back(static_cast<double>(h));
            euclid.push_back(std::sqrt(dist2(zs[i].values, zs[j].values)));
        }
    }
    return pearson_r(hamming, euclid);  // throws when all secrets coincide
}

}  // namespace wmlab
