#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "wmlab/codec.hpp"
#include "wmlab/core.hpp"

namespace wmlab {

struct SmoothingConfig {
    enum class Space { PixelGaussian, Affine };

    double sigma = 0.25;
    Space space = Space::PixelGaussian;
    int n0 = 100;        // draws for the initial guess
    int n = 100000;      // draws for the confidence estimate
    double alpha = 0.001;
    int chunk = 256;     // sampling batch size; results do not depend on it
    int threads = 1;

    void validate() const;
};

enum class CertDecision { Class0 = 0, Class1 = 1, Abstain = 2 };

struct CertOutcome {
    CertDecision decision = CertDecision::Abstain;
    double radius = 0.0;   // 0 when abstained
    double p_lower = 0.0;  // lower confidence bound used
};

struct CountPair {
    int64_t votes0 = 0;
    int64_t votes1 = 0;
};

// Any binary classifier over images; the smoothing machinery is generic and
// watermark authentication is one instance.
using BinaryClassifier = std::function<int(const Image&)>;

// Decode-then-verify as a binary decision.
int authenticate(const CodecParams& params, const Image& w, const BitMessage& t,
                 double tau);
BinaryClassifier make_authenticator(CodecParams params, BitMessage t, double tau);

// Draws `count` perturbations of w (pixel Gaussian: clamp(w + noise);
// affine: fresh beta per draw) and tallies the classifier votes. Draw streams
// are derived per fixed-size chunk, so the tally is independent of the thread
// count.
CountPair sample_under_noise(const BinaryClassifier& h, const Image& w,
                             const SmoothingConfig& config, int count,
                             uint64_t seed);
CountPair sample_under_noise(const CodecParams& params, const Image& w,
                             const BitMessage& t, double tau,
                             const SmoothingConfig& config, int count,
                             uint64_t seed);

// One-sided exact (Clopper-Pearson) binomial lower confidence bound: the p
// solving P[Binomial(n,p) >= k] = alpha (0 for k = 0, alpha^(1/n) for k = n),
// located by bisection on the exact tail to 1e-12.
double lower_conf_bound(int64_t k, int64_t n, double alpha);

double std_normal_cdf(double x);

// Inverse standard normal CDF, absolute error well below 1e-9 (rational
// initial guess plus Newton refinement against the erfc-based CDF).
double std_normal_inv_cdf(double p);

// Guess the class on n0 draws, lower-bound its probability on n fresh draws,
// return the prediction with radius sigma * Phi^-1(p_lower), or abstain when
// the bound does not exceed 1/2. The guess and estimate use separate streams.
CertOutcome certify(const BinaryClassifier& h, const Image& w,
                    const SmoothingConfig& config, uint64_t seed);
CertOutcome certify(const CodecParams& params, const Image& w,
                    const BitMessage& t, double tau,
                    const SmoothingConfig& config, uint64_t seed);

// For each grid radius: fraction of samples with decision == truth and
// radius >= r. Abstentions count as failures.
std::vector<double> certified_accuracy_curve(
    const std::vector<std::pair<CertOutcome, int>>& outcomes,
    const std::vector<double>& radius_grid);

}  // namespace wmlab
