#include "wmlab/certify.hpp"

#include <cmath>
#include <thread>

#include "wmlab/rng.hpp"
#include "wmlab/transforms.hpp"

namespace wmlab {

void SmoothingConfig::validate() const {
    if (!(sigma > 0.0)) throw std::invalid_argument("smoothing sigma must be > 0");
    if (n0 < 1 || n < n0)
        throw std::invalid_argument("smoothing requires 0 < n0 <= n");
    if (!(alpha > 0.0) || !(alpha < 1.0))
        throw std::invalid_argument("smoothing alpha must lie in (0,1)");
    if (chunk < 1) throw std::invalid_argument("sampling chunk must be >= 1");
    if (threads < 1) throw std::invalid_argument("thread count must be >= 1");
}

int authenticate(const CodecParams& params, const Image& w, const BitMessage& t,
                 double tau) {
    return verify(decode_bits(decode_probs(params, w)), t, tau).pass;
}

BinaryClassifier make_authenticator(CodecParams params, BitMessage t, double tau) {
    return [params = std::move(params), t = std::move(t), tau](const Image& img) {
        return authenticate(params, img, t, tau);
    };
}

CountPair sample_under_noise(const BinaryClassifier& h, const Image& w,
                             const SmoothingConfig& config, int count,
                             uint64_t seed) {
    config.validate();
    if (count < 1) throw std::invalid_argument("sample count must be >= 1");

    const int chunks = (count + config.chunk - 1) / config.chunk;
    const auto run_chunk = [&](int c) -> CountPair {
        const int begin = c * config.chunk;
        const int end = std::min(count, begin + config.chunk);
        Rng rng(derive_seed(seed, "chunk", static_cast<uint64_t>(c)));
        CountPair tally;
        for (int i = begin; i < end; ++i) {
            Image noisy =
                config.space == SmoothingConfig::Space::PixelGaussian
                    ? apply_gaussian_pixel(w, config.sigma, rng)
                    : apply_affine(w, sample_affine(config.sigma, rng));
            if (h(noisy) == 1)
                ++tally.votes1;
            else
                ++tally.votes0;
        }
        return tally;
    };

    CountPair total;
    if (config.threads <= 1) {
        for (int c = 0; c < chunks; ++c) {
            const CountPair t = run_chunk(c);
            total.votes0 += t.votes0;
            total.votes1 += t.votes1;
        }
        return total;
    }

    std::vector<CountPair> partial(config.threads);
    std::vector<std::thread> workers;
    for (int tid = 0; tid < config.threads; ++tid) {
        workers.emplace_back([&, tid] {
            CountPair acc;
            for (int c = tid; c < chunks; c += config.threads) {
                const CountPair t = run_chunk(c);
                acc.votes0 += t.votes0;
                acc.votes1 += t.votes1;
            }
            partial[tid] = acc;
        });
    }
    for (auto& th : workers) th.join();
    for (const auto& p : partial) {
        total.votes0 += p.votes0;
        total.votes1 += p.votes1;
    }
    return total;
}

CountPair sample_under_noise(const CodecParams& params, const Image& w,
                             const BitMessage& t, double tau,
                             const SmoothingConfig& config, int count,
                             uint64_t seed) {
    return sample_under_noise(make_authenticator(params, t, tau), w, config,
                              count, seed);
}

namespace {

// Continued fraction for the regularized incomplete beta (Lentz's method).
double betacf(double a, double b, double x) {
    constexpr int kMaxIter = 300;
    constexpr double kEps = 3e-16;
    constexpr double kFpMin = 1e-300;

    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) break;
    }
    return h;
}

double reg_incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                            a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
    return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

// P[Binomial(n,p) >= k] for k >= 1 via the beta identity.
double binom_upper_tail(int64_t k, int64_t n, double p) {
    return reg_incomplete_beta(static_cast<double>(k),
                               static_cast<double>(n - k + 1), p);
}

}  // namespace

double lower_conf_bound(int64_t k, int64_t n, double alpha) {
    if (n < 1 || k < 0 || k > n)
        throw std::invalid_argument("lower_conf_bound requires 0 <= k <= n");
    if (!(alpha > 0.0) || !(alpha < 1.0))
        throw std::invalid_argument("lower_conf_bound alpha must lie in (0,1)");
    if (k == 0) return 0.0;
    if (k == n) return std::exp(std::log(alpha) / static_cast<double>(n));

    double lo = 0.0, hi = 1.0;
    while (hi - lo > 1e-12) {
        const double mid = 0.5 * (lo + hi);
        if (binom_upper_tail(k, n, mid) < alpha)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

double std_normal_cdf(double x) {
    return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

namespace {

// Acklam's rational approximation, ~1e-9 relative accuracy on its own.
double inv_cdf_initial(double p) {
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    constexpr double plow = 0.02425;

    if (p < plow) {
        const double q = std::sqrt(-2.0 * std::log(p));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q +
                c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    if (p <= 1.0 - plow) {
        const double q = p - 0.5;
        const double r = q * q;
        return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r +
                a[5]) *
               q /
               (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    }
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
}

// Solves Phi(x) = p for p <= 1/2 (lower tail, no cancellation in erfc).
double inv_cdf_lower(double p) {
    double x = inv_cdf_initial(p);
    for (int it = 0; it < 3; ++it) {
        const double err = std_normal_cdf(x) - p;
        const double pdf = std::exp(-0.5 * x * x) * 0.39894228040143267794;
        if (pdf <= 0.0) break;
        x -= err / pdf;
    }
    return x;
}

}  // namespace

double std_normal_inv_cdf(double p) {
    if (!(p > 0.0) || !(p < 1.0))
        throw std::invalid_argument("std_normal_inv_cdf requires p in (0,1)");
    if (p == 0.5) return 0.0;
    if (p < 0.5) return inv_cdf_lower(p);
    return -inv_cdf_lower(1.0 - p);
}

CertOutcome certify(const BinaryClassifier& h, const Image& w,
                    const SmoothingConfig& config, uint64_t seed) {
    config.validate();
    const CountPair counts0 =
        sample_under_noise(h, w, config, config.n0, derive_seed(seed, "guess"));
    const int guess = counts0.votes1 > counts0.votes0 ? 1 : 0;

    const CountPair counts =
        sample_under_noise(h, w, config, config.n, derive_seed(seed, "estimate"));
    const int64_t k = guess == 1 ? counts.votes1 : counts.votes0;
    const double p_lower = lower_conf_bound(k, config.n, config.alpha);

    CertOutcome out;
    out.p_lower = p_lower;
    if (p_lower > 0.5) {
        out.decision = guess == 1 ? CertDecision::Class1 : CertDecision::Class0;
        out.radius = config.sigma * std_normal_inv_cdf(p_lower);
    } else {
        out.decision = CertDecision::Abstain;
        out.radius = 0.0;
    }
    return out;
}

CertOutcome certify(const CodecParams& params, const Image& w,
                    const BitMessage& t, double tau,
                    const SmoothingConfig& config, uint64_t seed) {
    return certify(make_authenticator(params, t, tau), w, config, seed);
}

std::vector<double> certified_accuracy_curve(
    const std::vector<std::pair<CertOutcome, int>>& outcomes,
    const std::vector<double>& radius_grid) {
    if (outcomes.empty())
        throw std::invalid_argument("certified_accuracy_curve: no outcomes");
    std::vector<double> curve;
    curve.reserve(radius_grid.size());
    for (double r : radius_grid) {
        size_t hits = 0;
        for (const auto& [outcome, truth] : outcomes) {
            if (outcome.decision == CertDecision::Abstain) continue;
            const int cls = outcome.decision == CertDecision::Class1 ? 1 : 0;
            if (cls == truth && outcome.radius >= r) ++hits;
        }
        curve.push_back(static_cast<double>(hits) /
                        static_cast<double>(outcomes.size()));
    }
    return curve;
}

}  // namespace wmlab
