#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "wmlab/codec.hpp"
#include "wmlab/core.hpp"
#include "wmlab/transforms.hpp"

namespace wmlab {

// eta_M and eta_R from the weighted training loss; perceptual and adversarial
// terms are fixed to zero (extension hooks, not implemented). ril scales the
// phase-2 objective.
struct LossWeights {
    double message = 1.0;
    double residual = 10.0;
    double ril = 1.0;

    void validate() const {
        if (message < 0.0 || residual < 0.0 || ril < 0.0)
            throw std::invalid_argument("loss weights must be >= 0");
    }
};

struct TrainConfig {
    double learning_rate = 1e-3;
    int batch_size = 32;
    int phase1_epochs = 0;
    int phase2_epochs = 0;  // > 0 enables the residual-information phase
    // nullopt = clean regime (identity perturbation layer).
    std::optional<PerturbationFamily> perturbation;
    uint64_t seed = 0;
    LossWeights weights;
    // When true the phase-2 step runs after each phase-1 batch during the
    // last phase2_epochs epochs instead of as a separate block.
    bool interleave_phases = false;
    std::string regime = "clean";
};

struct EpochStats {
    int epoch = 0;
    int phase = 1;
    double loss_message = 0.0;
    double loss_residual = 0.0;
    double loss_ril = 0.0;
    double train_bit_acc = 0.0;
    double val_bit_acc = 0.0;
};

struct TrainReport {
    std::vector<EpochStats> epochs;
};

// Adam accumulators, aligned index-for-index with tensor_views().
struct OptimizerState {
    std::vector<std::vector<double>> m, v;
    int64_t step = 0;

    static OptimizerState zeros_like(CodecParams& params);
};

// Mean binary cross-entropy in nats.
double loss_message(const BitProbabilities& probs, const BitMessage& t);

// Mean squared pixel difference.
double loss_residual(const Image& w, const Image& x);

inline double loss_total(double l_message, double l_residual,
                         const LossWeights& w) {
    return w.message * l_message + w.residual * l_residual;
}

// KL divergence between factorized Bernoulli vectors, in nats:
// sum_i [p ln(p/q) + (1-p) ln((1-p)/(1-q))]. Inputs are clamped upstream.
double kl_bernoulli(const BitProbabilities& p, const BitProbabilities& q);

// Residual information loss for one sample:
// kl_bernoulli(probs_w, probs_z) - kl_bernoulli(probs_z, probs_w).
// Minimizing it over the encoder sharpens the message read from w relative to
// the one read from z. Negative in the desired regime (w decodes confidently,
// z decodes to chance); swapping the arguments negates the value.
double loss_ril(const BitProbabilities& probs_w, const BitProbabilities& probs_z);

// Standard bias-corrected adaptive-moment update, beta1=0.9, beta2=0.999,
// eps=1e-8. tensor_limit restricts the update to the first tensors of the
// view order (kEncoderTensorCount freezes the decoder). Throws
// TrainingDiverged on non-finite gradients.
void adam_step(CodecParams& params, const CodecGrads& grads,
               OptimizerState& state, double lr, size_t tensor_limit = SIZE_MAX);

// Two-phase training. Phase 1 trains encoder and decoder with the weighted
// loss through the perturbation layer; phase 2 (when enabled) updates only
// the encoder with the residual information loss, decoder weights frozen.
std::pair<CodecParams, TrainReport> train(const TrainConfig& config,
                                          const std::vector<Image>& train_images,
                                          const std::vector<Image>& val_images,
                                          const CodecConfig& codec_config);

enum class GradCheckPath { Total, ResidualInfo };

struct GradCheckOptions {
    GradCheckPath path = GradCheckPath::Total;
    int sample_weights = 120;
    uint64_t seed = 1;
    double fd_step = 1e-3;
    // Test hook: zero the analytic gradient of the k-th sampled weight to
    // prove the check detects a corrupted gradient. -1 disables.
    int corrupt_sample = -1;
};

// Max relative error between analytic gradients and central finite
// differences over randomly chosen weights; denominator
// max(|analytic|, |numeric|, 1e-8). The ResidualInfo path samples encoder
// weights only.
double grad_check(const CodecParams& params, const std::vector<Image>& batch,
                  const LossWeights& weights, const GradCheckOptions& opts);

// Mutual information of a discrete joint probability table, in nats.
// Entries must be non-negative and sum to 1 within 1e-9; 0 ln 0 = 0.
double mutual_information_discrete(const std::vector<std::vector<double>>& joint);

// Perturbation layer for a named training regime. "clean" maps to nullopt,
// "w-er" to the default empirical mixture, "w-cr-gaussian"/"w-cr-affine" to
// single-family noise with the given sigma.
std::optional<PerturbationFamily> regime_perturbation(const std::string& regime,
                                                      double sigma);

}  // namespace wmlab
