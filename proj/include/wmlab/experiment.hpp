#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wmlab/certify.hpp"
#include "wmlab/codec.hpp"
#include "wmlab/dataset.hpp"
#include "wmlab/training.hpp"

namespace wmlab {

struct ExperimentConfig {
    DatasetSpec dataset;
    CodecConfig codec;

    double learning_rate = 1e-3;
    int batch_size = 32;
    int phase1_epochs = 30;
    int phase2_epochs = 4;
    bool interleave_phases = false;
    LossWeights weights;

    std::vector<std::string> regimes = {"clean"};
    double gaussian_sigma = 0.25;  // w-cr-gaussian training noise
    double affine_sigma = 0.01;    // w-cr-affine training noise
    std::string ril = "none";      // none | with | both

    double verify_fpr = 0.01;

    SmoothingConfig smoothing;
    int certify_samples = 20;

    int attack_users = 4;
    int attack_images_per_user = 30;
    std::vector<int> forge_m = {1, 30};
    double zeta = 1.0;
    int pca_dims = 8;
    std::string residual_source = "exact";  // exact | lowpass

    uint64_t seed = 0;
    std::string out_dir = "out";
    int threads = 1;
    bool dry_run = false;
    bool plots = false;

    void validate() const;
};

// Flat key=value config text ('#' comments); unknown keys are an error.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config_file(const std::string& path);

// Canonical text rendering of a config: the determinism and hashing basis.
std::string canonical_config_text(const ExperimentConfig& config);

// Aggregated attack-campaign scores for one trained codec. Forgery vectors
// are indexed like the config's forge_m list.
struct AttackCampaignStats {
    std::vector<double> forged_bit_acc;
    std::vector<double> forged_pass_rate;
    std::vector<double> forged_psnr;
    std::vector<double> forged_ssim;
    double attack_bit_acc = 0.0;
    double silhouette = 0.0;
};

// Runs forgery, extraction and linking against `params`. Observations are
// watermarked from observed_pool; forgery targets and extraction probes come
// from fresh_pool (disjoint originals).
AttackCampaignStats attack_campaign(const ExperimentConfig& config,
                                    const CodecParams& params,
                                    const std::vector<Image>& observed_pool,
                                    const std::vector<Image>& fresh_pool,
                                    double tau, const std::string& tag);

// Per-regime summary of one experiment run (also written to CSV files).
struct RegimeSummary {
    std::string tag;
    double psnr = 0.0;
    double ssim = 0.0;
    double clean_bit_acc = 0.0;
    double clean_acc = 0.0;
    double certified_acc = 0.0;  // at radius 0
    double forged_bit_acc = 0.0;  // largest m
    double forged_pass_rate = 0.0;
    double attack_bit_acc = 0.0;
    double silhouette = 0.0;
};

struct ExperimentResult {
    int exit_code = 0;
    std::vector<RegimeSummary> regimes;
};

// Trains (or loads) the requested regimes, evaluates quality/authentication,
// certifies a test subset and runs the attack campaigns. Writes CSV reports
// plus a manifest into config.out_dir.
ExperimentResult run_experiment(const ExperimentConfig& config);

}  // namespace wmlab
