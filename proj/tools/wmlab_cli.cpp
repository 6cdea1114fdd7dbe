#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include "wmlab/attacks.hpp"
#include "wmlab/certify.hpp"
#include "wmlab/experiment.hpp"
#include "wmlab/image_io.hpp"
#include "wmlab/model_io.hpp"
#include "wmlab/report.hpp"
#include "wmlab/rng.hpp"

namespace {

using namespace wmlab;

struct GlobalOpts {
    std::string config_path;
    std::string out_dir;
    uint64_t seed = 0;
    bool seed_set = false;
    int threads = 0;
    bool dry_run = false;
};

ExperimentConfig effective_config(const GlobalOpts& g) {
    ExperimentConfig config;
    if (!g.config_path.empty()) config = parse_config_file(g.config_path);
    if (g.seed_set) config.seed = g.seed;
    if (!g.out_dir.empty()) config.out_dir = g.out_dir;
    if (g.threads > 0) config.threads = g.threads;
    if (g.dry_run) config.dry_run = true;
    return config;
}

double resolve_tau(const CodecParams& params, double tau, double fpr) {
    if (tau > 0.0) return tau;
    return compute_threshold(params.config.n, fpr).tau;
}

void write_image_by_ext(const Image& img, const std::string& path) {
    const std::string ext = std::filesystem::path(path).extension().string();
    if (ext == ".ppm" || ext == ".pgm")
        write_pnm(img, path);
    else
        write_png(img, path);
}

DatasetSplits config_dataset(const ExperimentConfig& config) {
    return load_dataset(config.dataset);
}

void write_attack_csv(const ExperimentConfig& config,
                      const AttackCampaignStats& stats, const std::string& tag,
                      const std::string& path) {
    CsvWriter csv(path, {"regime", "sigma", "m", "zeta", "forged_bit_acc",
                         "forged_pass_rate", "attack_bit_acc", "silhouette",
                         "forged_psnr", "forged_ssim"});
    for (size_t mi = 0; mi < config.forge_m.size(); ++mi)
        csv.row({tag, fmt_double(0.0, 4), fmt_int(config.forge_m[mi]),
                 fmt_double(config.zeta, 4),
                 fmt_double(stats.forged_bit_acc[mi], 6),
                 fmt_double(stats.forged_pass_rate[mi], 6),
                 fmt_double(stats.attack_bit_acc, 6),
                 fmt_double(stats.silhouette, 6),
                 fmt_double(stats.forged_psnr[mi], 4),
                 fmt_double(stats.forged_ssim[mi], 6)});
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"wmlab: watermark codec training, certification and leakage attacks"};
    app.require_subcommand(1);

    GlobalOpts g;
    app.add_option("--config", g.config_path, "experiment config file");
    app.add_option("--out", g.out_dir, "output directory override");
    auto* seed_opt = app.add_option("--seed", g.seed, "global seed override");
    app.add_option("--threads", g.threads, "worker threads for sampling");
    app.add_flag("--dry-run", g.dry_run, "validate config and write manifest only");

    // run: the full experiment pipeline.
    auto* cmd_run = app.add_subcommand("run", "run the configured experiment");

    // train: dataset + training + model file only.
    auto* cmd_train = app.add_subcommand("train", "train the configured regime");

    // embed
    std::string model_path, in_path, out_path, bits_str;
    auto* cmd_embed = app.add_subcommand("embed", "embed a message into an image");
    cmd_embed->add_option("--model", model_path)->required();
    cmd_embed->add_option("--in", in_path)->required();
    cmd_embed->add_option("--bits", bits_str)->required();
    cmd_embed->add_option("--output", out_path)->required();

    // decode
    auto* cmd_decode = app.add_subcommand("decode", "decode the message from an image");
    cmd_decode->add_option("--model", model_path)->required();
    cmd_decode->add_option("--in", in_path)->required();
    bool show_probs = false;
    cmd_decode->add_flag("--probs", show_probs, "also print per-bit probabilities");

    // verify
    double arg_tau = 0.0, arg_fpr = 0.01;
    auto* cmd_verify = app.add_subcommand("verify", "decode and verify against a message");
    cmd_verify->add_option("--model", model_path)->required();
    cmd_verify->add_option("--in", in_path)->required();
    cmd_verify->add_option("--bits", bits_str)->required();
    cmd_verify->add_option("--tau", arg_tau, "verification threshold (overrides --fpr)");
    cmd_verify->add_option("--fpr", arg_fpr, "false-positive budget for the threshold");

    // certify
    double arg_sigma = 0.25, arg_alpha = 0.001;
    int arg_n0 = 100, arg_n = 100000;
    std::string arg_space = "pixel";
    auto* cmd_certify = app.add_subcommand("certify", "certify authentication under noise");
    cmd_certify->add_option("--model", model_path)->required();
    cmd_certify->add_option("--in", in_path)->required();
    cmd_certify->add_option("--bits", bits_str)->required();
    cmd_certify->add_option("--tau", arg_tau);
    cmd_certify->add_option("--fpr", arg_fpr);
    cmd_certify->add_option("--sigma", arg_sigma, "smoothing scale");
    cmd_certify->add_option("--space", arg_space, "pixel or affine");
    cmd_certify->add_option("--n0", arg_n0);
    cmd_certify->add_option("--n", arg_n);
    cmd_certify->add_option("--alpha", arg_alpha);

    // attack subcommands share --model.
    auto* cmd_forge = app.add_subcommand("attack-forge", "forgery campaign scorecard");
    cmd_forge->add_option("--model", model_path)->required();
    auto* cmd_extract = app.add_subcommand("attack-extract", "extraction campaign scorecard");
    cmd_extract->add_option("--model", model_path)->required();
    auto* cmd_link = app.add_subcommand("attack-link", "linking campaign scorecard");
    cmd_link->add_option("--model", model_path)->required();

    auto* cmd_report = app.add_subcommand("report", "emit plot-ready curve files");

    CLI11_PARSE(app, argc, argv);
    g.seed_set = seed_opt->count() > 0;

    try {
        if (cmd_run->parsed()) {
            const ExperimentConfig config = effective_config(g);
            return run_experiment(config).exit_code;
        }

        if (cmd_train->parsed()) {
            ExperimentConfig config = effective_config(g);
            config.validate();
            std::filesystem::create_directories(config.out_dir);
            const DatasetSplits splits = config_dataset(config);
            const std::string regime = config.regimes.front();
            const bool with_ril = config.ril != "none";
            const std::string tag = regime + (with_ril ? "-ril" : "");
            double sigma = 0.0;
            if (regime == "w-cr-gaussian") sigma = config.gaussian_sigma;
            if (regime == "w-cr-affine") sigma = config.affine_sigma;

            TrainConfig tc;
            tc.learning_rate = config.learning_rate;
            tc.batch_size = config.batch_size;
            tc.phase1_epochs = config.phase1_epochs;
            tc.phase2_epochs = with_ril ? config.phase2_epochs : 0;
            tc.interleave_phases = config.interleave_phases;
            tc.weights = config.weights;
            tc.perturbation = regime_perturbation(regime, sigma);
            tc.seed = derive_seed(config.seed, "train-" + tag);
            tc.regime = regime;
            auto [params, report] = train(tc, splits.train, splits.val, config.codec);

            const std::string model_file = config.out_dir + "/model_" + tag + ".wirm";
            save_model(params, model_file);
            CsvWriter tr(config.out_dir + "/train_" + tag + ".csv",
                         {"epoch", "phase", "loss_message", "loss_residual",
                          "loss_ril", "train_bit_acc", "val_bit_acc"});
            for (const EpochStats& row : report.epochs)
                tr.row({fmt_int(row.epoch), fmt_int(row.phase),
                        fmt_double(row.loss_message, 6),
                        fmt_double(row.loss_residual, 8),
                        fmt_double(row.loss_ril, 6),
                        fmt_double(row.train_bit_acc, 6),
                        fmt_double(row.val_bit_acc, 6)});
            std::cout << "model: " << model_file << "\n";
            if (!report.epochs.empty())
                std::cout << "final val bit accuracy: "
                          << fmt_double(report.epochs.back().val_bit_acc, 4) << "\n";
            return 0;
        }

        if (cmd_embed->parsed()) {
            const CodecParams params = load_model(model_path);
            const Image x = read_image_file(in_path);
            check_image(x);
            const BitMessage t = BitMessage::from_string(bits_str);
            const Image w = encode(params, x, t);
            write_image_by_ext(w, out_path);
            std::cout << "psnr: " << fmt_double(psnr(w, x), 4) << "\n";
            return 0;
        }

        if (cmd_decode->parsed()) {
            const CodecParams params = load_model(model_path);
            const Image w = read_image_file(in_path);
            const BitProbabilities probs = decode_probs(params, w);
            std::cout << decode_bits(probs).to_string() << "\n";
            if (show_probs) {
                for (size_t i = 0; i < probs.size(); ++i)
                    std::cout << (i ? " " : "") << fmt_double(probs.p[i], 4);
                std::cout << "\n";
            }
            return 0;
        }

        if (cmd_verify->parsed()) {
            const CodecParams params = load_model(model_path);
            const Image w = read_image_file(in_path);
            const BitMessage t = BitMessage::from_string(bits_str);
            const double tau = resolve_tau(params, arg_tau, arg_fpr);
            const VerificationResult res =
                verify(decode_bits(decode_probs(params, w)), t, tau);
            std::cout << "bit_accuracy: " << fmt_double(res.bit_accuracy, 6)
                      << "\ntau: " << fmt_double(tau, 6)
                      << "\npass: " << res.pass << "\n";
            return res.pass ? 0 : 2;
        }

        if (cmd_certify->parsed()) {
            const CodecParams params = load_model(model_path);
            const Image w = read_image_file(in_path);
            const BitMessage t = BitMessage::from_string(bits_str);
            const double tau = resolve_tau(params, arg_tau, arg_fpr);
            SmoothingConfig smooth;
            smooth.sigma = arg_sigma;
            smooth.space = arg_space == "affine" ? SmoothingConfig::Space::Affine
                                                 : SmoothingConfig::Space::PixelGaussian;
            smooth.n0 = arg_n0;
            smooth.n = arg_n;
            smooth.alpha = arg_alpha;
            if (g.threads > 0) smooth.threads = g.threads;
            const CertOutcome outcome =
                certify(params, w, t, tau, smooth, g.seed_set ? g.seed : 0);
            if (outcome.decision == CertDecision::Abstain) {
                std::cout << "decision: abstain\np_lower: "
                          << fmt_double(outcome.p_lower, 9) << "\n";
            } else {
                std::cout << "decision: "
                          << (outcome.decision == CertDecision::Class1 ? 1 : 0)
                          << "\np_lower: " << fmt_double(outcome.p_lower, 9)
                          << "\nradius: " << fmt_double(outcome.radius, 6) << "\n";
            }
            return 0;
        }

        if (cmd_forge->parsed() || cmd_extract->parsed() || cmd_link->parsed()) {
            ExperimentConfig config = effective_config(g);
            config.validate();
            std::filesystem::create_directories(config.out_dir);
            const CodecParams params = load_model(model_path);
            if (params.config.side != config.codec.side ||
                params.config.channels != config.codec.channels)
                throw std::invalid_argument("model shape does not match the config dataset");
            const DatasetSplits splits = config_dataset(config);
            const double tau =
                compute_threshold(params.config.n, config.verify_fpr).tau;
            const std::string kind = cmd_forge->parsed()   ? "forge"
                                     : cmd_extract->parsed() ? "extract"
                                                             : "link";
            const AttackCampaignStats stats = attack_campaign(
                config, params, splits.test, splits.val, tau, "cli-" + kind);
            const std::string csv = config.out_dir + "/attack_" + kind + ".csv";
            write_attack_csv(config, stats, kind, csv);
            if (kind == "forge")
                std::cout << "forged_bit_acc (largest m): "
                          << fmt_double(stats.forged_bit_acc.back(), 4) << "\n";
            else if (kind == "extract")
                std::cout << "attack_bit_acc: "
                          << fmt_double(stats.attack_bit_acc, 4) << "\n";
            else
                std::cout << "silhouette: " << fmt_double(stats.silhouette, 4)
                          << "\n";
            std::cout << "scorecard: " << csv << "\n";
            return 0;
        }

        if (cmd_report->parsed()) {
            ExperimentConfig config = effective_config(g);
            const std::filesystem::path dir = config.out_dir;
            const std::filesystem::path plots = dir / "plots";
            std::filesystem::create_directories(plots);
            int curves = 0;
            for (const auto& entry : std::filesystem::directory_iterator(dir)) {
                const std::string name = entry.path().filename().string();
                if (name.rfind("curve_", 0) == 0 && entry.path().extension() == ".csv") {
                    std::filesystem::copy_file(
                        entry.path(), plots / name,
                        std::filesystem::copy_options::overwrite_existing);
                    ++curves;
                }
            }
            std::cout << "plot-ready curves: " << curves << " -> " << plots.string()
                      << "\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
