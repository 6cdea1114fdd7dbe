#include "wmlab/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include "wmlab/attacks.hpp"
#include "wmlab/model_io.hpp"
#include "wmlab/report.hpp"
#include "wmlab/rng.hpp"

namespace wmlab {

void ExperimentConfig::validate() const {
    dataset.validate();
    codec.validate();
    weights.validate();
    if (codec.side != dataset.side || codec.channels != dataset.channels)
        throw std::invalid_argument("config: codec and dataset shapes disagree");
    if (batch_size < 1 || phase1_epochs < 0 || phase2_epochs < 0)
        throw std::invalid_argument("config: invalid training sizes");
    if (regimes.empty()) throw std::invalid_argument("config: no regimes");
    for (const auto& r : regimes)
        (void)regime_perturbation(r, 0.1);  // rejects unknown tags
    if (ril != "none" && ril != "with" && ril != "both")
        throw std::invalid_argument("config: ril must be none, with or both");
    if (!(verify_fpr > 0.0) || !(verify_fpr < 1.0))
        throw std::invalid_argument("config: verify_fpr must lie in (0,1)");
    smoothing.validate();
    if (certify_samples < 1)
        throw std::invalid_argument("config: certify_samples must be >= 1");
    if (attack_users < 2)
        throw std::invalid_argument("config: attack_users must be >= 2");
    if (attack_images_per_user < 1)
        throw std::invalid_argument("config: attack_images_per_user must be >= 1");
    if (forge_m.empty())
        throw std::invalid_argument("config: forge_m must be nonempty");
    for (int m : forge_m)
        if (m < 1) throw std::invalid_argument("config: forge_m entries must be >= 1");
    if (!(zeta > 0.0)) throw std::invalid_argument("config: zeta must be > 0");
    if (pca_dims < 1) throw std::invalid_argument("config: pca_dims must be >= 1");
    if (residual_source != "exact" && residual_source != "lowpass")
        throw std::invalid_argument("config: residual_source must be exact or lowpass");
    if (threads < 1) throw std::invalid_argument("config: threads must be >= 1");
    if (out_dir.empty()) throw std::invalid_argument("config: out_dir is empty");
}

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

bool parse_bool(const std::string& v) {
    if (v == "1" || v == "true") return true;
    if (v == "0" || v == "false") return false;
    throw std::invalid_argument("config: expected boolean, got '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
    ExperimentConfig c;
    using Setter = std::function<void(ExperimentConfig&, const std::string&)>;
    static const std::vector<std::pair<std::string, Setter>> keys = {
        {"dataset.source",
         [](ExperimentConfig& c, const std::string& v) {
             if (v == "synthetic") c.dataset.source = DatasetSpec::Source::Synthetic;
             else if (v == "directory") c.dataset.source = DatasetSpec::Source::Directory;
             else throw std::invalid_argument("config: dataset.source must be synthetic or directory");
         }},
        {"dataset.directory", [](ExperimentConfig& c, const std::string& v) { c.dataset.directory = v; }},
        {"dataset.side", [](ExperimentConfig& c, const std::string& v) { c.dataset.side = c.codec.side = std::stoi(v); }},
        {"dataset.channels", [](ExperimentConfig& c, const std::string& v) { c.dataset.channels = c.codec.channels = std::stoi(v); }},
        {"dataset.count", [](ExperimentConfig& c, const std::string& v) { c.dataset.count = std::stoi(v); }},
        {"dataset.train_fraction", [](ExperimentConfig& c, const std::string& v) { c.dataset.train_fraction = std::stod(v); }},
        {"dataset.val_fraction", [](ExperimentConfig& c, const std::string& v) { c.dataset.val_fraction = std::stod(v); }},
        {"dataset.test_fraction", [](ExperimentConfig& c, const std::string& v) { c.dataset.test_fraction = std::stod(v); }},
        {"codec.n", [](ExperimentConfig& c, const std::string& v) { c.codec.n = std::stoi(v); }},
        {"codec.filters", [](ExperimentConfig& c, const std::string& v) { c.codec.filters = std::stoi(v); }},
        {"codec.strength", [](ExperimentConfig& c, const std::string& v) { c.codec.strength = std::stod(v); }},
        {"train.learning_rate", [](ExperimentConfig& c, const std::string& v) { c.learning_rate = std::stod(v); }},
        {"train.batch_size", [](ExperimentConfig& c, const std::string& v) { c.batch_size = std::stoi(v); }},
        {"train.phase1_epochs", [](ExperimentConfig& c, const std::string& v) { c.phase1_epochs = std::stoi(v); }},
        {"train.phase2_epochs", [](ExperimentConfig& c, const std::string& v) { c.phase2_epochs = std::stoi(v); }},
        {"train.interleave", [](ExperimentConfig& c, const std::string& v) { c.interleave_phases = parse_bool(v); }},
        {"train.eta_message", [](ExperimentConfig& c, const std::string& v) { c.weights.message = std::stod(v); }},
        {"train.eta_residual", [](ExperimentConfig& c, const std::string& v) { c.weights.residual = std::stod(v); }},
        {"train.lambda_ril", [](ExperimentConfig& c, const std::string& v) { c.weights.ril = std::stod(v); }},
        {"regimes", [](ExperimentConfig& c, const std::string& v) { c.regimes = split_list(v); }},
        {"regime.gaussian_sigma", [](ExperimentConfig& c, const std::string& v) { c.gaussian_sigma = std::stod(v); }},
        {"regime.affine_sigma", [](ExperimentConfig& c, const std::string& v) { c.affine_sigma = std::stod(v); }},
        {"ril", [](ExperimentConfig& c, const std::string& v) { c.ril = v; }},
        {"verify.fpr", [](ExperimentConfig& c, const std::string& v) { c.verify_fpr = std::stod(v); }},
        {"smooth.sigma", [](ExperimentConfig& c, const std::string& v) { c.smoothing.sigma = std::stod(v); }},
        {"smooth.space",
         [](ExperimentConfig& c, const std::string& v) {
             if (v == "pixel") c.smoothing.space = SmoothingConfig::Space::PixelGaussian;
             else if (v == "affine") c.smoothing.space = SmoothingConfig::Space::Affine;
             else throw std::invalid_argument("config: smooth.space must be pixel or affine");
         }},
        {"smooth.n0", [](ExperimentConfig& c, const std::string& v) { c.smoothing.n0 = std::stoi(v); }},
        {"smooth.n", [](ExperimentConfig& c, const std::string& v) { c.smoothing.n = std::stoi(v); }},
        {"smooth.alpha", [](ExperimentConfig& c, const std::string& v) { c.smoothing.alpha = std::stod(v); }},
        {"certify.samples", [](ExperimentConfig& c, const std::string& v) { c.certify_samples = std::stoi(v); }},
        {"attack.users", [](ExperimentConfig& c, const std::string& v) { c.attack_users = std::stoi(v); }},
        {"attack.images_per_user", [](ExperimentConfig& c, const std::string& v) { c.attack_images_per_user = std::stoi(v); }},
        {"attack.forge_m",
         [](ExperimentConfig& c, const std::string& v) {
             c.forge_m.clear();
             for (const auto& item : split_list(v)) c.forge_m.push_back(std::stoi(item));
         }},
        {"attack.zeta", [](ExperimentConfig& c, const std::string& v) { c.zeta = std::stod(v); }},
        {"attack.pca_dims", [](ExperimentConfig& c, const std::string& v) { c.pca_dims = std::stoi(v); }},
        {"attack.residual", [](ExperimentConfig& c, const std::string& v) { c.residual_source = v; }},
        {"seed", [](ExperimentConfig& c, const std::string& v) { c.seed = std::stoull(v); }},
        {"out_dir", [](ExperimentConfig& c, const std::string& v) { c.out_dir = v; }},
        {"threads", [](ExperimentConfig& c, const std::string& v) { c.threads = std::stoi(v); }},
        {"dry_run", [](ExperimentConfig& c, const std::string& v) { c.dry_run = parse_bool(v); }},
        {"plots", [](ExperimentConfig& c, const std::string& v) { c.plots = parse_bool(v); }},
    };

    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        bool found = false;
        for (const auto& [name, setter] : keys) {
            if (name == key) {
                setter(c, value);
                found = true;
                break;
            }
        }
        if (!found)
            throw std::invalid_argument("config: unknown key '" + key + "'");
    }
    return c;
}

ExperimentConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

std::string canonical_config_text(const ExperimentConfig& c) {
    std::ostringstream o;
    o << "dataset.source = "
      << (c.dataset.source == DatasetSpec::Source::Synthetic ? "synthetic" : "directory")
      << "\n";
    if (!c.dataset.directory.empty())
        o << "dataset.directory = " << c.dataset.directory << "\n";
    o << "dataset.side = " << c.dataset.side << "\n";
    o << "dataset.channels = " << c.dataset.channels << "\n";
    o << "dataset.count = " << c.dataset.count << "\n";
    o << "dataset.train_fraction = " << fmt_double(c.dataset.train_fraction, 6) << "\n";
    o << "dataset.val_fraction = " << fmt_double(c.dataset.val_fraction, 6) << "\n";
    o << "dataset.test_fraction = " << fmt_double(c.dataset.test_fraction, 6) << "\n";
    o << "codec.n = " << c.codec.n << "\n";
    o << "codec.filters = " << c.codec.filters << "\n";
    o << "codec.strength = " << fmt_double(c.codec.strength, 6) << "\n";
    o << "train.learning_rate = " << fmt_double(c.learning_rate, 8) << "\n";
    o << "train.batch_size = " << c.batch_size << "\n";
    o << "train.phase1_epochs = " << c.phase1_epochs << "\n";
    o << "train.phase2_epochs = " << c.phase2_epochs << "\n";
    o << "train.interleave = " << (c.interleave_phases ? 1 : 0) << "\n";
    o << "train.eta_message = " << fmt_double(c.weights.message, 6) << "\n";
    o << "train.eta_residual = " << fmt_double(c.weights.residual, 6) << "\n";
    o << "train.lambda_ril = " << fmt_double(c.weights.ril, 6) << "\n";
    o << "regimes = ";
    for (size_t i = 0; i < c.regimes.size(); ++i)
        o << (i ? "," : "") << c.regimes[i];
    o << "\n";
    o << "regime.gaussian_sigma = " << fmt_double(c.gaussian_sigma, 6) << "\n";
    o << "regime.affine_sigma = " << fmt_double(c.affine_sigma, 6) << "\n";
    o << "ril = " << c.ril << "\n";
    o << "verify.fpr = " << fmt_double(c.verify_fpr, 8) << "\n";
    o << "smooth.sigma = " << fmt_double(c.smoothing.sigma, 6) << "\n";
    o << "smooth.space = "
      << (c.smoothing.space == SmoothingConfig::Space::PixelGaussian ? "pixel" : "affine")
      << "\n";
    o << "smooth.n0 = " << c.smoothing.n0 << "\n";
    o << "smooth.n = " << c.smoothing.n << "\n";
    o << "smooth.alpha = " << fmt_double(c.smoothing.alpha, 8) << "\n";
    o << "certify.samples = " << c.certify_samples << "\n";
    o << "attack.users = " << c.attack_users << "\n";
    o << "attack.images_per_user = " << c.attack_images_per_user << "\n";
    o << "attack.forge_m = ";
    for (size_t i = 0; i < c.forge_m.size(); ++i)
        o << (i ? "," : "") << c.forge_m[i];
    o << "\n";
    o << "attack.zeta = " << fmt_double(c.zeta, 6) << "\n";
    o << "attack.pca_dims = " << c.pca_dims << "\n";
    o << "attack.residual = " << c.residual_source << "\n";
    o << "seed = " << c.seed << "\n";
    o << "out_dir = " << c.out_dir << "\n";
    o << "threads = " << c.threads << "\n";
    o << "dry_run = " << (c.dry_run ? 1 : 0) << "\n";
    o << "plots = " << (c.plots ? 1 : 0) << "\n";
    return o.str();
}

namespace {

struct RegimeVariant {
    std::string regime;
    bool with_ril = false;
    std::string tag;
    double sigma = 0.0;
};

std::vector<RegimeVariant> expand_regimes(const ExperimentConfig& c) {
    std::vector<RegimeVariant> out;
    for (const auto& regime : c.regimes) {
        double sigma = 0.0;
        if (regime == "w-cr-gaussian") sigma = c.gaussian_sigma;
        if (regime == "w-cr-affine") sigma = c.affine_sigma;
        const auto add = [&](bool ril) {
            RegimeVariant v;
            v.regime = regime;
            v.with_ril = ril;
            v.sigma = sigma;
            v.tag = regime + (ril ? "-ril" : "");
            out.push_back(v);
        };
        if (c.ril == "none" || c.ril == "both") add(false);
        if (c.ril == "with" || c.ril == "both") add(true);
    }
    return out;
}

struct EvalStats {
    double psnr_mean = 0.0;
    double ssim_mean = 0.0;
    double clean_bit_acc = 0.0;
    double clean_acc = 0.0;
};

EvalStats evaluate_regime(const CodecParams& params,
                          const std::vector<Image>& test_images, double tau,
                          uint64_t seed) {
    EvalStats stats;
    Rng secrets(derive_seed(seed, "eval-bits"));
    double psnr_sum = 0.0, ssim_sum = 0.0, acc_sum = 0.0;
    int pass_count = 0;
    for (const auto& x : test_images) {
        const BitMessage t = BitMessage::random(params.config.n, secrets);
        const Image w = encode(params, x, t);
        const double p = psnr(w, x);
        psnr_sum += std::isinf(p) ? 100.0 : p;  // identical image: cap for the mean
        ssim_sum += ssim(w, x);
        const VerificationResult v = verify(decode_bits(decode_probs(params, w)), t, tau);
        acc_sum += v.bit_accuracy;
        pass_count += v.pass;
    }
    const double count = static_cast<double>(test_images.size());
    stats.psnr_mean = psnr_sum / count;
    stats.ssim_mean = ssim_sum / count;
    stats.clean_bit_acc = acc_sum / count;
    stats.clean_acc = pass_count / count;
    return stats;
}

}  // namespace

AttackCampaignStats attack_campaign(const ExperimentConfig& config,
                                    const CodecParams& params,
                                    const std::vector<Image>& observed_pool,
                                    const std::vector<Image>& fresh_pool,
                                    double tau, const std::string& tag) {
    AttackCampaignStats stats;
    const uint64_t seed = derive_seed(config.seed, "attack-" + tag);
    Rng secret_rng(derive_seed(seed, "secrets"));
    const int users = config.attack_users;
    const int ipu = std::min<int>(config.attack_images_per_user,
                                  static_cast<int>(observed_pool.size()));

    std::vector<BitMessage> user_secret;
    std::vector<std::vector<ResidualImage>> user_residuals(users);
    for (int u = 0; u < users; ++u) {
        user_secret.push_back(BitMessage::random(params.config.n, secret_rng));
        for (int j = 0; j < ipu; ++j) {
            const Image& x =
                observed_pool[(static_cast<size_t>(u) * ipu + j) % observed_pool.size()];
            const Image w = encode(params, x, user_secret[u]);
            user_residuals[u].push_back(config.residual_source == "exact"
                                            ? estimate_residual(w, x)
                                            : estimate_residual_lowpass(w));
        }
    }

    // Forgery: overlay averaged residuals on fresh originals.
    for (int m : config.forge_m) {
        const int use = std::min(m, ipu);
        double acc = 0.0, pass = 0.0, psnr_sum = 0.0, ssim_sum = 0.0;
        for (int u = 0; u < users; ++u) {
            const std::vector<ResidualImage> subset(
                user_residuals[u].begin(), user_residuals[u].begin() + use);
            const Image& target = fresh_pool[u % fresh_pool.size()];
            const Image forged = forge(subset, target, config.zeta);
            const VerificationResult v =
                verify(decode_bits(decode_probs(params, forged)), user_secret[u], tau);
            acc += v.bit_accuracy;
            pass += v.pass;
            const double p = psnr(forged, target);
            psnr_sum += std::isinf(p) ? 100.0 : p;
            ssim_sum += ssim(forged, target);
        }
        stats.forged_bit_acc.push_back(acc / users);
        stats.forged_pass_rate.push_back(pass / users);
        stats.forged_psnr.push_back(psnr_sum / users);
        stats.forged_ssim.push_back(ssim_sum / users);
    }

    // Extraction: bit-by-bit recovery from the first residual of each user.
    const EncoderOracle oracle = [&params](const Image& x, const BitMessage& t) {
        return encode(params, x, t);
    };
    double extract_acc = 0.0;
    for (int u = 0; u < users; ++u) {
        const Image& probe = fresh_pool[(u + users) % fresh_pool.size()];
        const ExtractionResult res =
            extract_secret(oracle, user_residuals[u][0], probe, params.config.n);
        extract_acc += bit_accuracy(res.secret, user_secret[u]);
    }
    stats.attack_bit_acc = extract_acc / users;

    // Linking: cluster all residuals and score the partition.
    std::vector<ResidualImage> all;
    for (const auto& list : user_residuals)
        for (const auto& z : list) all.push_back(z);
    const LinkingResult link =
        link_identities(all, users, config.pca_dims, derive_seed(seed, "link"));
    stats.silhouette = link.silhouette;
    return stats;
}

namespace {

class StageClock {
public:
    explicit StageClock(Manifest& manifest) : manifest_(manifest) {}

    template <typename Fn>
    void run(const std::string& name, Fn&& fn) {
        const auto begin = std::chrono::steady_clock::now();
        fn();
        const std::chrono::duration<double> elapsed =
            std::chrono::steady_clock::now() - begin;
        manifest_.add_stage(name, elapsed.count());
    }

private:
    Manifest& manifest_;
};

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
    namespace fs = std::filesystem;
    config.validate();
    fs::create_directories(config.out_dir);
    const std::string config_text = canonical_config_text(config);
    {
        std::ofstream cfg(config.out_dir + "/config.txt", std::ios::binary);
        cfg << config_text;
    }

    Manifest manifest(config.seed, config_text);
    ExperimentResult result;
    const auto out_path = [&](const std::string& name) {
        return config.out_dir + "/" + name;
    };

    if (config.dry_run) {
        manifest.add_output(out_path("config.txt"));
        manifest.set_status("dry-run");
        manifest.write(out_path("manifest.json"));
        return result;
    }

    StageClock clock(manifest);
    try {
        DatasetSplits splits;
        clock.run("dataset", [&] { splits = load_dataset(config.dataset); });
        if (splits.test.empty() || splits.val.empty())
            throw std::runtime_error("experiment: empty validation or test split");

        const ThresholdResult threshold =
            compute_threshold(config.codec.n, config.verify_fpr);

        CsvWriter metrics(out_path("metrics.csv"),
                          {"regime", "sigma", "ril", "psnr", "ssim",
                           "clean_bit_acc", "clean_acc", "n", "tau"});
        manifest.add_output(out_path("metrics.csv"));
        CsvWriter attacks_csv(
            out_path("attacks.csv"),
            {"regime", "sigma", "m", "zeta", "forged_bit_acc", "forged_pass_rate",
             "attack_bit_acc", "silhouette", "forged_psnr", "forged_ssim"});
        manifest.add_output(out_path("attacks.csv"));

        for (const RegimeVariant& variant : expand_regimes(config)) {
            RegimeSummary summary;
            summary.tag = variant.tag;

            CodecParams params = init_codec(config.codec);
            clock.run("train-" + variant.tag, [&] {
                TrainConfig tc;
                tc.learning_rate = config.learning_rate;
                tc.batch_size = config.batch_size;
                tc.phase1_epochs = config.phase1_epochs;
                tc.phase2_epochs = variant.with_ril ? config.phase2_epochs : 0;
                tc.interleave_phases = config.interleave_phases;
                tc.weights = config.weights;
                tc.perturbation = regime_perturbation(variant.regime, variant.sigma);
                tc.seed = derive_seed(config.seed, "train-" + variant.tag);
                tc.regime = variant.regime;
                auto [trained, report] =
                    train(tc, splits.train, splits.val, config.codec);
                params = std::move(trained);

                CsvWriter tr(out_path("train_" + variant.tag + ".csv"),
                             {"epoch", "phase", "loss_message", "loss_residual",
                              "loss_ril", "train_bit_acc", "val_bit_acc"});
                for (const EpochStats& row : report.epochs)
                    tr.row({fmt_int(row.epoch), fmt_int(row.phase),
                            fmt_double(row.loss_message, 6),
                            fmt_double(row.loss_residual, 8),
                            fmt_double(row.loss_ril, 6),
                            fmt_double(row.train_bit_acc, 6),
                            fmt_double(row.val_bit_acc, 6)});
                manifest.add_output(out_path("train_" + variant.tag + ".csv"));

                save_model(params, out_path("model_" + variant.tag + ".wirm"));
                manifest.add_output(out_path("model_" + variant.tag + ".wirm"));
            });

            clock.run("eval-" + variant.tag, [&] {
                const EvalStats stats = evaluate_regime(
                    params, splits.test, threshold.tau,
                    derive_seed(config.seed, "eval-" + variant.tag));
                summary.psnr = stats.psnr_mean;
                summary.ssim = stats.ssim_mean;
                summary.clean_bit_acc = stats.clean_bit_acc;
                summary.clean_acc = stats.clean_acc;
                metrics.row({variant.tag, fmt_double(variant.sigma, 4),
                             fmt_int(variant.with_ril ? 1 : 0),
                             fmt_double(stats.psnr_mean, 4),
                             fmt_double(stats.ssim_mean, 6),
                             fmt_double(stats.clean_bit_acc, 6),
                             fmt_double(stats.clean_acc, 6),
                             fmt_int(config.codec.n),
                             fmt_double(threshold.tau, 6)});
            });

            clock.run("certify-" + variant.tag, [&] {
                SmoothingConfig smooth = config.smoothing;
                smooth.threads = config.threads;
                const int count = std::min<int>(config.certify_samples,
                                                static_cast<int>(splits.test.size()));
                Rng secrets(derive_seed(config.seed, "cert-bits-" + variant.tag));

                CsvWriter rows(out_path("certify_" + variant.tag + ".csv"),
                               {"sample", "decision", "p_lower", "radius"});
                CsvWriter timing(out_path("certify_timing_" + variant.tag + ".csv"),
                                 {"sample", "wall_ms"});
                std::vector<std::pair<CertOutcome, int>> outcomes;
                for (int i = 0; i < count; ++i) {
                    const BitMessage t = BitMessage::random(params.config.n, secrets);
                    const Image w = encode(params, splits.test[i], t);
                    const auto begin = std::chrono::steady_clock::now();
                    const CertOutcome outcome = certify(
                        params, w, t, threshold.tau, smooth,
                        derive_seed(config.seed, "cert-" + variant.tag,
                                    static_cast<uint64_t>(i)));
                    const std::chrono::duration<double, std::milli> ms =
                        std::chrono::steady_clock::now() - begin;
                    outcomes.emplace_back(outcome, 1);
                    const std::string decision =
                        outcome.decision == CertDecision::Abstain
                            ? "abstain"
                            : fmt_int(outcome.decision == CertDecision::Class1 ? 1 : 0);
                    rows.row({fmt_int(i), decision, fmt_double(outcome.p_lower, 9),
                              fmt_double(outcome.radius, 6)});
                    timing.row({fmt_int(i), fmt_double(ms.count(), 3)});
                }
                manifest.add_output(out_path("certify_" + variant.tag + ".csv"));
                manifest.add_output(out_path("certify_timing_" + variant.tag + ".csv"));

                std::vector<double> grid;
                for (int g = 0; g <= 20; ++g)
                    grid.push_back(smooth.sigma * 4.0 * g / 20.0);
                const std::vector<double> curve =
                    certified_accuracy_curve(outcomes, grid);
                summary.certified_acc = curve.front();
                CsvWriter curve_csv(out_path("curve_" + variant.tag + ".csv"),
                                    {"radius", "certified_accuracy"});
                for (size_t g = 0; g < grid.size(); ++g)
                    curve_csv.row({fmt_double(grid[g], 6), fmt_double(curve[g], 6)});
                manifest.add_output(out_path("curve_" + variant.tag + ".csv"));
                if (config.plots) {
                    fs::create_directories(out_path("plots"));
                    CsvWriter plot(out_path("plots/certified_" + variant.tag + ".csv"),
                                   {"radius", "certified_accuracy"});
                    for (size_t g = 0; g < grid.size(); ++g)
                        plot.row({fmt_double(grid[g], 6), fmt_double(curve[g], 6)});
                    manifest.add_output(out_path("plots/certified_" + variant.tag + ".csv"));
                }
            });

            clock.run("attacks-" + variant.tag, [&] {
                const AttackCampaignStats stats =
                    attack_campaign(config, params, splits.test, splits.val,
                                    threshold.tau, variant.tag);
                for (size_t mi = 0; mi < config.forge_m.size(); ++mi) {
                    attacks_csv.row(
                        {variant.tag, fmt_double(variant.sigma, 4),
                         fmt_int(config.forge_m[mi]), fmt_double(config.zeta, 4),
                         fmt_double(stats.forged_bit_acc[mi], 6),
                         fmt_double(stats.forged_pass_rate[mi], 6),
                         fmt_double(stats.attack_bit_acc, 6),
                         fmt_double(stats.silhouette, 6),
                         fmt_double(stats.forged_psnr[mi], 4),
                         fmt_double(stats.forged_ssim[mi], 6)});
                }
                summary.forged_bit_acc = stats.forged_bit_acc.back();
                summary.forged_pass_rate = stats.forged_pass_rate.back();
                summary.attack_bit_acc = stats.attack_bit_acc;
                summary.silhouette = stats.silhouette;
            });

            result.regimes.push_back(summary);
        }
    } catch (const std::exception& e) {
        manifest.set_status("failed", e.what());
        manifest.write(out_path("manifest.json"));
        result.exit_code = 1;
        return result;
    }

    manifest.add_output(out_path("manifest.json"));
    manifest.write(out_path("manifest.json"));
    return result;
}

}  // namespace wmlab
