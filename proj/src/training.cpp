#include "wmlab/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "wmlab/rng.hpp"

namespace wmlab {

double loss_message(const BitProbabilities& probs, const BitMessage& t) {
    if (probs.size() == 0 || probs.size() != t.size())
        throw std::invalid_argument("loss_message requires equal nonzero lengths");
    double acc = 0.0;
    for (size_t i = 0; i < t.size(); ++i) {
        const double p = probs.p[i];
        acc -= t.bits[i] ? std::log(p) : std::log(1.0 - p);
    }
    return acc / static_cast<double>(t.size());
}

double loss_residual(const Image& w, const Image& x) {
    if (!w.same_shape(x))
        throw std::invalid_argument("loss_residual: shape mismatch");
    double acc = 0.0;
    for (size_t i = 0; i < w.pixels.size(); ++i) {
        const double d = w.pixels[i] - x.pixels[i];
        acc += d * d;
    }
    return acc / static_cast<double>(w.pixels.size());
}

double kl_bernoulli(const BitProbabilities& p, const BitProbabilities& q) {
    if (p.size() != q.size())
        throw std::invalid_argument("kl_bernoulli requires equal lengths");
    double acc = 0.0;
    for (size_t i = 0; i < p.size(); ++i) {
        const double a = p.p[i], b = q.p[i];
        acc += a * std::log(a / b) + (1.0 - a) * std::log((1.0 - a) / (1.0 - b));
    }
    return acc;
}

double loss_ril(const BitProbabilities& probs_w, const BitProbabilities& probs_z) {
    return kl_bernoulli(probs_w, probs_z) - kl_bernoulli(probs_z, probs_w);
}

OptimizerState OptimizerState::zeros_like(CodecParams& params) {
    OptimizerState s;
    for (const auto& t : tensor_views(params)) {
        s.m.emplace_back(t.size, 0.0);
        s.v.emplace_back(t.size, 0.0);
    }
    return s;
}

void adam_step(CodecParams& params, const CodecGrads& grads,
               OptimizerState& state, double lr, size_t tensor_limit) {
    constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
    auto views = tensor_views(params);
    const size_t limit = std::min(tensor_limit, views.size());
    state.step += 1;
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(state.step));
    for (size_t ti = 0; ti < limit; ++ti) {
        auto& m = state.m[ti];
        auto& v = state.v[ti];
        const auto& g = grads.g[ti];
        float* w = views[ti].data;
        for (size_t i = 0; i < views[ti].size; ++i) {
            const double gi = g[i];
            if (!std::isfinite(gi))
                throw TrainingDiverged("non-finite gradient in optimizer step");
            m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * gi;
            v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * gi * gi;
            const double mhat = m[i] / c1;
            const double vhat = v[i] / c2;
            w[i] = static_cast<float>(static_cast<double>(w[i]) -
                                      lr * mhat / (std::sqrt(vhat) + kEps));
        }
    }
}

namespace {

struct Workspace {
    EncoderTrace enc;
    DecoderTrace dec;
    DecoderTrace dec_z;
    PlanarBuf grad_dec_input;
    PlanarBuf grad_dec_input_z;
    CodecGrads scratch;  // discarded decoder gradients of the phase-2 pass
    std::vector<double> grad_w;
};

std::vector<double> interleave(const PlanarBuf& buf) {
    std::vector<double> out(buf.v.size());
    const size_t ps = buf.plane_size();
    for (int c = 0; c < buf.ch; ++c) {
        const double* pl = buf.plane(c);
        for (size_t i = 0; i < ps; ++i) out[i * buf.ch + c] = pl[i];
    }
    return out;
}

struct Phase1Result {
    double l_message = 0.0;
    double l_residual = 0.0;
    int bits_correct = 0;
};

// Forward (and optionally backward) pass of one phase-1 sample. Gradients are
// accumulated unscaled into `grads` when non-null.
Phase1Result phase1_image(const CodecParams& params, const Image& x,
                          const BitMessage& t,
                          const std::optional<PerturbationFamily>& lp,
                          Rng& noise_rng, const LossWeights& weights,
                          CodecGrads* grads, Workspace& ws) {
    Phase1Result res;
    const Image w = encoder_forward(params, x, t, ws.enc);

    PerturbRecord record;
    Image perturbed =
        lp ? perturb_recorded(*lp, w, noise_rng, grads ? &record : nullptr) : w;

    const BitProbabilities probs =
        decoder_forward(params, planar_from_image(perturbed), ws.dec);
    res.l_message = loss_message(probs, t);
    res.l_residual = loss_residual(w, x);
    const BitMessage decoded = decode_bits(probs);
    for (size_t i = 0; i < t.size(); ++i)
        if (decoded.bits[i] == t.bits[i]) ++res.bits_correct;

    if (!grads) return res;

    const size_t n = t.size();
    std::vector<double> grad_p(n);
    for (size_t i = 0; i < n; ++i) {
        const double p = probs.p[i];
        const double ti = t.bits[i] ? 1.0 : 0.0;
        grad_p[i] = weights.message * (p - ti) /
                    (static_cast<double>(n) * p * (1.0 - p));
    }
    const std::vector<double> grad_logits = grad_probs_to_logits(ws.dec, grad_p);
    decoder_backward(params, ws.dec, grad_logits, *grads, &ws.grad_dec_input);

    ws.grad_w = interleave(ws.grad_dec_input);
    if (lp)
        ws.grad_w = perturb_backprop(record, ws.grad_w, w.width, w.height,
                                     w.channels);
    const double rscale = 2.0 * weights.residual / static_cast<double>(w.size());
    for (size_t i = 0; i < ws.grad_w.size(); ++i)
        ws.grad_w[i] += rscale * (w.pixels[i] - x.pixels[i]);
    encoder_backward(params, ws.enc, ws.grad_w, *grads);
    return res;
}

// One phase-2 sample: residual information loss through the frozen decoder.
// Encoder gradients accumulate into `grads`; decoder gradients land in the
// workspace scratch and are discarded.
double phase2_image(const CodecParams& params, const Image& x,
                    const BitMessage& t, CodecGrads* grads, Workspace& ws) {
    const Image w = encoder_forward(params, x, t, ws.enc);

    const BitProbabilities probs_w =
        decoder_forward(params, planar_from_image(w), ws.dec);

    PlanarBuf zbuf;
    zbuf.resize(w.channels, w.width, w.height);
    const size_t ps = zbuf.plane_size();
    for (int c = 0; c < w.channels; ++c) {
        double* pl = zbuf.plane(c);
        for (size_t i = 0; i < ps; ++i) {
            const size_t idx = i * w.channels + c;
            pl[i] = (w.pixels[idx] - x.pixels[idx]) + 0.5;
        }
    }
    const BitProbabilities probs_z = decoder_forward(params, zbuf, ws.dec_z);

    const double loss = loss_ril(probs_w, probs_z);
    if (!grads) return loss;

    const size_t n = probs_w.size();
    std::vector<double> grad_pw(n), grad_pz(n);
    for (size_t i = 0; i < n; ++i) {
        const double a = probs_w.p[i], b = probs_z.p[i];
        grad_pw[i] = std::log(a / b) - std::log((1.0 - a) / (1.0 - b)) + b / a -
                     (1.0 - b) / (1.0 - a);
        grad_pz[i] = -a / b + (1.0 - a) / (1.0 - b) - std::log(b / a) +
                     std::log((1.0 - b) / (1.0 - a));
    }

    decoder_backward(params, ws.dec, grad_probs_to_logits(ws.dec, grad_pw),
                     ws.scratch, &ws.grad_dec_input);
    decoder_backward(params, ws.dec_z, grad_probs_to_logits(ws.dec_z, grad_pz),
                     ws.scratch, &ws.grad_dec_input_z);

    ws.grad_w = interleave(ws.grad_dec_input);
    const std::vector<double> gz = interleave(ws.grad_dec_input_z);
    for (size_t i = 0; i < ws.grad_w.size(); ++i) ws.grad_w[i] += gz[i];
    encoder_backward(params, ws.enc, ws.grad_w, *grads);
    return loss;
}

double validation_bit_accuracy(const CodecParams& params,
                               const std::vector<Image>& val_images,
                               const std::vector<BitMessage>& val_secrets) {
    if (val_images.empty()) return 0.0;
    size_t correct = 0, total = 0;
    for (size_t i = 0; i < val_images.size(); ++i) {
        const Image w = encode(params, val_images[i], val_secrets[i]);
        const BitMessage decoded = decode_bits(decode_probs(params, w));
        for (size_t j = 0; j < decoded.size(); ++j) {
            if (decoded.bits[j] == val_secrets[i].bits[j]) ++correct;
            ++total;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(total);
}

}  // namespace

std::pair<CodecParams, TrainReport> train(const TrainConfig& config,
                                          const std::vector<Image>& train_images,
                                          const std::vector<Image>& val_images,
                                          const CodecConfig& codec_config) {
    codec_config.validate();
    config.weights.validate();
    if (train_images.empty())
        throw std::invalid_argument("train: dataset must be nonempty");
    if (config.batch_size < 1)
        throw std::invalid_argument("train: batch size must be >= 1");
    if (config.phase1_epochs < 0 || config.phase2_epochs < 0)
        throw std::invalid_argument("train: epoch counts must be >= 0");
    if (config.interleave_phases && config.phase2_epochs > config.phase1_epochs)
        throw std::invalid_argument(
            "train: interleaved phase-2 epochs cannot exceed phase-1 epochs");

    CodecParams params = init_codec(codec_config);
    TrainReport report;

    std::vector<BitMessage> val_secrets;
    {
        Rng vr(derive_seed(config.seed, "val-bits"));
        val_secrets.reserve(val_images.size());
        for (size_t i = 0; i < val_images.size(); ++i)
            val_secrets.push_back(BitMessage::random(codec_config.n, vr));
    }

    OptimizerState opt1 = OptimizerState::zeros_like(params);
    OptimizerState opt2 = OptimizerState::zeros_like(params);
    Workspace ws;
    ws.scratch = CodecGrads::zeros_like(params);
    CodecGrads grads = CodecGrads::zeros_like(params);
    CodecGrads grads2 = CodecGrads::zeros_like(params);

    const size_t count = train_images.size();
    std::vector<size_t> order(count);
    std::iota(order.begin(), order.end(), 0);

    const bool ril_active = config.phase2_epochs > 0;
    int epoch_row = 0;

    const auto zero_grads = [](CodecGrads& g) {
        for (auto& t : g.g) std::fill(t.begin(), t.end(), 0.0);
    };

    for (int epoch = 0; epoch < config.phase1_epochs; ++epoch) {
        Rng order_rng(derive_seed(config.seed, "order", epoch));
        order_rng.shuffle(order);
        Rng secret_rng(derive_seed(config.seed, "secrets", epoch));
        Rng noise_rng(derive_seed(config.seed, "noise", epoch));

        const bool interleave_now =
            config.interleave_phases && ril_active &&
            epoch >= config.phase1_epochs - config.phase2_epochs;

        double lm_sum = 0.0, lr_sum = 0.0, ril_sum = 0.0;
        size_t bits_correct = 0, images_seen = 0, ril_batches = 0;

        for (size_t start = 0; start < count; start += config.batch_size) {
            const size_t stop = std::min(count, start + config.batch_size);
            const double inv = 1.0 / static_cast<double>(stop - start);
            zero_grads(grads);
            std::vector<BitMessage> batch_secrets;
            batch_secrets.reserve(stop - start);
            for (size_t i = start; i < stop; ++i) {
                const Image& x = train_images[order[i]];
                batch_secrets.push_back(BitMessage::random(codec_config.n, secret_rng));
                const Phase1Result r =
                    phase1_image(params, x, batch_secrets.back(),
                                 config.perturbation, noise_rng, config.weights,
                                 &grads, ws);
                if (!std::isfinite(r.l_message) || !std::isfinite(r.l_residual))
                    throw TrainingDiverged("non-finite loss at epoch " +
                                           std::to_string(epoch));
                lm_sum += r.l_message;
                lr_sum += r.l_residual;
                bits_correct += r.bits_correct;
                ++images_seen;
            }
            grads.scale(inv);
            adam_step(params, grads, opt1, config.learning_rate);

            if (interleave_now) {
                zero_grads(grads2);
                double batch_ril = 0.0;
                size_t bi = 0;
                for (size_t i = start; i < stop; ++i, ++bi)
                    batch_ril += phase2_image(params, train_images[order[i]],
                                              batch_secrets[bi], &grads2, ws);
                if (!std::isfinite(batch_ril))
                    throw TrainingDiverged("non-finite residual-information loss at epoch " +
                                           std::to_string(epoch));
                grads2.scale(inv * config.weights.ril);
                adam_step(params, grads2, opt2, config.learning_rate,
                          kEncoderTensorCount);
                ril_sum += batch_ril * inv;
                ++ril_batches;
            }
        }

        EpochStats row;
        row.epoch = epoch_row++;
        row.phase = 1;
        row.loss_message = lm_sum / static_cast<double>(images_seen);
        row.loss_residual = lr_sum / static_cast<double>(images_seen);
        row.loss_ril = ril_batches ? ril_sum / static_cast<double>(ril_batches) : 0.0;
        row.train_bit_acc = static_cast<double>(bits_correct) /
                            (static_cast<double>(images_seen) * codec_config.n);
        row.val_bit_acc = validation_bit_accuracy(params, val_images, val_secrets);
        report.epochs.push_back(row);
    }

    if (ril_active && !config.interleave_phases) {
        for (int epoch = 0; epoch < config.phase2_epochs; ++epoch) {
            Rng order_rng(derive_seed(config.seed, "order-p2", epoch));
            order_rng.shuffle(order);
            Rng secret_rng(derive_seed(config.seed, "secrets-p2", epoch));

            double ril_sum = 0.0;
            size_t images_seen = 0;
            for (size_t start = 0; start < count; start += config.batch_size) {
                const size_t stop = std::min(count, start + config.batch_size);
                const double inv = 1.0 / static_cast<double>(stop - start);
                zero_grads(grads2);
                for (size_t i = start; i < stop; ++i) {
                    const BitMessage t = BitMessage::random(codec_config.n, secret_rng);
                    const double l =
                        phase2_image(params, train_images[order[i]], t, &grads2, ws);
                    if (!std::isfinite(l))
                        throw TrainingDiverged(
                            "non-finite residual-information loss at phase-2 epoch " +
                            std::to_string(epoch));
                    ril_sum += l;
                    ++images_seen;
                }
                grads2.scale(inv * config.weights.ril);
                adam_step(params, grads2, opt2, config.learning_rate,
                          kEncoderTensorCount);
            }

            EpochStats row;
            row.epoch = epoch_row++;
            row.phase = 2;
            row.loss_ril = ril_sum / static_cast<double>(images_seen);
            row.val_bit_acc =
                validation_bit_accuracy(params, val_images, val_secrets);
            report.epochs.push_back(row);
        }
    }

    return {std::move(params), std::move(report)};
}

namespace {

double eval_mean_loss(const CodecParams& params, const std::vector<Image>& batch,
                      const std::vector<BitMessage>& secrets,
                      const LossWeights& weights, GradCheckPath path,
                      Workspace& ws) {
    double total = 0.0;
    Rng unused(0);
    for (size_t i = 0; i < batch.size(); ++i) {
        if (path == GradCheckPath::Total) {
            const Phase1Result r = phase1_image(params, batch[i], secrets[i],
                                                std::nullopt, unused, weights,
                                                nullptr, ws);
            total += loss_total(r.l_message, r.l_residual, weights);
        } else {
            total += phase2_image(params, batch[i], secrets[i], nullptr, ws);
        }
    }
    return total / static_cast<double>(batch.size());
}

}  // namespace

double grad_check(const CodecParams& params, const std::vector<Image>& batch,
                  const LossWeights& weights, const GradCheckOptions& opts) {
    if (batch.empty()) throw std::invalid_argument("grad_check: empty batch");

    CodecParams work = params;
    Workspace ws;
    ws.scratch = CodecGrads::zeros_like(work);

    std::vector<BitMessage> secrets;
    {
        Rng br(derive_seed(opts.seed, "gc-bits"));
        for (size_t i = 0; i < batch.size(); ++i)
            secrets.push_back(BitMessage::random(work.config.n, br));
    }

    CodecGrads analytic = CodecGrads::zeros_like(work);
    {
        Rng unused(0);
        for (size_t i = 0; i < batch.size(); ++i) {
            if (opts.path == GradCheckPath::Total) {
                phase1_image(work, batch[i], secrets[i], std::nullopt, unused,
                             weights, &analytic, ws);
            } else {
                phase2_image(work, batch[i], secrets[i], &analytic, ws);
            }
        }
        analytic.scale(1.0 / static_cast<double>(batch.size()));
    }

    auto views = tensor_views(work);
    const size_t eligible = opts.path == GradCheckPath::ResidualInfo
                                ? kEncoderTensorCount
                                : views.size();

    Rng pick(derive_seed(opts.seed, "gc-pick"));
    double max_rel = 0.0;
    for (int k = 0; k < opts.sample_weights; ++k) {
        size_t ti;
        do {
            ti = pick.below(eligible);
        } while (views[ti].size == 0);
        const size_t wi = pick.below(views[ti].size);

        double ga = analytic.g[ti][wi];
        if (k == opts.corrupt_sample) ga = 0.0;

        float* slot = views[ti].data + wi;
        const float orig = *slot;
        const float wp = static_cast<float>(static_cast<double>(orig) + opts.fd_step);
        const float wm = static_cast<float>(static_cast<double>(orig) - opts.fd_step);

        *slot = wp;
        const double f_plus =
            eval_mean_loss(work, batch, secrets, weights, opts.path, ws);
        *slot = wm;
        const double f_minus =
            eval_mean_loss(work, batch, secrets, weights, opts.path, ws);
        *slot = orig;

        const double denom = static_cast<double>(wp) - static_cast<double>(wm);
        const double gn = (f_plus - f_minus) / denom;
        const double rel =
            std::fabs(ga - gn) / std::max({std::fabs(ga), std::fabs(gn), 1e-8});
        max_rel = std::max(max_rel, rel);
    }
    return max_rel;
}

double mutual_information_discrete(const std::vector<std::vector<double>>& joint) {
    if (joint.empty() || joint[0].empty())
        throw std::invalid_argument("mutual information: empty table");
    const size_t cols = joint[0].size();
    double sum = 0.0;
    for (const auto& row : joint) {
        if (row.size() != cols)
            throw std::invalid_argument("mutual information: ragged table");
        for (double v : row) {
            if (!(v >= 0.0))
                throw std::invalid_argument("mutual information: negative entry");
            sum += v;
        }
    }
    if (std::fabs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("mutual information: table must sum to 1");

    std::vector<double> pa(joint.size(), 0.0), pb(cols, 0.0);
    for (size_t i = 0; i < joint.size(); ++i)
        for (size_t j = 0; j < cols; ++j) {
            pa[i] += joint[i][j];
            pb[j] += joint[i][j];
        }

    double mi = 0.0;
    for (size_t i = 0; i < joint.size(); ++i)
        for (size_t j = 0; j < cols; ++j) {
            const double p = joint[i][j];
            if (p > 0.0) mi += p * std::log(p / (pa[i] * pb[j]));
        }
    return mi;
}

std::optional<PerturbationFamily> regime_perturbation(const std::string& regime,
                                                      double sigma) {
    if (regime == "clean") return std::nullopt;
    if (regime == "w-er") {
        std::vector<std::pair<PerturbationFamily, double>> branches;
        branches.emplace_back(PerturbationFamily::gaussian_pixel(0.05), 0.5);
        branches.emplace_back(PerturbationFamily::affine(0.005), 0.5);
        return PerturbationFamily::mixture(std::move(branches));
    }
    if (regime == "w-cr-gaussian") return PerturbationFamily::gaussian_pixel(sigma);
    if (regime == "w-cr-affine") return PerturbationFamily::affine(sigma);
    throw std::invalid_argument("unknown training regime: " + regime);
}

}  // namespace wmlab
