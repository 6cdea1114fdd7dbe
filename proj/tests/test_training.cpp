#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "wmlab/codec.hpp"
#include "wmlab/core.hpp"
#include "wmlab/rng.hpp"
#include "wmlab/training.hpp"

using namespace wmlab;

namespace {

CodecConfig tiny_config() {
    CodecConfig cfg;
    cfg.n = 6;
    cfg.channels = 1;
    cfg.side = 12;
    cfg.filters = 5;
    cfg.strength = 0.05;
    cfg.seed = 11;
    return cfg;
}

std::vector<Image> interior_batch(int count, int side, uint64_t seed) {
    std::vector<Image> batch;
    Rng rng(seed);
    for (int i = 0; i < count; ++i) {
        Image img = Image::zeros(side, side, 1);
        for (auto& v : img.pixels) v = rng.uniform(0.25, 0.75);
        batch.push_back(std::move(img));
    }
    return batch;
}

}  // namespace

TEST_CASE("loss_message fixtures") {
    BitProbabilities sharp;
    sharp.p = {1.0 - 1e-6, 1.0 - 1e-6};
    CHECK(loss_message(sharp, BitMessage::from_string("11")) ==
          doctest::Approx(1e-6).epsilon(1e-3));

    BitProbabilities flat;
    flat.p = {0.5, 0.5, 0.5};
    CHECK(loss_message(flat, BitMessage::from_string("101")) ==
          doctest::Approx(std::log(2.0)).epsilon(1e-12));

    BitProbabilities single;
    single.p = {0.9};
    CHECK(loss_message(single, BitMessage::from_string("1")) ==
          doctest::Approx(-std::log(0.9)).epsilon(1e-12));

    CHECK_THROWS_AS(loss_message(single, BitMessage::from_string("10")),
                    std::invalid_argument);
}

TEST_CASE("loss_residual fixtures") {
    Rng rng(3);
    Image x = Image::zeros(10, 10, 1);
    for (auto& v : x.pixels) v = rng.uniform(0.1, 0.8);
    CHECK(loss_residual(x, x) == 0.0);

    Image off = x;
    for (auto& v : off.pixels) v += 0.1;
    CHECK(loss_residual(off, x) == doctest::Approx(0.01).epsilon(1e-12));

    // Brute-force recomputation on random pairs.
    Image w = x;
    for (auto& v : w.pixels) v = rng.uniform(0.0, 1.0);
    double acc = 0.0;
    for (size_t i = 0; i < x.pixels.size(); ++i) {
        const double d = w.pixels[i] - x.pixels[i];
        acc += d * d;
    }
    CHECK(loss_residual(w, x) ==
          doctest::Approx(acc / x.pixels.size()).epsilon(1e-12));
}

TEST_CASE("loss_total weighting") {
    LossWeights w;
    w.message = 1.0;
    w.residual = 0.0;
    CHECK(loss_total(0.1, 0.5, w) == doctest::Approx(0.1));
    w.message = 0.0;
    w.residual = 1.0;
    CHECK(loss_total(0.1, 0.5, w) == doctest::Approx(0.5));
    w.message = 1.0;
    w.residual = 10.0;
    CHECK(loss_total(0.1, 0.01, w) == doctest::Approx(0.2).epsilon(1e-12));
}

TEST_CASE("kl_bernoulli fixtures and exhaustive factorization oracle") {
    BitProbabilities p, q;
    p.p = {0.3, 0.8};
    q.p = {0.3, 0.8};
    CHECK(kl_bernoulli(p, q) == doctest::Approx(0.0));

    BitProbabilities a, b;
    a.p = {0.9};
    b.p = {0.5};
    CHECK(kl_bernoulli(a, b) == doctest::Approx(0.368064).epsilon(1e-5));

    // Factorized KL equals the exhaustive joint KL over all 2^n outcomes.
    Rng rng(5);
    for (int n = 1; n <= 3; ++n) {
        BitProbabilities pp, qq;
        for (int i = 0; i < n; ++i) {
            pp.p.push_back(rng.uniform(0.05, 0.95));
            qq.p.push_back(rng.uniform(0.05, 0.95));
        }
        double joint = 0.0;
        for (int mask = 0; mask < (1 << n); ++mask) {
            double prob_p = 1.0, prob_q = 1.0;
            for (int i = 0; i < n; ++i) {
                const bool bit = mask & (1 << i);
                prob_p *= bit ? pp.p[i] : 1.0 - pp.p[i];
                prob_q *= bit ? qq.p[i] : 1.0 - qq.p[i];
            }
            joint += prob_p * std::log(prob_p / prob_q);
        }
        CHECK(kl_bernoulli(pp, qq) == doctest::Approx(joint).epsilon(1e-10));
    }

    // Non-negativity over random pairs.
    for (int trial = 0; trial < 100; ++trial) {
        BitProbabilities pp, qq;
        for (int i = 0; i < 4; ++i) {
            pp.p.push_back(rng.uniform(1e-6, 1.0 - 1e-6));
            qq.p.push_back(rng.uniform(1e-6, 1.0 - 1e-6));
        }
        CHECK(kl_bernoulli(pp, qq) >= -1e-12);
    }
}

TEST_CASE("loss_ril sign and antisymmetry") {
    // Desired regime: w decodes sharply to the secret, z decodes to chance.
    BitProbabilities sharp, flat;
    for (int i = 0; i < 4; ++i) {
        sharp.p.push_back(0.999);
        flat.p.push_back(0.5);
    }
    CHECK(loss_ril(sharp, flat) < 0.0);
    CHECK(loss_ril(sharp, sharp) == doctest::Approx(0.0));
    CHECK(loss_ril(flat, sharp) == doctest::Approx(-loss_ril(sharp, flat)));

    Rng rng(6);
    for (int trial = 0; trial < 50; ++trial) {
        BitProbabilities a, b;
        for (int i = 0; i < 5; ++i) {
            a.p.push_back(rng.uniform(0.01, 0.99));
            b.p.push_back(rng.uniform(0.01, 0.99));
        }
        CHECK(loss_ril(a, b) == doctest::Approx(-loss_ril(b, a)).epsilon(1e-12));
    }
}

TEST_CASE("adam_step basics") {
    CodecConfig cfg = tiny_config();
    CodecParams params = init_codec(cfg);
    CodecParams before = params;
    OptimizerState state = OptimizerState::zeros_like(params);

    CodecGrads zero = CodecGrads::zeros_like(params);
    adam_step(params, zero, state, 1e-3);
    CHECK(state.step == 1);
    auto va = tensor_views(params);
    auto vb = tensor_views(before);
    for (size_t i = 0; i < va.size(); ++i)
        for (size_t j = 0; j < va[i].size; ++j)
            CHECK(va[i].data[j] == vb[i].data[j]);

    // Constant unit gradient: the bias-corrected first step is almost -lr.
    CodecGrads ones = CodecGrads::zeros_like(params);
    for (auto& t : ones.g) std::fill(t.begin(), t.end(), 1.0);
    OptimizerState fresh = OptimizerState::zeros_like(params);
    CodecParams moved = before;
    adam_step(moved, ones, fresh, 1e-3);
    auto vm = tensor_views(moved);
    for (size_t i = 0; i < vm.size(); ++i)
        for (size_t j = 0; j < vm[i].size; ++j)
            CHECK(static_cast<double>(vm[i].data[j]) ==
                  doctest::Approx(static_cast<double>(vb[i].data[j]) - 1e-3)
                      .epsilon(1e-4));

    CodecGrads bad = CodecGrads::zeros_like(params);
    bad.g[0][0] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(adam_step(params, bad, state, 1e-3), TrainingDiverged);
}

TEST_CASE("grad_check: total loss path") {
    const CodecConfig cfg = tiny_config();
    const CodecParams params = init_codec(cfg);
    const auto batch = interior_batch(3, cfg.side, 21);
    LossWeights weights;

    GradCheckOptions opts;
    opts.path = GradCheckPath::Total;
    opts.sample_weights = 120;
    const double err = grad_check(params, batch, weights, opts);
    CHECK(err < 1e-4);
}

TEST_CASE("grad_check: residual information path") {
    const CodecConfig cfg = tiny_config();
    const CodecParams params = init_codec(cfg);
    const auto batch = interior_batch(3, cfg.side, 22);
    LossWeights weights;

    GradCheckOptions opts;
    opts.path = GradCheckPath::ResidualInfo;
    opts.sample_weights = 120;
    const double err = grad_check(params, batch, weights, opts);
    CHECK(err < 1e-4);
}

TEST_CASE("grad_check detects a corrupted gradient") {
    const CodecConfig cfg = tiny_config();
    const CodecParams params = init_codec(cfg);
    const auto batch = interior_batch(2, cfg.side, 23);
    LossWeights weights;

    GradCheckOptions opts;
    opts.sample_weights = 40;
    opts.corrupt_sample = 17;
    const double err = grad_check(params, batch, weights, opts);
    CHECK(err > 1e-2);
}

TEST_CASE("train: zero epochs returns the initialized codec") {
    const CodecConfig cfg = tiny_config();
    const auto images = interior_batch(8, cfg.side, 24);
    TrainConfig tc;
    tc.phase1_epochs = 0;
    tc.phase2_epochs = 0;
    auto [params, report] = train(tc, images, images, cfg);
    CHECK(report.epochs.empty());

    CodecParams fresh = init_codec(cfg);
    auto va = tensor_views(params), vf = tensor_views(fresh);
    for (size_t i = 0; i < va.size(); ++i)
        for (size_t j = 0; j < va[i].size; ++j)
            CHECK(va[i].data[j] == vf[i].data[j]);
}

TEST_CASE("train: phase 2 freezes the decoder bitwise") {
    const CodecConfig cfg = tiny_config();
    const auto images = interior_batch(12, cfg.side, 25);

    TrainConfig p1;
    p1.phase1_epochs = 2;
    p1.batch_size = 4;
    p1.seed = 9;
    auto [base, r1] = train(p1, images, images, cfg);

    TrainConfig p12 = p1;
    p12.phase2_epochs = 2;
    auto [tuned, r2] = train(p12, images, images, cfg);

    // Same phase-1 stream: decoder tensors identical, encoder tensors moved.
    auto vb = tensor_views(base), vt = tensor_views(tuned);
    for (size_t i = kEncoderTensorCount; i < vb.size(); ++i)
        for (size_t j = 0; j < vb[i].size; ++j)
            CHECK(vb[i].data[j] == vt[i].data[j]);
    bool encoder_moved = false;
    for (size_t i = 0; i < kEncoderTensorCount && !encoder_moved; ++i)
        for (size_t j = 0; j < vb[i].size; ++j)
            if (vb[i].data[j] != vt[i].data[j]) {
                encoder_moved = true;
                break;
            }
    CHECK(encoder_moved);

    // Phase rows appear in the report.
    bool has_phase2 = false;
    for (const auto& row : r2.epochs) has_phase2 |= row.phase == 2;
    CHECK(has_phase2);

    // Phase-1 training moves both networks.
    CodecParams fresh = init_codec(cfg);
    auto vf = tensor_views(fresh);
    bool decoder_moved = false;
    for (size_t i = kEncoderTensorCount; i < vb.size() && !decoder_moved; ++i)
        for (size_t j = 0; j < vb[i].size; ++j)
            if (vb[i].data[j] != vf[i].data[j]) {
                decoder_moved = true;
                break;
            }
    CHECK(decoder_moved);
}

TEST_CASE("train: determinism") {
    const CodecConfig cfg = tiny_config();
    const auto images = interior_batch(10, cfg.side, 26);
    TrainConfig tc;
    tc.phase1_epochs = 2;
    tc.batch_size = 4;
    tc.seed = 31;
    auto [a, ra] = train(tc, images, images, cfg);
    auto [b, rb] = train(tc, images, images, cfg);
    auto va = tensor_views(a), vb = tensor_views(b);
    for (size_t i = 0; i < va.size(); ++i)
        for (size_t j = 0; j < va[i].size; ++j)
            CHECK(va[i].data[j] == vb[i].data[j]);
    REQUIRE(ra.epochs.size() == rb.epochs.size());
    for (size_t i = 0; i < ra.epochs.size(); ++i)
        CHECK(ra.epochs[i].val_bit_acc == rb.epochs[i].val_bit_acc);
}

TEST_CASE("mutual_information_discrete fixtures") {
    // Independent table.
    std::vector<std::vector<double>> indep = {{0.25, 0.25}, {0.25, 0.25}};
    CHECK(mutual_information_discrete(indep) == doctest::Approx(0.0));

    // One-bit identity channel.
    std::vector<std::vector<double>> diag = {{0.5, 0.0}, {0.0, 0.5}};
    CHECK(mutual_information_discrete(diag) ==
          doctest::Approx(std::log(2.0)).epsilon(1e-12));

    // Random 4x4 table against an independent recomputation.
    Rng rng(7);
    std::vector<std::vector<double>> table(4, std::vector<double>(4));
    double sum = 0.0;
    for (auto& row : table)
        for (auto& v : row) {
            v = rng.uniform(0.01, 1.0);
            sum += v;
        }
    for (auto& row : table)
        for (auto& v : row) v /= sum;

    std::vector<double> pa(4, 0.0), pb(4, 0.0);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            pa[i] += table[i][j];
            pb[j] += table[i][j];
        }
    double expected = 0.0;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            expected += table[i][j] * std::log(table[i][j] / (pa[i] * pb[j]));
    CHECK(mutual_information_discrete(table) ==
          doctest::Approx(expected).epsilon(1e-12));

    std::vector<std::vector<double>> bad = {{0.5, 0.4}};
    CHECK_THROWS_AS(mutual_information_discrete(bad), std::invalid_argument);
}

TEST_CASE("regime_perturbation tags") {
    CHECK_FALSE(regime_perturbation("clean", 0.0).has_value());
    const auto er = regime_perturbation("w-er", 0.0);
    REQUIRE(er.has_value());
    CHECK(er->kind == PerturbationFamily::Kind::Mixture);
    const auto g = regime_perturbation("w-cr-gaussian", 0.25);
    REQUIRE(g.has_value());
    CHECK(g->sigma == 0.25);
    const auto a = regime_perturbation("w-cr-affine", 0.02);
    REQUIRE(a.has_value());
    CHECK(a->kind == PerturbationFamily::Kind::Affine);
    CHECK_THROWS_AS(regime_perturbation("bogus", 0.1), std::invalid_argument);
}
