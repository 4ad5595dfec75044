#include <doctest.h>

#include <cmath>

#include "aidp/purifier.hpp"
#include "aidp/training.hpp"
#include "test_helpers.hpp"

using namespace aidp;
using namespace aidp::testing;

namespace {

/// Discriminator logit 3*x summed per example on flat input.
DiscLogitFn scaled_identity_disc(double k) {
    return [k](Tape& t, Var x) { return ops::per_example_sum(ops::scale(x, k)); };
}

struct StepRecorder : PurifyObserver {
    std::vector<Tensor> steps, pre, post;
    void on_step(int, const Tensor& step, const Tensor& pre_clip,
                 const Tensor& post_clip) override {
        steps.push_back(step);
        pre.push_back(pre_clip);
        post.push_back(post_clip);
    }
};

double linf(const Tensor& a, const Tensor& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace

TEST_CASE("purify with zero iterations is the identity") {
    Rng rng(1);
    Tensor x = random_tensor({3, 4}, rng, 0.0, 1.0);
    PurifyConfig cfg;
    cfg.iterations = 0;
    CHECK(bitwise_equal(purify(scaled_identity_disc(3.0), x, cfg), x));
}

TEST_CASE("a zero-gradient discriminator never moves the input") {
    Rng rng(2);
    Tensor x = random_tensor({2, 6}, rng, 0.0, 1.0);
    DiscLogitFn flat = [](Tape& t, Var v) {
        return ops::per_example_sum(ops::scale(v, 0.0));
    };
    PurifyConfig cfg;
    cfg.iterations = 8;
    cfg.alpha = 0.05;
    cfg.epsilon = 0.2;
    CHECK(bitwise_equal(purify(flat, x, cfg), x));
}

TEST_CASE("1-D surrogate with logit 3x walks down at alpha per step") {
    // p = sigmoid(3x) has strictly positive gradient, so every step moves
    // exactly -alpha until the ball clip binds.
    Tensor x = Tensor::from_data({1, 1}, {0.8});
    PurifyConfig cfg;
    cfg.alpha = 0.02;
    cfg.epsilon = 0.12;
    cfg.iterations = 10;
    Tensor out = purify(scaled_identity_disc(3.0), x, cfg);
    // 10 steps of 0.02 = 0.2 wants 0.6; the ball stops at 0.8 - 0.12 = 0.68
    CHECK(out[0] == doctest::Approx(0.68));

    cfg.iterations = 4;  // 0.08 < epsilon: unconstrained walk
    out = purify(scaled_identity_disc(3.0), x, cfg);
    CHECK(out[0] == doctest::Approx(0.72));

    // cross-check the gradient sign with the oracle on sigmoid(3x)
    Tensor g = finite_difference_gradient(
        [](const Tensor& v) { return 1.0 / (1.0 + std::exp(-3.0 * v[0])); }, x, 1e-6);
    CHECK(g[0] > 0.0);
}

TEST_CASE("logit-gradient flag follows the same trajectory on a monotone surrogate") {
    Tensor x = Tensor::from_data({1, 1}, {0.5});
    PurifyConfig cfg;
    cfg.alpha = 0.03;
    cfg.epsilon = 0.2;
    cfg.iterations = 3;
    cfg.use_logit_gradient = true;
    Tensor out = purify(scaled_identity_disc(3.0), x, cfg);
    CHECK(out[0] == doctest::Approx(0.41));
}

TEST_CASE("containment holds for random inputs and configs") {
    Rng rng(4);
    for (int trial = 0; trial < 30; ++trial) {
        Tensor x = random_tensor({2, 5}, rng, 0.0, 1.0);
        PurifyConfig cfg;
        cfg.alpha = uniform(rng, 0.0, 0.1);
        cfg.epsilon = uniform(rng, 0.0, 0.15);
        cfg.iterations = static_cast<int>(rng() % 12);
        Tensor out = purify(scaled_identity_disc(uniform(rng, -4.0, 4.0)), x, cfg);
        CHECK(linf(out, x) <= cfg.epsilon + 1e-12);
        for (std::size_t i = 0; i < out.size(); ++i) {
            CHECK(out[i] >= 0.0);
            CHECK(out[i] <= 1.0);
        }
    }
}

TEST_CASE("pre-clip movement per coordinate is exactly -alpha, 0, or +alpha") {
    Rng rng(5);
    Tensor x = random_tensor({3, 7}, rng, 0.0, 1.0);
    PurifyConfig cfg;
    cfg.alpha = 0.04;
    cfg.epsilon = 0.1;
    cfg.iterations = 6;
    StepRecorder rec;
    DiscLogitFn disc = [&](Tape& t, Var v) {
        Rng wr(9);
        Tensor w = random_tensor({7, 1}, wr);
        return ops::per_example_sum(
            ops::affine(v, t.leaf(w, false), t.leaf(Tensor::zeros({1}), false)));
    };
    purify(disc, x, cfg, &rec);
    REQUIRE(rec.steps.size() == 6);
    Tensor prev = x;
    for (std::size_t it = 0; it < rec.steps.size(); ++it) {
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double move = rec.steps[it][i];
            const bool legal = move == cfg.alpha || move == -cfg.alpha || move == 0.0;
            CHECK(legal);
            // and pre_clip really is the previous iterate plus that step
            CHECK(rec.pre[it][i] == prev[i] + move);
        }
        prev = rec.post[it];
    }
}

TEST_CASE("the two clips are idempotent") {
    Rng rng(6);
    Tensor x = random_tensor({4, 4}, rng, 0.0, 1.0);
    Tensor v = random_tensor({4, 4}, rng, -0.5, 1.5);
    Tensor once = clip_unit(clip_to_ball(v, x, 0.07));
    Tensor twice = clip_unit(clip_to_ball(once, x, 0.07));
    CHECK(bitwise_equal(once, twice));
}

TEST_CASE("purification is deterministic") {
    Rng rng(7);
    Tensor x = random_tensor({2, 6}, rng, 0.0, 1.0);
    PurifyConfig cfg;
    cfg.alpha = 0.02;
    cfg.epsilon = 0.1;
    cfg.iterations = 7;
    DiscLogitFn disc = scaled_identity_disc(-2.0);
    CHECK(bitwise_equal(purify(disc, x, cfg), purify(disc, x, cfg)));
}

TEST_CASE("purify validates its config") {
    Tensor x = Tensor::full({1, 1}, 0.5);
    PurifyConfig cfg;
    cfg.epsilon = -0.1;
    CHECK_THROWS_AS(purify(scaled_identity_disc(1.0), x, cfg), DomainError);
    cfg.epsilon = 0.1;
    cfg.alpha = -0.01;
    CHECK_THROWS_AS(purify(scaled_identity_disc(1.0), x, cfg), DomainError);
    cfg.alpha = 0.01;
    cfg.iterations = -1;
    CHECK_THROWS_AS(purify(scaled_identity_disc(1.0), x, cfg), DomainError);
}

TEST_CASE("purification lowers discriminator scores on attacked batches") {
    // End-to-end on a small trained pair: adversarial batches score high,
    // purified ones lower on average.
    ClassifierSpec cs;
    cs.in_channels = 1;
    cs.in_h = 12;
    cs.in_w = 12;
    cs.widths = {6, 12};
    cs.classes = 3;
    cs.tap_low = 0;
    cs.tap_high = 1;
    auto [train, test] = synth_blob_splits(44, 384, 96, 12, 3);
    ClassifierModel clf = build_classifier(cs, 8);
    TrainConfig tc;
    tc.epochs = 3;
    tc.batch_size = 32;
    tc.seed = 5;
    train_natural(clf, train, tc);

    AVmixupConfig av;
    av.train_attack.epsilon = 0.06;
    av.train_attack.step_size = 0.02;
    av.train_attack.iterations = 5;
    DiscriminatorSpec ds;
    ds.c_low = 6;
    ds.c_high = 12;
    ds.branch_widths = {16};
    ds.trunk_widths = {16};
    DiscriminatorModel disc = build_discriminator(ds, 9);
    TrainConfig dtc = tc;
    dtc.epochs = 1;
    train_discriminator(clf, disc, train, dtc, av);

    std::vector<std::size_t> idx(test.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    auto [x, y] = gather(test, idx);
    AttackConfig attack;
    attack.epsilon = 0.06;
    attack.step_size = 0.02;
    attack.iterations = 5;
    attack.seed = 3;
    Tensor x_adv = pgd(classifier_logits_fn(clf), x, y, attack);

    PurifyConfig pc;
    pc.epsilon = 0.06;
    pc.alpha = 0.02;
    pc.iterations = 8;
    Tensor x_pur = purify(clf, disc, x_adv, pc);

    Tensor s_adv = discriminate_batch(clf, disc, x_adv);
    Tensor s_pur = discriminate_batch(clf, disc, x_pur);
    double ma = 0.0, mp = 0.0;
    for (std::size_t i = 0; i < s_adv.size(); ++i) {
        ma += s_adv[i];
        mp += s_pur[i];
    }
    CHECK(mp < ma);
}
