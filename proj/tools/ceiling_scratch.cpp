// Detectability ceiling probe: logistic regression on GAP tap features.
#include <chrono>
#include <iostream>

#include "aidp/config.hpp"
#include "aidp/purifier.hpp"

using namespace aidp;

int main(int argc, char** argv) {
    std::uint64_t seed = argc > 1 ? std::stoull(argv[1]) : 2;
    auto [train, test_full] = synth_blob_splits(seed, 4000, 1000, 32, 4);
    Dataset test = head(test_full, 300);

    ClassifierSpec cs;
    cs.in_channels = 1;
    cs.in_h = 32;
    cs.in_w = 32;
    cs.widths = {16, 32, 64};
    cs.classes = 4;
    cs.tap_low = 0;
    cs.tap_high = 2;
    ClassifierModel nat = build_classifier(cs, seed);
    TrainConfig ntc;
    ntc.epochs = 5;
    ntc.lr = 0.05;
    ntc.seed = seed;
    train_natural(nat, train, ntc);

    auto taps80 = [&](const Tensor& x) {
        Tape t;
        ClassifierOut out = classifier_forward(nat, t, t.leaf(x, false));
        Var f = ops::concat(ops::global_average_pool(out.h_low),
                            ops::global_average_pool(out.h_high));
        return f.value();  // [N,80]
    };

    // Build a feature training set from 1500 train images: clean + PGD-10 adv.
    Dataset sub = head(train, 1500);
    std::vector<std::size_t> idx(sub.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    auto [x, y] = gather(sub, idx);
    AttackConfig tr_attack;
    tr_attack.epsilon = 16.0 / 255.0;
    tr_attack.step_size = 4.0 / 255.0;
    tr_attack.iterations = 10;
    tr_attack.seed = seed + 5;
    Tensor x_adv = pgd(classifier_logits_fn(nat), x, y, tr_attack);
    Tensor f_clean = taps80(x);
    Tensor f_adv = taps80(x_adv);

    const std::size_t n = f_clean.extent(0), d = f_clean.extent(1);
    Tensor feats = Tensor::uninit({2 * n, d});
    std::copy(f_clean.data(), f_clean.data() + f_clean.size(), feats.data());
    std::copy(f_adv.data(), f_adv.data() + f_adv.size(), feats.data() + f_clean.size());
    Tensor labels = Tensor::uninit({2 * n});
    for (std::size_t i = 0; i < n; ++i) labels[i] = 0.0;
    for (std::size_t i = 0; i < n; ++i) labels[n + i] = 1.0;

    // Long logistic regression on the features (the ceiling estimate).
    Tensor w = Tensor::zeros({d, 1});
    Tensor b = Tensor::zeros({1});
    SgdState st;
    SgdConfig sc{0.05, 0.9, 0.0};
    for (int epoch = 0; epoch < 300; ++epoch) {
        Tape t;
        Var fv = t.leaf(feats, false);
        Var wv = t.leaf(w, true);
        Var bv = t.leaf(b, true);
        Var z = ops::per_example_sum(ops::affine(fv, wv, bv));
        Var loss = ops::bce_with_logits(z, t.leaf(labels, false));
        t.backward(loss);
        sgd_step("w", w, wv.grad(), sc, st);
        sgd_step("b", b, bv.grad(), sc, st);
        if (epoch == 299) std::cout << "probe loss " << loss.value()[0] << "\n";
    }

    // Held-out AUC against the EVAL attack (PGD-40).
    std::vector<std::size_t> tidx(test.size());
    for (std::size_t i = 0; i < tidx.size(); ++i) tidx[i] = i;
    auto [tx, ty] = gather(test, tidx);
    AttackConfig ev = tr_attack;
    ev.iterations = 40;
    ev.step_size = 2.0 / 255.0;
    ev.seed = seed + 9;
    Tensor tx_adv = pgd(classifier_logits_fn(nat), tx, ty, ev);
    auto score = [&](const Tensor& imgs) {
        Tensor f = taps80(imgs);
        std::vector<double> s(f.extent(0));
        for (std::size_t i = 0; i < s.size(); ++i) {
            double z = b[0];
            for (std::size_t k = 0; k < d; ++k) z += f[i * d + k] * w[k];
            s[i] = z;
        }
        return s;
    };
    std::cout << "ceiling AUC = " << auc_from_scores(score(tx), score(tx_adv)) << "\n";
    return 0;
}
