// Scratch driver for preset tuning; not part of the build by default.
#include <iostream>
#include <chrono>

#include "aidp/config.hpp"
#include "aidp/purifier.hpp"

using namespace aidp;

int main(int argc, char** argv) {
    std::uint64_t seed = argc > 1 ? std::stoull(argv[1]) : 1;
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
    {
        TrainConfig ntc;
        ntc.epochs = 5;
        ntc.lr = 0.05;
        ntc.seed = seed;
        train_natural(nat, train, ntc);
    }

    AVmixupConfig av;
    av.gamma = 2.0;
    av.train_attack.epsilon = 16.0 / 255.0;
    av.train_attack.step_size = 4.0 / 255.0;
    av.train_attack.iterations = 10;
    if (argc > 6) av.train_attack.iterations = std::stoi(argv[6]);
    DiscriminatorSpec ds;
    ds.c_low = 16;
    ds.c_high = 64;
    ds.branch_widths = {64, 64};
    ds.trunk_widths = {64, 32};
    if (argc > 5) {
        std::size_t w = std::stoul(argv[5]);
        ds.branch_widths = {w, w};
        ds.trunk_widths = {w, w / 2};
    }
    DiscriminatorModel disc = build_discriminator(ds, seed + 50);
    TrainConfig tc;
    tc.epochs = 1;
    tc.seed = seed;
    if (argc > 2) tc.batch_size = std::stoul(argv[2]);
    if (argc > 3) tc.lr = std::stod(argv[3]);
    auto t0 = std::chrono::steady_clock::now();
    train_discriminator(nat, disc, train, tc, av);
    std::cout << "D train seconds: "
              << std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()
              << "\n";

    // held-out AUC clean vs PGD-adv at the preset attack
    std::vector<std::size_t> idx(test.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    auto [x, y] = gather(test, idx);
    AttackConfig attack;
    attack.epsilon = 16.0 / 255.0;
    attack.step_size = 2.0 / 255.0;
    attack.iterations = 40;
    attack.seed = seed + 7;
    Tensor x_adv = pgd(classifier_logits_fn(nat), x, y, attack);
    double auc = detector_auc(disc, nat, x, x_adv);
    std::cout << "AUC(clean vs adv) = " << auc << "\n";

    // purification sanity: mean score drop and accuracy recovery on the natural model
    PurifyConfig pc;
    pc.epsilon = 16.0 / 255.0;
    pc.alpha = argc > 4 ? parse_fraction(argv[4], 0) : 4.0 / 255.0;
    pc.iterations = 10;
    Tensor x_pur = purify(nat, disc, x_adv, pc);
    auto acc = [&](const Tensor& xs) {
        std::vector<int> pred = predict_batch(nat, xs);
        std::size_t c = 0;
        for (std::size_t i = 0; i < y.size(); ++i)
            if (pred[i] == y[i]) ++c;
        return static_cast<double>(c) / y.size();
    };
    std::cout << "acc adv " << acc(x_adv) << " -> purified " << acc(x_pur) << "\n";
    std::cout << "acc clean " << acc(x) << " -> purified " << acc(purify(nat, disc, x, pc))
              << "\n";
    return 0;
}
