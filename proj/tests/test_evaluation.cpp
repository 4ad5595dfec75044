#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "aidp/evaluation.hpp"
#include "aidp/training.hpp"
#include "test_helpers.hpp"

using namespace aidp;
using namespace aidp::testing;

namespace {

ClassifierSpec small_spec() {
    ClassifierSpec s;
    s.in_channels = 1;
    s.in_h = 12;
    s.in_w = 12;
    s.widths = {6, 12};
    s.classes = 4;
    s.tap_low = 0;
    s.tap_high = 1;
    return s;
}

EvalReport sample_report() {
    EvalReport r;
    r.dataset = "synth-blobs(classes=4,n=100)";
    r.classifier_id = "clf.aidp";
    r.clean_accuracy = 0.97;
    AttackRow row1;
    row1.attack = "pgd";
    row1.config = default_attack(AttackKind::pgd);
    row1.accuracy = 0.41;
    row1.n = 100;
    AttackRow row2;
    row2.attack = "mim";
    row2.config = default_attack(AttackKind::mim);
    row2.accuracy = 0.38;
    row2.n = 100;
    r.attacks = {row1, row2};
    r.worst_accuracy = 0.38;
    r.seed = 7;
    r.config_echo = {{"attack.epsilon", "0.03137254901960784"}, {"seed", "7"}};
    return r;
}

}  // namespace

TEST_CASE("worst_case_accuracy on the published four-attack row") {
    // Accuracy percentages 38.17 / 59.08 / 28.34 / 22.63: worst is 22.63.
    CHECK(worst_case_accuracy(std::vector<double>{38.17, 59.08, 28.34, 22.63}) == 22.63);
    CHECK(worst_case_accuracy(std::vector<double>{0.5}) == 0.5);
    CHECK(worst_case_accuracy(std::vector<double>{22.63, 38.17, 59.08, 28.34}) == 22.63);
    CHECK_THROWS_AS(worst_case_accuracy(std::vector<double>{}), ContractError);
}

TEST_CASE("auc from scores: separation, ties, and the 3/4 pair case") {
    CHECK(auc_from_scores({0.1, 0.2}, {0.8, 0.9}) == 1.0);
    CHECK(auc_from_scores({0.3, 0.7}, {0.3, 0.7}) == 0.5);
    CHECK(auc_from_scores({0.1, 0.4}, {0.3, 0.9}) == 0.75);
    CHECK_THROWS_AS(auc_from_scores({}, {0.5}), ContractError);
    // invariance under a strictly monotone transform
    auto squash = [](std::vector<double> v) {
        for (double& x : v) x = 1.0 / (1.0 + std::exp(-5.0 * x));
        return v;
    };
    std::vector<double> clean = {0.12, 0.5, 0.31};
    std::vector<double> adv = {0.4, 0.45, 0.9};
    CHECK(auc_from_scores(clean, adv) ==
          doctest::Approx(auc_from_scores(squash(clean), squash(adv))));
}

TEST_CASE("random classifier at epsilon zero sits near chance accuracy") {
    auto [train, test] = synth_blob_splits(51, 16, 400, 12, 4);
    ClassifierModel clf = build_classifier(small_spec(), 77);
    EvalContext ctx;
    ctx.classifier = &clf;
    AttackConfig attack;
    attack.epsilon = 0.0;
    attack.step_size = 0.0;
    attack.iterations = 0;
    double acc = robust_accuracy(ctx, attack, test);
    // binomial 3-sigma band around 1/4 with n=400: 0.25 +- 0.065
    CHECK(acc > 0.25 - 0.065);
    CHECK(acc < 0.25 + 0.065);
}

TEST_CASE("attacks cannot move a classifier that ignores its input") {
    auto [train, test] = synth_blob_splits(52, 16, 64, 12, 4);
    ClassifierModel clf = build_classifier(small_spec(), 3);
    // zero every parameter except the head bias: logits constant in x
    for (auto& [name, t] : clf.params)
        for (std::size_t i = 0; i < t.size(); ++i) t[i] = 0.0;
    clf.param("head.b")[2] = 1.0;
    EvalContext ctx;
    ctx.classifier = &clf;
    AttackConfig attack;
    attack.epsilon = 0.1;
    attack.step_size = 0.03;
    attack.iterations = 5;
    attack.random_start = false;
    double clean = clean_accuracy(ctx, test);
    double robust = robust_accuracy(ctx, attack, test);
    CHECK(clean == robust);
}

TEST_CASE("a zero-iteration purifier changes nothing in evaluation") {
    auto [train, test] = synth_blob_splits(53, 128, 64, 12, 4);
    ClassifierModel clf = build_classifier(small_spec(), 5);
    TrainConfig tc;
    tc.epochs = 2;
    tc.batch_size = 32;
    tc.seed = 2;
    train_natural(clf, train, tc);
    DiscriminatorSpec ds;
    ds.c_low = 6;
    ds.c_high = 12;
    ds.branch_widths = {8};
    ds.trunk_widths = {8};
    DiscriminatorModel disc = build_discriminator(ds, 6);

    AttackConfig attack;
    attack.epsilon = 0.05;
    attack.step_size = 0.02;
    attack.iterations = 4;
    attack.seed = 11;

    EvalContext plain;
    plain.classifier = &clf;
    PurifyConfig pc;
    pc.iterations = 0;
    EvalContext with_noop;
    with_noop.classifier = &clf;
    with_noop.discriminator = &disc;
    with_noop.purify = &pc;

    CHECK(robust_accuracy(plain, attack, test) == robust_accuracy(with_noop, attack, test));
}

TEST_CASE("evaluation is invariant to the worker count") {
    auto [train, test] = synth_blob_splits(54, 64, 150, 12, 4);
    ClassifierModel clf = build_classifier(small_spec(), 9);
    AttackConfig attack;
    attack.epsilon = 0.04;
    attack.step_size = 0.02;
    attack.iterations = 3;
    attack.random_start = true;
    attack.seed = 21;
    EvalContext c1;
    c1.classifier = &clf;
    c1.workers = 1;
    EvalContext c4 = c1;
    c4.workers = 4;
    CHECK(robust_accuracy(c1, attack, test) == robust_accuracy(c4, attack, test));
}

TEST_CASE("surrogate equal to the target reproduces white-box accuracy") {
    auto [train, test] = synth_blob_splits(55, 64, 100, 12, 4);
    ClassifierModel clf = build_classifier(small_spec(), 13);
    EvalContext ctx;
    ctx.classifier = &clf;
    AttackConfig attack;
    attack.epsilon = 0.05;
    attack.step_size = 0.02;
    attack.iterations = 4;
    attack.random_start = true;
    attack.seed = 5;
    CHECK(black_box_eval(clf, ctx, attack, test) == robust_accuracy(ctx, attack, test));

    attack.epsilon = 0.0;
    attack.iterations = 0;
    CHECK(black_box_eval(clf, ctx, attack, test) == clean_accuracy(ctx, test));
}

TEST_CASE("transfer attacks are typically weaker than white-box ones") {
    std::vector<double> diffs;
    for (std::uint64_t seed : {71, 72, 73}) {
        auto [train, test] = synth_blob_splits(60 + seed, 512, 128, 12, 4);
        ClassifierModel target = build_classifier(small_spec(), seed);
        ClassifierSpec other = small_spec();
        other.widths = {8, 10};
        ClassifierModel surrogate = build_classifier(other, seed + 1000);
        TrainConfig tc;
        tc.epochs = 2;
        tc.batch_size = 64;
        tc.seed = seed;
        train_natural(target, train, tc);
        train_natural(surrogate, train, tc);

        EvalContext ctx;
        ctx.classifier = &target;
        AttackConfig attack;
        attack.epsilon = 0.06;
        attack.step_size = 0.02;
        attack.iterations = 6;
        attack.seed = seed;
        diffs.push_back(black_box_eval(surrogate, ctx, attack, test) -
                        robust_accuracy(ctx, attack, test));
    }
    std::sort(diffs.begin(), diffs.end());
    CHECK(diffs[1] >= 0.0);  // median over three seeds
}

TEST_CASE("json report round trips byte-identically") {
    EvalReport r = sample_report();
    write_report(r, "t_report.json", ReportFormat::json);
    EvalReport r2 = read_report("t_report.json");
    write_report(r2, "t_report2.json", ReportFormat::json);
    std::ifstream f1("t_report.json", std::ios::binary), f2("t_report2.json", std::ios::binary);
    std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(b1 == b2);
    CHECK(r2.attacks.size() == 2);
    CHECK(r2.attacks[1].accuracy == 0.38);
    CHECK(r2.worst_accuracy == worst_case_accuracy(r2.attacks));
    CHECK(r2.config_echo == r.config_echo);
    std::remove("t_report.json");
    std::remove("t_report2.json");
}

TEST_CASE("csv projection has one header plus one row per attack") {
    EvalReport r = sample_report();
    write_report(r, "t_report.csv", ReportFormat::csv);
    std::ifstream in("t_report.csv");
    std::string line;
    std::vector<std::string> lines;
    while (std::getline(in, line)) lines.push_back(line);
    REQUIRE(lines.size() == 3);
    CHECK(lines[0] == "attack,epsilon,step,iters,accuracy,n");
    CHECK(lines[1].substr(0, 4) == "pgd,");
    std::remove("t_report.csv");
}

TEST_CASE("report reader rejects unknown versions") {
    {
        std::ofstream out("t_bad.json");
        out << "{\"version\": 9}\n";
    }
    CHECK_THROWS_AS(read_report("t_bad.json"), FormatError);
    std::remove("t_bad.json");
}

TEST_CASE("timing scales linearly in the iteration count") {
    auto [train, test] = synth_blob_splits(56, 16, 32, 12, 4);
    ClassifierModel clf = build_classifier(small_spec(), 3);
    DiscriminatorSpec ds;
    ds.c_low = 6;
    ds.c_high = 12;
    ds.branch_widths = {8};
    ds.trunk_widths = {8};
    DiscriminatorModel disc = build_discriminator(ds, 4);

    PurifyConfig p10;
    p10.iterations = 10;
    EvalContext ctx;
    ctx.classifier = &clf;
    ctx.discriminator = &disc;
    ctx.purify = &p10;
    TimingInfo t10 = measure_timing(ctx, test, 40, 5);
    PurifyConfig p20 = p10;
    p20.iterations = 20;
    ctx.purify = &p20;
    TimingInfo t20 = measure_timing(ctx, test, 40, 5);
    CHECK(t10.purify_seconds_per_image > 0.0);
    const double ratio = t20.purify_seconds_per_image / t10.purify_seconds_per_image;
    CHECK(ratio > 1.5);
    CHECK(ratio < 2.5);
}
